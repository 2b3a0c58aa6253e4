"""JSON configuration ingestion for the command-line runner.

A run is described by one flat JSON document carrying a ``mode`` plus the
mode's parameters.  Resolution fills defaults and applies flag overrides so
the document stored in the run manifest is complete; feeding a manifest back
in reproduces the run (the embedded ``config`` member is unwrapped).
"""

from __future__ import annotations

import json

import numpy as np

from .levy import LevyExperimentConfig
from .model import CHI_TABLE, CHI_UNIT, CHI_INVERSE_SQRT_S, SpectralProblem, Subsampling

__all__ = [
    "ConfigError",
    "MODES",
    "load_json_config",
    "resolve_config",
    "problem_from_config",
    "subsampling_from_config",
    "levy_config_from_document",
]

MODES = ("sequence-sim", "theory-report", "levy-experiment", "check-assumptions")

# keys every mode accepts
_COMMON_KEYS = {"mode", "master_seed", "output_dir"}

_PROBLEM_KEYS = {"problem", "lambda", "eps", "gamma", "levels", "chi", "chi_table"}

_MODE_KEYS = {
    "sequence-sim": _PROBLEM_KEYS
    | {"replications", "kappa", "lepski_denominator", "admissible_variance_ratio"},
    "theory-report": _PROBLEM_KEYS | {"alphas"},
    "check-assumptions": _PROBLEM_KEYS,
    "levy-experiment": {
        "replications",
        "noise_level",
        "volatility",
        "jump_intensity",
        "maturity",
        "n_cutoffs",
        "cutoff_step",
        "excluded",
        "admissible_max",
        "kappa",
        "calibration_sets",
        "lepski_denominator",
        "grid_points",
        "grid_v_max",
        "synthesis_grid_points",
        "synthesis_v_max",
        "window",
        "n_design_normal",
        "n_design_uniform",
        "design_range",
    },
}

_MODE_DEFAULTS = {
    "sequence-sim": {
        "replications": 1000,
        "kappa": 0.75,
        "lepski_denominator": "s",
        "admissible_variance_ratio": 2.0,
    },
    "theory-report": {"alphas": [1.0, 2.0, 4.0]},
    "check-assumptions": {},
    "levy-experiment": {},  # dataclass defaults fill these at build time
}


class ConfigError(ValueError):
    """The configuration document cannot be used as given."""


def load_json_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object")
    return document


def _require(document: dict, key: str):
    if key not in document:
        raise ConfigError(f"missing required config key {key!r}")
    return document[key]


def resolve_config(
    document: dict,
    seed: int | None = None,
    replications: int | None = None,
    out: str | None = None,
) -> dict:
    """Validate, fill defaults, and apply flag overrides.

    Returns a complete document suitable for the manifest.  A manifest
    passed as the document is unwrapped to its stored config first.
    """
    if "config" in document and isinstance(document["config"], dict) and "mode" in document["config"]:
        document = document["config"]
    mode = _require(document, "mode")
    if mode not in MODES:
        raise ConfigError(f"unknown mode: {mode!r}")
    allowed = _COMMON_KEYS | _MODE_KEYS[mode]
    unknown = sorted(set(document) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys for mode {mode!r}: {unknown}")

    resolved = dict(_MODE_DEFAULTS[mode])
    if mode == "levy-experiment":
        # surface the experiment defaults so the manifest is self-contained
        base = LevyExperimentConfig()
        for name in _MODE_KEYS[mode]:
            value = getattr(base, name)
            resolved[name] = list(value) if isinstance(value, tuple) else value
    resolved.update(document)

    if seed is not None:
        resolved["master_seed"] = seed
    if replications is not None:
        resolved["replications"] = replications
    if out is not None:
        resolved["output_dir"] = out

    master_seed = resolved.get("master_seed", 0)
    if not isinstance(master_seed, int) or not 0 <= master_seed < 2**64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer")
    resolved["master_seed"] = master_seed
    resolved.setdefault("output_dir", "out")
    if not isinstance(resolved["output_dir"], str) or not resolved["output_dir"]:
        raise ConfigError("output_dir must be a nonempty string")
    if "replications" in resolved:
        reps = resolved["replications"]
        if not isinstance(reps, int) or reps < 1:
            raise ConfigError("replications must be a positive integer")
    return resolved


def _as_array(value, key: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"config key {key!r} must be a nonempty array")
    try:
        return np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} must hold numbers: {exc}") from exc


def _power_law_problem(spec: dict) -> SpectralProblem:
    kind = spec.get("kind")
    if kind != "power":
        raise ConfigError(f"unknown problem generator kind: {kind!r}")
    unknown = sorted(set(spec) - {"kind", "delta", "nu", "mu", "k_max"})
    if unknown:
        raise ConfigError(f"unknown problem generator keys: {unknown}")
    try:
        return SpectralProblem.power_law(
            delta=float(_require(spec, "delta")),
            nu=float(_require(spec, "nu")),
            mu=float(_require(spec, "mu")),
            k_max=int(_require(spec, "k_max")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid power-law problem: {exc}") from exc


def problem_from_config(document: dict) -> SpectralProblem:
    """Build the spectral problem from arrays or a generator description.

    Accepted forms: a ``problem`` generator object; the three keys
    ``lambda``/``eps``/``gamma`` as arrays; or those keys all holding one
    identical generator object.
    """
    if "problem" in document:
        spec = document["problem"]
        if not isinstance(spec, dict):
            raise ConfigError("config key 'problem' must be an object")
        return _power_law_problem(spec)
    values = [_require(document, key) for key in ("lambda", "eps", "gamma")]
    if any(isinstance(v, dict) for v in values):
        if not all(isinstance(v, dict) for v in values) or values.count(values[0]) != 3:
            raise ConfigError(
                "generator form requires one identical object under lambda, eps and gamma"
            )
        return _power_law_problem(values[0])
    arrays = [_as_array(v, k) for v, k in zip(values, ("lambda", "eps", "gamma"))]
    try:
        return SpectralProblem(*arrays)
    except ValueError as exc:
        raise ConfigError(f"invalid problem arrays: {exc}") from exc


def subsampling_from_config(document: dict) -> Subsampling:
    """Build the subsampling from a levels array/generator plus weight choice."""
    levels = _require(document, "levels")
    chi = document.get("chi", CHI_UNIT)
    kwargs: dict = {}
    if isinstance(chi, list):
        kwargs = {"chi_kind": CHI_TABLE, "chi_table": _as_array(chi, "chi")}
    elif chi in (CHI_UNIT, CHI_INVERSE_SQRT_S):
        kwargs = {"chi_kind": chi}
    elif chi == CHI_TABLE:
        kwargs = {
            "chi_kind": CHI_TABLE,
            "chi_table": _as_array(_require(document, "chi_table"), "chi_table"),
        }
    else:
        raise ConfigError(f"unknown chi weight family: {chi!r}")
    try:
        if isinstance(levels, dict):
            if levels.get("kind") != "geometric":
                raise ConfigError(f"unknown levels generator kind: {levels.get('kind')!r}")
            return Subsampling.geometric(
                base=int(_require(levels, "base")),
                factor=int(_require(levels, "factor")),
                count=int(_require(levels, "count")),
                **kwargs,
            )
        return Subsampling(np.asarray(levels, dtype=np.int64), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid levels: {exc}") from exc


def levy_config_from_document(document: dict) -> LevyExperimentConfig:
    """Build the experiment config from the resolved document."""
    fields = {}
    for name in _MODE_KEYS["levy-experiment"]:
        if name in document:
            value = document[name]
            fields[name] = tuple(value) if isinstance(value, list) else value
    try:
        return LevyExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid levy experiment config: {exc}") from exc
