"""Command-line runner: parse one config document, run the mode, emit reports.

Outputs are deterministic in the master seed: CSV floats use ``repr``, JSON
is emitted sorted, nothing carries a timestamp, and every file is written
atomically (temp file in the target directory, then rename).  The manifest
written last embeds the fully resolved config, so a manifest fed back in as
``--config`` reproduces the run byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    levy_config_from_document,
    load_json_config,
    problem_from_config,
    resolve_config,
    subsampling_from_config,
)
from .levy import run_levy_experiment
from .model import risk_profiles
from .selection import balance_index
from .simulate import METHODS, run_sequence_experiment
from .theory import assumption_constants, theory_report

__all__ = ["main", "sequence_replication_rows", "levy_replication_rows"]

SEQUENCE_CSV_HEADER = ("replication", "method", "chosen_n", "oracle_n", "n_sharp", "efficiency")
LEVY_CSV_HEADER = ("replication", "method", "chosen_n", "oracle_n", "efficiency", "failed_flag")


def sequence_replication_rows(result) -> list:
    """Per-replication CSV rows (header first) for a sequence experiment."""
    rows = [SEQUENCE_CSV_HEADER]
    for i in range(result.n_replications):
        for method in METHODS:
            rows.append(
                (
                    str(i),
                    method,
                    str(int(result.chosen[method][i])),
                    str(int(result.oracle[i])),
                    str(int(result.n_sharp)),
                    repr(float(result.efficiency[method][i])),
                )
            )
    return rows


def levy_replication_rows(result) -> list:
    """Per-replication CSV rows (header first); failed replications keep a row."""
    rows = [LEVY_CSV_HEADER]
    for i, report in enumerate(result.reports):
        if report is None:
            for method in METHODS:
                rows.append((str(i), method, "", "", "", "1"))
            continue
        chosen = {"qo": report.n_qo, "lepski": report.n_lepski, "hbp": report.n_hbp}
        for method in METHODS:
            rows.append(
                (
                    str(i),
                    method,
                    str(int(chosen[method])),
                    str(int(report.n_oracle)),
                    repr(float(report.efficiency[method])),
                    "0",
                )
            )
    return rows


def _csv_text(rows) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    return buffer.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".quasiopt-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _method_stats(values, histogram) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    out = {
        "mean_efficiency": float(arr.mean()) if arr.size else None,
        "median_efficiency": float(np.median(arr)) if arr.size else None,
        "runaway_fraction": histogram.runaway_fraction,
        "histogram_counts": [int(c) for c in histogram.counts],
    }
    return out


def _run_sequence(resolved: dict, threads: int) -> dict:
    problem = problem_from_config(resolved)
    subsampling = subsampling_from_config(resolved)
    result = run_sequence_experiment(
        problem,
        subsampling,
        resolved["replications"],
        resolved["master_seed"],
        kappa=resolved["kappa"],
        lepski_denominator=resolved["lepski_denominator"],
        admissible_variance_ratio=resolved["admissible_variance_ratio"],
        threads=threads,
    )
    files = {"replications.csv": _csv_text(sequence_replication_rows(result))}
    for method in METHODS:
        files[f"histogram_{method}.csv"] = _csv_text(result.histograms[method].to_csv_rows())
    summary = {
        "mode": "sequence-sim",
        "replications": result.n_replications,
        "n_sharp": int(result.n_sharp),
        "admissible": [int(n) for n in result.admissible],
        "methods": {
            m: _method_stats(result.efficiency[m], result.histograms[m]) for m in METHODS
        },
    }
    files["summary.json"] = _json_text(summary)
    return files


def _run_theory(resolved: dict) -> dict:
    problem = problem_from_config(resolved)
    subsampling = subsampling_from_config(resolved)
    report = theory_report(
        problem,
        subsampling,
        risk_profiles(problem, subsampling),
        alphas=tuple(resolved["alphas"]),
    )
    return {"theory_report.json": _json_text(report)}


def _run_check(resolved: dict) -> dict:
    problem = problem_from_config(resolved)
    subsampling = subsampling_from_config(resolved)
    profiles = risk_profiles(problem, subsampling)
    s, b, chi = profiles.variance, profiles.bias, profiles.chi
    positive = int(np.sum(b > 0))
    if positive < 2:
        raise ConfigError("bias profile has fewer than two positive entries")
    constants = assumption_constants(s[:positive], b[:positive], chi[: min(positive, chi.shape[0])])
    payload = {
        "mode": "check-assumptions",
        "constants": constants.to_json_dict(),
        "valid": bool(constants.valid),
        "n_sharp": int(balance_index(s, b)),
    }
    return {"assumptions.json": _json_text(payload)}


def _run_levy(resolved: dict, threads: int) -> dict:
    config = levy_config_from_document(resolved)
    result = run_levy_experiment(config, resolved["master_seed"], threads=threads)
    files = {"replications.csv": _csv_text(levy_replication_rows(result))}
    for method in METHODS:
        files[f"histogram_{method}.csv"] = _csv_text(result.histograms[method].to_csv_rows())
    per_method = {}
    for method in METHODS:
        values = [r.efficiency[method] for r in result.reports if r is not None]
        per_method[method] = _method_stats(values, result.histograms[method])
    summary = {
        "mode": "levy-experiment",
        "replications": config.replications,
        "failures": result.n_failed,
        "failure_rate": result.failure_rate,
        "methods": per_method,
        "s_profile": {
            "values": [float(v) for v in result.s_profile.values],
            "monotone_violations": [int(n) for n in result.s_profile.monotone_violations],
            "calibration_sets": result.s_profile.n_sets,
            "attempts": result.s_profile.attempts,
        },
    }
    files["summary.json"] = _json_text(summary)
    return files


def _dispatch(resolved: dict, threads: int) -> list:
    mode = resolved["mode"]
    print(f"mode: {mode}")
    if mode == "sequence-sim":
        files = _run_sequence(resolved, threads)
    elif mode == "theory-report":
        files = _run_theory(resolved)
    elif mode == "check-assumptions":
        files = _run_check(resolved)
    else:
        files = _run_levy(resolved, threads)

    out_dir = resolved["output_dir"]
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out_dir!r}: {exc}") from exc
    names = sorted(files)
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    manifest = {
        "mode": mode,
        "version": __version__,
        "master_seed": resolved["master_seed"],
        "config": resolved,
        "config_sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "outputs": names,
    }
    for name in names + ["manifest.json"]:
        text = files[name] if name in files else _json_text(manifest)
        path = os.path.join(out_dir, name)
        try:
            _write_atomic(path, text)
        except OSError as exc:
            raise RuntimeError(f"failed writing {path!r}: {exc}") from exc
        print(f"wrote: {path}")
    return names


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": message, "kind": kind}) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quasiopt",
        description="Run cut-off selection experiments and theory checks from a JSON config.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON config document")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--replications", type=int, default=None, help="override replications")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    args = parser.parse_args(argv)

    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        document = load_json_config(args.config)
        resolved = resolve_config(
            document, seed=args.seed, replications=args.replications, out=args.out
        )
    except ConfigError as exc:
        _fail("config", str(exc))
        return 2
    try:
        _dispatch(resolved, args.threads)
    except ConfigError as exc:
        _fail("config", str(exc))
        return 2
    except Exception as exc:  # runtime failure boundary: report and exit nonzero
        _fail("runtime", str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
