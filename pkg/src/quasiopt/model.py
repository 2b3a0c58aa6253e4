"""Sequence-space observation model for diagonalized linear inverse problems.

The model works coefficient-wise: a truth sequence drawn from a centered
Gaussian prior is observed through attenuating eigenvalues under white noise.
Cut-off estimators keep the leading coefficients up to a subsampled level;
this module provides the problem/subsampling containers, the variance and
squared-bias profiles of those estimators, Gaussian draws with deterministic
seed splitting, and the per-draw criterion and true-error paths.

Indexing convention: coefficient indices ``k`` and selection indices ``n``
are 1-based throughout the public API (array position ``k-1`` holds entry
``k``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "TruncationWarning",
    "SpectralProblem",
    "Subsampling",
    "RiskProfiles",
    "CHI_UNIT",
    "CHI_INVERSE_SQRT_S",
    "CHI_TABLE",
    "SimulationDraw",
    "noise_to_signal",
    "variance_profile",
    "bias_profile",
    "risk_profiles",
    "replication_stream",
    "draw_instance",
    "draw_replication",
    "criterion_path",
    "true_error_path",
    "block_square_sums",
    "error_paths",
]

CHI_UNIT = "unit"
CHI_INVERSE_SQRT_S = "inverse_sqrt_s"
CHI_TABLE = "table"

# Tail mass beyond the stored coefficient range is considered negligible when
# the last prior variance is below this fraction of the smallest bias value.
TRUNCATION_TOLERANCE = 1e-6


class TruncationWarning(UserWarning):
    """The stored coefficient range truncates a non-negligible prior tail."""


def _as_float_array(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class SpectralProblem:
    """Eigenvalues, noise scales and prior scales of a diagonal model.

    eigenvalues
        Attenuation factors lambda(k), positive and nonincreasing.
    noise_scales
        Per-coefficient noise levels eps(k), strictly positive.
    prior_scales
        Prior standard deviations gamma(k), nonnegative.
    """

    eigenvalues: np.ndarray
    noise_scales: np.ndarray
    prior_scales: np.ndarray

    def __post_init__(self):
        lam = _as_float_array(self.eigenvalues, "eigenvalues")
        eps = _as_float_array(self.noise_scales, "noise_scales")
        gam = _as_float_array(self.prior_scales, "prior_scales")
        if not (lam.shape == eps.shape == gam.shape):
            raise ValueError("eigenvalues, noise_scales and prior_scales must have equal length")
        if np.any(lam <= 0):
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be nonincreasing")
        if np.any(eps <= 0):
            raise ValueError("noise_scales must be strictly positive")
        if np.any(gam < 0):
            raise ValueError("prior_scales must be nonnegative")
        for name, arr in (("eigenvalues", lam), ("noise_scales", eps), ("prior_scales", gam)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k_max(self) -> int:
        return int(self.eigenvalues.shape[0])

    def sigma(self) -> np.ndarray:
        """Effective noise-to-signal scales eps(k)/lambda(k), full array."""
        return self.noise_scales / self.eigenvalues

    @classmethod
    def power_law(cls, delta: float, nu: float, mu: float, k_max: int) -> "SpectralProblem":
        """Polynomially ill-posed family: lambda(k)=k^-nu, eps(k)=delta, gamma(k)=k^-mu."""
        if delta <= 0:
            raise ValueError("delta must be positive")
        if nu < 0 or mu <= 0:
            raise ValueError("exponents must satisfy nu >= 0, mu > 0")
        k = np.arange(1, int(k_max) + 1, dtype=np.float64)
        return cls(k**-nu, np.full(k.shape, float(delta)), k**-mu)


def noise_to_signal(problem: SpectralProblem, k: int) -> float:
    """Effective noise scale of coefficient ``k`` (1-based)."""
    if not 1 <= k <= problem.k_max:
        raise IndexError(f"k={k} outside 1..{problem.k_max}")
    return float(problem.noise_scales[k - 1] / problem.eigenvalues[k - 1])


@dataclass(frozen=True)
class Subsampling:
    """Strictly increasing cut-off levels plus the criterion weight family.

    levels
        l(n) for n = 1..N+1; the selection rules act on n = 1..N.
    chi_kind
        One of ``unit``, ``inverse_sqrt_s``, ``table``.
    chi_table
        Explicit positive weights (length N), required iff kind is ``table``.
    """

    levels: np.ndarray
    chi_kind: str = CHI_UNIT
    chi_table: np.ndarray | None = None

    def __post_init__(self):
        lev = np.asarray(self.levels, dtype=np.int64)
        if lev.ndim != 1 or lev.shape[0] < 2:
            raise ValueError("levels must hold at least two entries")
        if lev[0] < 1 or np.any(np.diff(lev) <= 0):
            raise ValueError("levels must be strictly increasing positive integers")
        lev.setflags(write=False)
        object.__setattr__(self, "levels", lev)
        if self.chi_kind not in (CHI_UNIT, CHI_INVERSE_SQRT_S, CHI_TABLE):
            raise ValueError(f"unknown weight kind {self.chi_kind!r}")
        if self.chi_kind == CHI_TABLE:
            if self.chi_table is None:
                raise ValueError("table weights require chi_table")
            tab = _as_float_array(self.chi_table, "chi_table")
            if tab.shape[0] != self.n_select:
                raise ValueError("chi_table must hold one weight per selectable index")
            if np.any(tab <= 0):
                raise ValueError("weights must be strictly positive")
            tab.setflags(write=False)
            object.__setattr__(self, "chi_table", tab)
        elif self.chi_table is not None:
            raise ValueError("chi_table is only meaningful with the table kind")

    @property
    def n_levels(self) -> int:
        return int(self.levels.shape[0])

    @property
    def n_select(self) -> int:
        """Number of selectable indices N (levels run to N+1)."""
        return self.n_levels - 1

    def chi_weights(self, variance: np.ndarray) -> np.ndarray:
        """Evaluate the weight sequence on n = 1..N.

        ``variance`` is the per-level variance profile; it is only consulted
        by the ``inverse_sqrt_s`` family.
        """
        n = self.n_select
        if self.chi_kind == CHI_UNIT:
            return np.ones(n)
        if self.chi_kind == CHI_TABLE:
            return self.chi_table.copy()
        s = np.asarray(variance, dtype=np.float64)[:n]
        if np.any(s <= 0):
            raise ValueError("inverse_sqrt_s weights need a strictly positive variance profile")
        return s**-0.5

    @classmethod
    def geometric(cls, base: int, factor: int, count: int, **chi) -> "Subsampling":
        """Levels base*factor^n for n = 1..count."""
        if base < 1 or factor < 2 or count < 2:
            raise ValueError("need base >= 1, factor >= 2, count >= 2")
        lev = base * np.power(int(factor), np.arange(1, count + 1, dtype=np.int64))
        if np.any(lev <= 0):
            raise ValueError("levels overflow int64")
        return cls(lev, **chi)


@dataclass(frozen=True)
class RiskProfiles:
    """Per-level variance/bias profiles and the evaluated criterion weights."""

    variance: np.ndarray  # one entry per level
    bias: np.ndarray  # one entry per level
    chi: np.ndarray  # one entry per selectable index


def _check_levels(problem: SpectralProblem, subsampling: Subsampling):
    if subsampling.levels[-1] > problem.k_max:
        raise ValueError(
            f"largest level {subsampling.levels[-1]} exceeds stored range k_max={problem.k_max}"
        )


def variance_profile(problem: SpectralProblem, subsampling: Subsampling) -> np.ndarray:
    """Cumulative noise variance of the cut-off estimator at each level."""
    _check_levels(problem, subsampling)
    cum = np.concatenate(([0.0], np.cumsum(problem.sigma() ** 2)))
    s = cum[subsampling.levels]
    if np.any(np.diff(s) <= 0):
        raise ValueError("variance profile must be strictly increasing")
    return s


def bias_profile(problem: SpectralProblem, subsampling: Subsampling) -> np.ndarray:
    """Squared prior bias (tail mass above each level), one entry per level.

    Warns when the stored coefficient range truncates a tail that is not
    negligible next to the smallest bias value in use.
    """
    _check_levels(problem, subsampling)
    gam2 = problem.prior_scales**2
    cum = np.concatenate(([0.0], np.cumsum(gam2)))
    b = cum[-1] - cum[subsampling.levels]
    if np.any(np.diff(b) > 0):
        raise ValueError("bias profile must be nonincreasing")
    # Reference point: bias at the last selectable level N.
    b_ref = b[subsampling.n_select - 1]
    tail = gam2[-1]
    if tail > 0 and (b_ref <= 0 or tail >= TRUNCATION_TOLERANCE * b_ref):
        warnings.warn(
            "prior tail at k_max is not negligible against the bias profile; "
            "increase k_max for validated use",
            TruncationWarning,
            stacklevel=2,
        )
    return b


def risk_profiles(problem: SpectralProblem, subsampling: Subsampling) -> RiskProfiles:
    s = variance_profile(problem, subsampling)
    b = bias_profile(problem, subsampling)
    return RiskProfiles(variance=s, bias=b, chi=subsampling.chi_weights(s))


# =====================================================================
# draws
# =====================================================================


@dataclass(frozen=True)
class SimulationDraw:
    """One synthetic truth/observation pair (optionally seed-tagged)."""

    truth: np.ndarray
    observed: np.ndarray
    seed: tuple[int, int] | None = None

    def __post_init__(self):
        if self.truth.shape != self.observed.shape:
            raise ValueError("truth and observed must share a shape")


def replication_stream(master_seed: int, index: int, domain: int = 0) -> np.random.Generator:
    """Independent RNG stream for one replication.

    Splitting rule: stream (domain, index) is PCG64 seeded with
    ``SeedSequence(master_seed, spawn_key=(domain, index))``.  Streams are
    reproducible individually, independent of evaluation order, and safe to
    use concurrently.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(domain), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def draw_instance(problem: SpectralProblem, rng: np.random.Generator) -> SimulationDraw:
    """Draw a truth from the prior and its noisy observation.

    Call order on ``rng`` is fixed (truth first, then noise) so a replayed
    stream reproduces the draw bit-for-bit.
    """
    truth = rng.standard_normal(problem.k_max) * problem.prior_scales
    observed = truth + rng.standard_normal(problem.k_max) * problem.sigma()
    truth.setflags(write=False)
    observed.setflags(write=False)
    return SimulationDraw(truth=truth, observed=observed)


def draw_replication(problem: SpectralProblem, master_seed: int, index: int) -> SimulationDraw:
    """Draw replication ``index`` of the stream family under ``master_seed``."""
    draw = draw_instance(problem, replication_stream(master_seed, index))
    return SimulationDraw(draw.truth, draw.observed, seed=(int(master_seed), int(index)))


# =====================================================================
# per-draw paths
# =====================================================================


def block_square_sums(observed, levels, impl=None) -> np.ndarray:
    """Sums of squared observations over blocks (l(n), l(n+1)], row-wise.

    ``observed`` may be one draw (1-d) or a stack of draws (2-d); the result
    has one column per selectable index.  The squared distance between the
    cut-off estimators at levels n < m is the sum of columns n..m-1.
    """
    observed = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    bounds = np.asarray(levels, dtype=np.int64)
    return _kernels.segment_sq_sums(observed, bounds, impl=impl)


def error_paths(truth, observed, levels, k_max, impl=None) -> np.ndarray:
    """Squared estimation error of each cut-off estimator, row-wise.

    For level l(n): noise energy below the cut plus truth energy above it.
    Levels enter as the full per-level array; only n = 1..N is returned.
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    observed = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    levels = np.asarray(levels, dtype=np.int64)
    bounds = np.concatenate(([0], levels, [k_max]))
    noise_seg = _kernels.segment_sq_sums_diff(observed, truth, bounds, impl=impl)
    truth_seg = _kernels.segment_sq_sums(truth, bounds, impl=impl)
    n = levels.shape[0] - 1
    noise_below = np.cumsum(noise_seg, axis=1)[:, :n]
    truth_total = truth_seg.sum(axis=1, keepdims=True)
    truth_above = truth_total - np.cumsum(truth_seg, axis=1)[:, :n]
    return noise_below + truth_above


def criterion_path(
    draw: SimulationDraw, subsampling: Subsampling, profiles: RiskProfiles
) -> np.ndarray:
    """Weighted squared block increments D(n) of the cut-off family."""
    blocks = block_square_sums(draw.observed, subsampling.levels)[0]
    return profiles.chi * blocks


def true_error_path(draw: SimulationDraw, subsampling: Subsampling) -> np.ndarray:
    """Exact squared error of each cut-off estimator against the truth."""
    if subsampling.levels[-1] > draw.truth.shape[0]:
        raise ValueError("levels exceed the draw's coefficient range")
    return error_paths(draw.truth, draw.observed, subsampling.levels, draw.truth.shape[0])[0]
