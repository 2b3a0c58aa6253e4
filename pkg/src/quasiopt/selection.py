"""Data-driven cut-off selection rules and efficiency accounting.

All rules consume per-draw statistics only; none of them needs the noise
level.  Selection indices are 1-based.  Ties break to the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import RiskProfiles, SimulationDraw, Subsampling, block_square_sums, true_error_path

__all__ = [
    "NoCrossingError",
    "DegenerateDrawError",
    "HISTOGRAM_EDGES",
    "EfficiencyHistogram",
    "SelectionReport",
    "balance_index",
    "select_quasi_optimality",
    "pairwise_distances_from_blocks",
    "lepski_f_from_distances",
    "lepski_f",
    "select_lepski",
    "select_hardened_balancing",
    "efficiency",
    "bin_efficiencies",
    "analyze_draw",
]

# Efficiency bins: doubling-exponent edges, values >= 64 count as runaway.
HISTOGRAM_EDGES = (1.0, 2.0, 4.0, 16.0, 64.0)


class NoCrossingError(ValueError):
    """Variance and bias profiles do not cross inside the grid."""


class DegenerateDrawError(ValueError):
    """A draw produced an exactly-zero oracle error."""


def balance_index(variance, bias) -> int:
    """Largest index where the variance profile is still below the bias.

    Requires variance increasing and bias decreasing over a common range, so
    the crossing is unique.  Errors name the failing endpoint.
    """
    s = np.asarray(variance, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    length = min(s.shape[0], b.shape[0])
    if length < 2:
        raise ValueError("profiles must overlap on at least two indices")
    diff = s[:length] - b[:length]
    if diff[0] > 0:
        raise NoCrossingError("variance already exceeds bias at index 1")
    above = np.nonzero(diff > 0)[0]
    if above.size == 0:
        raise NoCrossingError(f"variance never exceeds bias up to index {length}")
    return int(above[0])  # 0-based position of first crossing == 1-based index before it


def select_quasi_optimality(criterion) -> int:
    """Index of the smallest weighted block increment (first on ties)."""
    d = np.asarray(criterion, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("criterion must be a nonempty 1-d sequence")
    if np.any(~np.isfinite(d)) or np.any(d < 0):
        raise ValueError("criterion values must be finite and nonnegative")
    return int(np.argmin(d)) + 1


def pairwise_distances_from_blocks(blocks) -> np.ndarray:
    """Estimator distances ||x_hat(m) - x_hat(n)|| from block square sums.

    ``blocks`` holds the squared block increments for n = 1..N; the result is
    an (N, N) matrix with entry (n-1, m-1) for n < m, zero elsewhere.  The
    distance spans blocks n..m-1, so index m = N is the largest reachable.
    """
    p = np.asarray(blocks, dtype=np.float64)
    cum = np.concatenate(([0.0], np.cumsum(p)))  # cum[j] = blocks below level j+1
    n = p.shape[0]
    dist = np.zeros((n, n))
    for i in range(n):
        dist[i, i + 1 :] = np.sqrt(cum[i + 1 : n] - cum[i])
    return dist


def lepski_f_from_distances(dist, variance, denominator: str = "s") -> np.ndarray:
    """Largest normalized distance to any finer estimator.

    ``f(n) = max_{m>n} ||x_hat(m) - x_hat(n)|| / (4 q(m))`` with ``q`` the
    variance profile (``denominator='s'``, verbatim rule) or its square root
    (``denominator='sqrt_s'``).  The last index has an empty max: f = 0.
    """
    dist = np.asarray(dist, dtype=np.float64)
    s = np.asarray(variance, dtype=np.float64)
    n = dist.shape[0]
    if dist.shape != (n, n) or s.shape[0] < n:
        raise ValueError("need a square distance matrix and a variance value per index")
    if np.any(s[:n] <= 0):
        raise ValueError("variance profile must be strictly positive")
    if denominator == "s":
        denom = s[:n]
    elif denominator == "sqrt_s":
        denom = np.sqrt(s[:n])
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    f = np.zeros(n)
    for i in range(n - 1):
        f[i] = np.max(dist[i, i + 1 :] / (4.0 * denom[i + 1 :]))
    return f


def lepski_f(
    draw: SimulationDraw,
    subsampling: Subsampling,
    variance,
    denominator: str = "s",
) -> np.ndarray:
    """Sequence-space f(n) built from the draw's block square sums."""
    blocks = block_square_sums(draw.observed, subsampling.levels)[0]
    dist = pairwise_distances_from_blocks(blocks)
    return lepski_f_from_distances(dist, np.asarray(variance), denominator)


def _admissible_indices(n: int, admissible) -> np.ndarray:
    if admissible is None:
        idx = np.arange(1, n + 1)
    else:
        idx = np.unique(np.asarray(admissible, dtype=np.int64))
        if idx.size == 0 or idx[0] < 1 or idx[-1] > n:
            raise ValueError("admissible indices must be a nonempty subset of 1..N")
    return idx


def select_lepski(f, kappa: float, admissible=None) -> int:
    """Smallest admissible index from which all later f values stay below kappa.

    The scan quantifies over admissible indices; when no index qualifies the
    largest admissible one is returned (most data-rich fallback).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    f = np.asarray(f, dtype=np.float64)
    idx = _admissible_indices(f.shape[0], admissible)
    ok = f[idx - 1] <= kappa
    suffix_ok = np.flip(np.logical_and.accumulate(np.flip(ok)))
    hits = np.nonzero(suffix_ok)[0]
    if hits.size == 0:
        return int(idx[-1])
    return int(idx[hits[0]])


def select_hardened_balancing(f, variance, admissible=None) -> int:
    """Admissible index minimizing f(n) * sqrt(variance(n)) (first on ties)."""
    f = np.asarray(f, dtype=np.float64)
    s = np.asarray(variance, dtype=np.float64)
    if s.shape[0] < f.shape[0]:
        raise ValueError("need a variance value per index")
    if np.any(s[: f.shape[0]] <= 0):
        raise ValueError("variance profile must be strictly positive")
    idx = _admissible_indices(f.shape[0], admissible)
    values = f[idx - 1] * np.sqrt(s[idx - 1])
    return int(idx[np.argmin(values)])


def efficiency(error_path, chosen: int) -> float:
    """Error of the chosen estimator relative to the best one, >= 1."""
    e = np.asarray(error_path, dtype=np.float64)
    if not 1 <= chosen <= e.shape[0]:
        raise IndexError(f"chosen index {chosen} outside 1..{e.shape[0]}")
    best = float(np.min(e))
    if best <= 0.0:
        raise DegenerateDrawError("oracle error is exactly zero")
    return float(np.sqrt(e[chosen - 1] / best))


@dataclass(frozen=True)
class EfficiencyHistogram:
    """Counts of efficiency values over the fixed doubling bins."""

    counts: np.ndarray
    total: int

    EDGES = HISTOGRAM_EDGES

    def bin_bounds(self):
        edges = list(self.EDGES) + [float("inf")]
        return list(zip(edges[:-1], edges[1:]))

    def to_csv_rows(self):
        rows = [("bin_low", "bin_high", "count")]
        for (lo, hi), c in zip(self.bin_bounds(), self.counts):
            rows.append((repr(lo), repr(hi), str(int(c))))
        return rows

    @property
    def runaway_fraction(self) -> float:
        """Share of values in the unbounded top bin."""
        if self.total == 0:
            return 0.0
        return float(self.counts[-1] / self.total)


def bin_efficiencies(values) -> EfficiencyHistogram:
    """Histogram efficiency values; every input lands in exactly one bin."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and (np.any(~np.isfinite(v)) or np.any(v < 1.0)):
        raise ValueError("efficiencies must be finite and >= 1")
    edges = np.asarray(HISTOGRAM_EDGES)
    counts = np.zeros(edges.shape[0], dtype=np.int64)
    if v.size:
        pos = np.searchsorted(edges, v, side="right") - 1
        counts += np.bincount(pos, minlength=edges.shape[0])
    return EfficiencyHistogram(counts=counts, total=int(v.size))


@dataclass(frozen=True)
class SelectionReport:
    """Per-draw outcome of every selection rule plus the oracle."""

    n_qo: int
    n_lepski: int
    n_hbp: int
    n_oracle: int
    n_sharp: int | None
    efficiency: dict[str, float]
    criterion: np.ndarray | None = None
    lepski: np.ndarray | None = None

    def __post_init__(self):
        for name in ("n_qo", "n_lepski", "n_hbp", "n_oracle"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a 1-based index")
        for name, v in self.efficiency.items():
            if not (np.isfinite(v) and v >= 1.0):
                raise ValueError(f"efficiency[{name!r}] must be finite and >= 1")

    def to_json_dict(self) -> dict:
        out = {
            "n_qo": self.n_qo,
            "n_lepski": self.n_lepski,
            "n_hbp": self.n_hbp,
            "n_oracle": self.n_oracle,
            "n_sharp": self.n_sharp,
            "efficiency": {k: float(v) for k, v in sorted(self.efficiency.items())},
        }
        if self.criterion is not None:
            out["criterion"] = [float(x) for x in self.criterion]
        if self.lepski is not None:
            out["lepski"] = [float(x) for x in self.lepski]
        return out


def analyze_draw(
    draw: SimulationDraw,
    subsampling: Subsampling,
    profiles: RiskProfiles,
    kappa: float = 0.75,
    lepski_denominator: str = "s",
    admissible=None,
) -> SelectionReport:
    """Run every selection rule on one draw and report efficiencies."""
    d = profiles.chi * block_square_sums(draw.observed, subsampling.levels)[0]
    f = lepski_f(draw, subsampling, profiles.variance, lepski_denominator)
    e = true_error_path(draw, subsampling)
    n_qo = select_quasi_optimality(d)
    n_lep = select_lepski(f, kappa, admissible)
    n_hbp = select_hardened_balancing(f, profiles.variance, admissible)
    n_oracle = int(np.argmin(e)) + 1
    n_sharp = balance_index(profiles.variance, profiles.bias)
    eff = {
        "qo": efficiency(e, n_qo),
        "lepski": efficiency(e, n_lep),
        "hbp": efficiency(e, n_hbp),
    }
    return SelectionReport(
        n_qo=n_qo,
        n_lepski=n_lep,
        n_hbp=n_hbp,
        n_oracle=n_oracle,
        n_sharp=n_sharp,
        efficiency=eff,
        criterion=d,
        lepski=f,
    )
