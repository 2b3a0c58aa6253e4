"""Evaluable theoretical quantities backing the selection rules.

Covers the geometric growth constants of the variance/bias/weight profiles,
the finite-sample bound on the selection probability of each index, the
moment-risk equivalence constants for Gaussian errors, and weighted
chi-square tail bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import RiskProfiles, SpectralProblem, Subsampling, error_paths, replication_stream
from .selection import balance_index

__all__ = [
    "LOG_ABS_NORMAL_MEAN",
    "AssumptionConstants",
    "assumption_constants",
    "effective_block_dimension",
    "criterion_scale_ratio",
    "selection_probability_bound",
    "expected_log_abs_normal",
    "moment_equivalence_constant",
    "admissible_moment_order",
    "chi2_lower_tail_bound",
    "chi2_upper_tail_bound",
    "bayes_rms_risk",
    "MomentRiskEstimate",
    "moment_risk_mc",
    "theory_report",
]

# E log|Z| for standard normal Z: -(Euler-Mascheroni + log 2) / 2.
LOG_ABS_NORMAL_MEAN = -(np.euler_gamma + math.log(2.0)) / 2.0


def expected_log_abs_normal() -> float:
    """Mean of log|Z| for a standard normal Z (closed form)."""
    return LOG_ABS_NORMAL_MEAN


@dataclass(frozen=True)
class AssumptionConstants:
    """Extremal one-step ratios of the variance, bias and weight profiles.

    Ratios are oriented so geometric growth/decay reads as values above 1:
    variance ratios are s(n+1)/s(n), bias ratios b(n)/b(n+1), weight ratios
    chi(n)/chi(n+1).
    """

    variance_ratio_min: float
    variance_ratio_max: float
    bias_ratio_min: float
    bias_ratio_max: float
    weight_ratio_min: float
    weight_ratio_max: float

    @property
    def geometric_growth_ok(self) -> bool:
        """Strict geometric growth of variance and decay of bias."""
        return self.variance_ratio_min > 1.0 and self.bias_ratio_min > 1.0

    @property
    def weight_compatible_ok(self) -> bool:
        """Weight ratios sit strictly inside the window the profiles allow."""
        return (
            1.0 / self.bias_ratio_min < self.weight_ratio_min
            and self.weight_ratio_max < self.variance_ratio_min
        )

    @property
    def valid(self) -> bool:
        return self.geometric_growth_ok and self.weight_compatible_ok

    def to_json_dict(self) -> dict:
        return {
            "variance_ratio_min": self.variance_ratio_min,
            "variance_ratio_max": self.variance_ratio_max,
            "bias_ratio_min": self.bias_ratio_min,
            "bias_ratio_max": self.bias_ratio_max,
            "weight_ratio_min": self.weight_ratio_min,
            "weight_ratio_max": self.weight_ratio_max,
            "geometric_growth_ok": self.geometric_growth_ok,
            "weight_compatible_ok": self.weight_compatible_ok,
            "valid": self.valid,
        }


def assumption_constants(variance, bias, weights) -> AssumptionConstants:
    """Extremal consecutive ratios over the supplied profile ranges.

    All entries must be strictly positive; pass the positive prefix of a
    truncated bias profile.
    """
    s = np.asarray(variance, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    for name, arr in (("variance", s), ("bias", b), ("weights", w)):
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise ValueError(f"{name} profile needs at least two entries")
        if np.any(arr <= 0):
            raise ValueError(f"{name} profile must be strictly positive")
    rs = s[1:] / s[:-1]
    rb = b[:-1] / b[1:]
    rw = w[:-1] / w[1:]
    return AssumptionConstants(
        variance_ratio_min=float(rs.min()),
        variance_ratio_max=float(rs.max()),
        bias_ratio_min=float(rb.min()),
        bias_ratio_max=float(rb.max()),
        weight_ratio_min=float(rw.min()),
        weight_ratio_max=float(rw.max()),
    )


def effective_block_dimension(
    problem: SpectralProblem, subsampling: Subsampling, profiles: RiskProfiles
) -> np.ndarray:
    """Expected criterion increment over the largest single-coefficient term.

    For each selectable index the weighted mean of the criterion block is
    divided by the block's largest per-coefficient second moment; with unit
    weights this is the block's effective dimension and is at least 1
    (asserted; non-unit weights can break that lower bound, which is raised
    as an error).
    """
    s = profiles.variance
    b = profiles.bias
    chi = profiles.chi
    per_k = problem.sigma() ** 2 + problem.prior_scales**2
    lev = subsampling.levels
    n = subsampling.n_select
    out = np.empty(n)
    for i in range(n):
        block_max = np.max(per_k[lev[i] : lev[i + 1]])
        mean_increment = chi[i] * ((s[i + 1] - s[i]) + (b[i] - b[i + 1]))
        out[i] = abs(mean_increment) / block_max
    if np.any(out < 1.0 - 1e-12):
        raise ValueError("effective block dimension fell below 1; rescale the weights")
    return out


def criterion_scale_ratio(constants: AssumptionConstants, n: int, n_sharp: int) -> float:
    """Geometric bound on the criterion scale at index n against the balance index.

    Decays in |n - n_sharp| with rate set by the growth constants; values of
    1 or more make the selection bound vacuous.
    """
    if n < 1 or n_sharp < 1:
        raise ValueError("indices are 1-based")
    m = abs(n - n_sharp)
    if n >= n_sharp:
        pref = (constants.bias_ratio_max * constants.variance_ratio_max - 1.0) / (
            constants.variance_ratio_min - 1.0
        )
        rate = constants.variance_ratio_min / constants.weight_ratio_max
    else:
        pref = (constants.bias_ratio_max * constants.variance_ratio_max - 1.0) / (
            constants.bias_ratio_min - 1.0
        )
        rate = constants.bias_ratio_min * constants.weight_ratio_min
    if rate <= 1.0:
        return float("inf")
    return float(pref * rate**-m)


def selection_probability_bound(effective_dim: float, scale_ratio: float) -> float:
    """Bound on the probability that the criterion minimizer lands at an index.

    Capped at 1; a unit value means the bound is vacuous there.
    """
    r = float(effective_dim)
    rho = float(scale_ratio)
    if r < 1.0:
        raise ValueError("effective dimension must be at least 1")
    if rho <= 0.0:
        raise ValueError("scale ratio must be positive")
    if rho >= 1.0:
        return 1.0
    base = rho * math.log(1.0 / rho)
    value = (math.sqrt(2.0) + (2.0 * math.e * r) ** (r / 2.0)) * base ** (r / 2.0)
    return float(min(value, 1.0))


def moment_equivalence_constant(alpha: float, bias_ratio_max: float) -> float:
    """Oracle factor tying the balance-index risk to the best moment risk."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if bias_ratio_max < 1.0:
        raise ValueError("bias growth constant must be at least 1")
    gamma_term = (4.0 * math.gamma(alpha / 2.0 + 1.0)) ** (1.0 / alpha)
    return float(math.sqrt(2.0 * bias_ratio_max) * gamma_term * math.exp(-LOG_ABS_NORMAL_MEAN))


def moment_sandwich_factors(alpha: float) -> tuple[float, float]:
    """Lower/upper factors tying the alpha-moment risk to the RMS risk."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lo = math.exp(LOG_ABS_NORMAL_MEAN)
    hi = (4.0 * math.gamma(alpha / 2.0 + 1.0)) ** (1.0 / alpha)
    return float(lo), float(hi)


def admissible_moment_order(effective_dim: float, constants: AssumptionConstants) -> float:
    """Largest moment order the selection-probability tail control supports."""
    if effective_dim < 1.0:
        raise ValueError("effective dimension must be at least 1")
    left = math.log(constants.bias_ratio_min * constants.weight_ratio_min) / math.log(
        constants.bias_ratio_max
    )
    right = math.log(constants.variance_ratio_min / constants.weight_ratio_max) / math.log(
        constants.variance_ratio_max
    )
    return float(effective_dim * min(left, right))


def chi2_lower_tail_bound(z: float, max_weight: float) -> float:
    """Bound on P(Z <= z) for Z a unit-mean weighted chi-square combination.

    ``max_weight`` is the largest normalized weight; valid for z in (0, 1).
    """
    if not 0.0 < z < 1.0:
        raise ValueError("z must lie in (0, 1)")
    if not 0.0 < max_weight <= 1.0:
        raise ValueError("max_weight must lie in (0, 1]")
    return float(math.exp((1.0 - z + math.log(z)) / (2.0 * max_weight)))


def chi2_upper_tail_bound(z: float) -> float:
    """Bound on P(Z >= z) for the same family, any weights."""
    if z <= 0:
        raise ValueError("z must be positive")
    return float(math.sqrt(2.0) * math.exp(-z / 4.0))


def bayes_rms_risk(variance, bias, n: int) -> float:
    """Root mean squared risk at index n: sqrt(variance + bias)."""
    s = np.asarray(variance, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if not 1 <= n <= min(s.shape[0], b.shape[0]):
        raise IndexError("index outside the profile range")
    return float(math.sqrt(s[n - 1] + b[n - 1]))


@dataclass(frozen=True)
class MomentRiskEstimate:
    value: float
    standard_error: float
    n_draws: int


def moment_risk_mc(
    problem: SpectralProblem,
    subsampling: Subsampling,
    n: int,
    alpha: float,
    n_draws: int,
    master_seed: int,
    domain: int = 0,
) -> MomentRiskEstimate:
    """Monte Carlo alpha-moment risk of the cut-off estimator at index n.

    Value is (mean ||error||^alpha)^(1/alpha); the standard error is mapped
    through the power by the delta method.
    """
    if not 1 <= n <= subsampling.n_select:
        raise IndexError("index outside the selectable range")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sq = np.empty(n_draws)
    chunk = 1024
    k_max = problem.k_max
    sigma = problem.sigma()
    for start in range(0, n_draws, chunk):
        stop = min(start + chunk, n_draws)
        rows = stop - start
        truth = np.empty((rows, k_max))
        observed = np.empty((rows, k_max))
        for i in range(rows):
            rng = replication_stream(master_seed, start + i, domain)
            truth[i] = rng.standard_normal(k_max) * problem.prior_scales
            observed[i] = truth[i] + rng.standard_normal(k_max) * sigma
        sq[start:stop] = error_paths(truth, observed, subsampling.levels, k_max)[:, n - 1]
    h = sq ** (alpha / 2.0)
    mean = float(h.mean())
    se_mean = float(h.std(ddof=1) / math.sqrt(n_draws))
    value = mean ** (1.0 / alpha)
    se = se_mean * value / (alpha * mean) if mean > 0 else float("nan")
    return MomentRiskEstimate(value=value, standard_error=se, n_draws=n_draws)


def theory_report(
    problem: SpectralProblem,
    subsampling: Subsampling,
    profiles: RiskProfiles,
    alphas=(1.0, 2.0, 4.0),
) -> dict:
    """Bundle constants, per-index bounds and moment constants as JSON data."""
    s, b, chi = profiles.variance, profiles.bias, profiles.chi
    # Ratio constants need strictly positive entries; a truncated bias profile
    # may end in zero, so use its positive prefix.
    positive = int(np.sum(b > 0))
    if positive < 2:
        raise ValueError("bias profile has fewer than two positive entries")
    constants = assumption_constants(s[:positive], b[:positive], chi[: min(positive, chi.shape[0])])
    n_sharp = balance_index(s, b)
    eff_dim = effective_block_dimension(problem, subsampling, profiles)
    per_n = []
    for i in range(subsampling.n_select):
        rho = criterion_scale_ratio(constants, i + 1, n_sharp)
        bound = selection_probability_bound(eff_dim[i], rho) if math.isfinite(rho) else 1.0
        per_n.append(
            {
                "n": i + 1,
                "effective_dimension": float(eff_dim[i]),
                "scale_ratio": rho if math.isfinite(rho) else "inf",
                "selection_bound": bound,
                "vacuous": bound >= 1.0,
            }
        )
    r_min = float(eff_dim.min())
    return {
        "constants": constants.to_json_dict(),
        "n_sharp": n_sharp,
        "per_n": per_n,
        "admissible_moment_order": admissible_moment_order(r_min, constants),
        "moment_constants": {
            str(a): moment_equivalence_constant(a, constants.bias_ratio_max) for a in alphas
        },
        "rms_risk": [bayes_rms_risk(s, b, i + 1) for i in range(min(s.shape[0], b.shape[0]))],
    }
