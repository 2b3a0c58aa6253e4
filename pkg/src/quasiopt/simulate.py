"""Batched Monte Carlo engine for the sequence-space model.

Replications are generated from per-index RNG streams (see
``model.replication_stream``), reduced chunk-wise through the kernels, and
selected over with vectorized rules.  Results are independent of chunking
and thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import RiskProfiles, SpectralProblem, Subsampling, block_square_sums, error_paths, replication_stream, risk_profiles
from .selection import EfficiencyHistogram, bin_efficiencies, balance_index

__all__ = ["SequenceExperimentResult", "replicate_paths", "run_sequence_experiment", "METHODS"]

METHODS = ("qo", "lepski", "hbp")


def replicate_paths(
    problem: SpectralProblem,
    subsampling: Subsampling,
    n_replications: int,
    master_seed: int,
    domain: int = 0,
    chunk_size: int = 512,
    threads: int = 1,
    impl=None,
):
    """Block square sums and true error paths for every replication.

    Returns ``(blocks, errors)`` of shape (replications, N).  Replication i
    always uses stream (domain, i), so the output is invariant under chunk
    size and thread count.
    """
    if n_replications < 1:
        raise ValueError("need at least one replication")
    n = subsampling.n_select
    k_max = problem.k_max
    if subsampling.levels[-1] > k_max:
        raise ValueError("levels exceed the problem's coefficient range")
    sigma = problem.sigma()
    prior = problem.prior_scales
    blocks = np.empty((n_replications, n))
    errors = np.empty((n_replications, n))

    def fill(start: int):
        stop = min(start + chunk_size, n_replications)
        rows = stop - start
        truth = np.empty((rows, k_max))
        observed = np.empty((rows, k_max))
        for i in range(rows):
            rng = replication_stream(master_seed, start + i, domain)
            truth[i] = rng.standard_normal(k_max) * prior
            observed[i] = truth[i] + rng.standard_normal(k_max) * sigma
        blocks[start:stop] = block_square_sums(observed, subsampling.levels, impl=impl)
        errors[start:stop] = error_paths(truth, observed, subsampling.levels, k_max, impl=impl)

    starts = range(0, n_replications, chunk_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return blocks, errors


def _lepski_f_matrix(blocks: np.ndarray, variance: np.ndarray, denominator: str) -> np.ndarray:
    """Vectorized f(n) for every replication row."""
    m, n = blocks.shape
    cum = np.concatenate([np.zeros((m, 1)), np.cumsum(blocks, axis=1)], axis=1)
    if denominator == "s":
        denom = variance[:n]
    elif denominator == "sqrt_s":
        denom = np.sqrt(variance[:n])
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    f = np.zeros((m, n))
    for i in range(n - 1):
        # distances to every finer estimator m > n, normalized at m
        d = np.sqrt(cum[:, i + 1 : n] - cum[:, i : i + 1])
        f[:, i] = np.max(d / (4.0 * denom[i + 1 :]), axis=1)
    return f


def _vector_lepski(f: np.ndarray, kappa: float, admissible: np.ndarray) -> np.ndarray:
    ok = f[:, admissible - 1] <= kappa
    suffix_ok = np.flip(np.logical_and.accumulate(np.flip(ok, axis=1), axis=1), axis=1)
    first = np.argmax(suffix_ok, axis=1)
    none_ok = ~suffix_ok.any(axis=1)
    chosen = admissible[first]
    chosen[none_ok] = admissible[-1]
    return chosen


@dataclass(frozen=True)
class SequenceExperimentResult:
    """Vectorized per-replication outcomes of all selection rules."""

    chosen: dict[str, np.ndarray]
    oracle: np.ndarray
    efficiency: dict[str, np.ndarray]
    histograms: dict[str, EfficiencyHistogram]
    n_sharp: int
    profiles: RiskProfiles
    admissible: np.ndarray
    master_seed: int

    @property
    def n_replications(self) -> int:
        return int(self.oracle.shape[0])


def run_sequence_experiment(
    problem: SpectralProblem,
    subsampling: Subsampling,
    n_replications: int,
    master_seed: int,
    kappa: float = 0.75,
    lepski_denominator: str = "s",
    admissible_variance_ratio: float | None = 2.0,
    threads: int = 1,
    impl=None,
) -> SequenceExperimentResult:
    """Run every selection rule over independent replications.

    The Lepski and hardened-balancing scans are restricted to indices whose
    variance is at least ``admissible_variance_ratio`` below the largest
    selectable one (pass None to disable); the quasi-optimality rule and the
    oracle always use the full range.
    """
    prof = risk_profiles(problem, subsampling)
    n = subsampling.n_select
    n_sharp = balance_index(prof.variance, prof.bias)

    if admissible_variance_ratio is None:
        admissible = np.arange(1, n + 1)
    else:
        keep = prof.variance[n - 1] / prof.variance[:n] >= admissible_variance_ratio
        admissible = np.nonzero(keep)[0] + 1
        if admissible.size == 0:
            admissible = np.arange(1, n + 1)

    blocks, errors = replicate_paths(
        problem, subsampling, n_replications, master_seed, threads=threads, impl=impl
    )
    criterion = blocks * prof.chi[None, :]
    rows = np.arange(n_replications)

    n_qo = np.argmin(criterion, axis=1) + 1
    f = _lepski_f_matrix(blocks, prof.variance, lepski_denominator)
    n_lep = _vector_lepski(f, kappa, admissible)
    hbp_values = f[:, admissible - 1] * np.sqrt(prof.variance[admissible - 1])
    n_hbp = admissible[np.argmin(hbp_values, axis=1)]
    oracle = np.argmin(errors, axis=1) + 1

    best = errors[rows, oracle - 1]
    if np.any(best <= 0):
        raise ValueError("a replication produced an exactly-zero oracle error")
    chosen = {"qo": n_qo, "lepski": n_lep, "hbp": n_hbp}
    eff = {
        name: np.sqrt(errors[rows, idx - 1] / best) for name, idx in chosen.items()
    }
    histograms = {name: bin_efficiencies(v) for name, v in eff.items()}
    return SequenceExperimentResult(
        chosen=chosen,
        oracle=oracle,
        efficiency=eff,
        histograms=histograms,
        n_sharp=n_sharp,
        profiles=prof,
        admissible=admissible,
        master_seed=int(master_seed),
    )
