"""Data-driven cut-off selection for spectrally diagonal inverse problems.

The package implements the sequence-space observation model, the
quasi-optimality / Lepski / hardened-balancing selection rules with their
theoretical constants and probability bounds, batched Monte Carlo drivers,
and a spectral option-calibration experiment exercising the same rules on a
jump-diffusion model.
"""

from ._kernels import backend_name, backends, segment_sq_sums, segment_sq_sums_diff
from .model import (
    CHI_INVERSE_SQRT_S,
    CHI_TABLE,
    CHI_UNIT,
    RiskProfiles,
    SimulationDraw,
    SpectralProblem,
    Subsampling,
    TruncationWarning,
    bias_profile,
    block_square_sums,
    criterion_path,
    draw_instance,
    draw_replication,
    error_paths,
    noise_to_signal,
    replication_stream,
    risk_profiles,
    true_error_path,
    variance_profile,
)
from .selection import (
    DegenerateDrawError,
    EfficiencyHistogram,
    HISTOGRAM_EDGES,
    NoCrossingError,
    SelectionReport,
    analyze_draw,
    balance_index,
    bin_efficiencies,
    efficiency,
    lepski_f,
    select_hardened_balancing,
    select_lepski,
    select_quasi_optimality,
)
from .simulate import METHODS, SequenceExperimentResult, replicate_paths, run_sequence_experiment
from .theory import (
    AssumptionConstants,
    LOG_ABS_NORMAL_MEAN,
    MomentRiskEstimate,
    admissible_moment_order,
    assumption_constants,
    bayes_rms_risk,
    chi2_lower_tail_bound,
    chi2_upper_tail_bound,
    criterion_scale_ratio,
    effective_block_dimension,
    expected_log_abs_normal,
    moment_equivalence_constant,
    moment_risk_mc,
    moment_sandwich_factors,
    selection_probability_bound,
    theory_report,
)
from .levy import (
    LevyExperimentConfig,
    LevyExperimentResult,
    MertonModel,
    ObservationSet,
    PriceCurve,
    SpectralGrid,
    backward_transform,
    cutoff_density_estimate,
    empirical_transform,
    estimate_s_profile,
    forward_transform,
    l2_error,
    martingale_drift,
    price_curve,
    run_levy_experiment,
    simulate_observations,
)

__version__ = "0.1.0"
