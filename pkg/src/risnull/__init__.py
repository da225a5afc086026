"""RIS reflection-coefficient nulling under channel-state perturbations.

A numpy library in four layers: channel generation and the received-power
objective (:mod:`risnull.channels`), the coefficient solvers
(:mod:`risnull.solvers`), first-order sensitivity and fast updates
(:mod:`risnull.sensitivity`), and the seeded Monte Carlo experiment
harness (:mod:`risnull.experiments`, :mod:`risnull.config`).
"""

from .channels import (
    ChannelSet,
    Perturbation,
    RisVector,
    apply_perturbation,
    complex_normal,
    effective_matrix,
    gen_channels,
    gen_perturbation,
    received_signal,
    signal_level,
)
from .config import ConfigError, ExperimentConfig, load_config, loads_config
from .experiments import (
    TrialRecord,
    csv_text,
    emit_plot_script,
    failed_cells,
    read_csv,
    run_correction_experiment,
    run_drift_experiment,
    run_experiment,
    run_perturb_sweep,
    run_snr_sweep,
    to_db,
    write_csv,
)
from .sensitivity import (
    CorrectionCache,
    DriftReport,
    MatvecCounter,
    apply_correction,
    build_correction_cache,
    count_correction_cost,
    delta_d,
    delta_d_lasso,
    delta_d_lss,
    delta_d_lss_components,
    delta_d_pinv,
    delta_d_ridge,
    delta_effective_matrix,
    delta_f_lss,
    delta_f_lss_components,
    delta_f_lss_quadratic,
    delta_soft_threshold,
    drift_report,
    first_order_correct,
    true_drift,
)
from .solvers import (
    METHODS,
    RankDeficientError,
    SolveResult,
    SolverSpec,
    clip_unit,
    lasso_closed_form_orthonormal,
    pinv,
    soft_threshold,
    solve_channel,
    solve_clipped_pinv,
    solve_lasso_ista,
    solve_lss,
    solve_pgd,
    solve_pinv,
    solve_ridge,
    solve_system,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "Perturbation", "RisVector",
    "complex_normal", "gen_channels", "gen_perturbation", "apply_perturbation",
    "effective_matrix", "signal_level", "received_signal",
    "METHODS", "RankDeficientError", "SolverSpec", "SolveResult",
    "pinv", "solve_lss", "solve_pinv", "clip_unit", "solve_clipped_pinv",
    "solve_ridge", "soft_threshold", "solve_lasso_ista",
    "lasso_closed_form_orthonormal", "solve_pgd", "solve_system", "solve_channel",
    "MatvecCounter", "DriftReport", "CorrectionCache",
    "delta_effective_matrix", "delta_d", "delta_d_lss", "delta_d_lss_components",
    "delta_d_pinv", "delta_d_ridge", "delta_d_lasso", "delta_soft_threshold",
    "delta_f_lss", "delta_f_lss_components", "delta_f_lss_quadratic",
    "true_drift", "first_order_correct",
    "build_correction_cache", "apply_correction", "count_correction_cost",
    "drift_report",
    "ConfigError", "ExperimentConfig", "load_config", "loads_config",
    "TrialRecord", "run_snr_sweep", "run_perturb_sweep",
    "run_correction_experiment", "run_drift_experiment", "run_experiment",
    "write_csv", "read_csv", "csv_text", "emit_plot_script", "failed_cells", "to_db",
]
