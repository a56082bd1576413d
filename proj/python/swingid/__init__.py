"""Swing-equation inertia and damping identification."""

from ._core import (  # noqa: F401
    BusEstimate,
    Case,
    DerivativeMethod,
    Error,
    EstimatorConfig,
    NoiseSpec,
    Scenario,
    SampledTrajectory,
    add_noise,
    analytic_derivatives,
    build_library,
    default_library,
    estimate_all,
    estimate_node,
    estimate_to_json,
    finite_difference,
    load_case,
    load_trajectory_csv,
    parse_case,
    run_scenario,
    save_trajectory_csv,
    savgol_derivative,
    simulate,
    stlsq,
)
