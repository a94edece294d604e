"""Decoy-state QKD link performance model for afterpulsing SPAD receiver arrays."""

from .bounds import (
    LinkMetrics,
    SinglePhotonEstimate,
    binary_entropy,
    estimate_single_photon,
    evaluate_link,
    skr_approx,
    skr_lower_bound,
)
from .config import Scenario, load_scenario, parse_scenario, scenario_to_dict
from .errors import (
    DecoyLinkError,
    DegenerateInputError,
    EstimationInfeasibleError,
    ModelDomainError,
    NoSolutionError,
    ValidationError,
)
from .model import (
    ChannelModel,
    DetectorUnit,
    IntensitySet,
    ProtocolParams,
    ReceiverModel,
    aggregate_afterpulse,
    baseline_error_change,
    decoy_consistency_check,
    effective_baseline_error,
    gain_total,
    multi_photon_transmittance,
    qber_i,
    qber_total,
    transmittance,
    visibility,
    yield_background,
    yield_i,
)
from .optimize import (
    ContourPoint,
    MaximizeResult,
    OptimalMu,
    SolverConfig,
    dark_count_threshold,
    maximize_skr_over_mu,
    solve_optimal_mu,
    trace_iso_qber_surface,
)
from .sweep import (
    NU1_BY_LOSS_DB,
    Axis,
    ResultRecord,
    SweepSpec,
    distance_to_loss,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "ChannelModel",
    "ContourPoint",
    "DecoyLinkError",
    "DegenerateInputError",
    "DetectorUnit",
    "EstimationInfeasibleError",
    "IntensitySet",
    "LinkMetrics",
    "MaximizeResult",
    "ModelDomainError",
    "NU1_BY_LOSS_DB",
    "NoSolutionError",
    "OptimalMu",
    "ProtocolParams",
    "ReceiverModel",
    "ResultRecord",
    "Scenario",
    "SinglePhotonEstimate",
    "SolverConfig",
    "SweepSpec",
    "ValidationError",
    "aggregate_afterpulse",
    "baseline_error_change",
    "binary_entropy",
    "dark_count_threshold",
    "decoy_consistency_check",
    "distance_to_loss",
    "effective_baseline_error",
    "estimate_single_photon",
    "evaluate_link",
    "gain_total",
    "load_scenario",
    "maximize_skr_over_mu",
    "multi_photon_transmittance",
    "parse_scenario",
    "qber_i",
    "qber_total",
    "run_sweep",
    "scenario_to_dict",
    "skr_approx",
    "skr_lower_bound",
    "solve_optimal_mu",
    "trace_iso_qber_surface",
    "transmittance",
    "visibility",
    "yield_background",
    "yield_i",
]
