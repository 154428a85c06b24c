"""rotoranneal: Langevin annealing of O(2) rotor rings with tunable
interaction range, plus defect statistics and scaling analysis."""

__version__ = "0.1.0"

from .graph import CirculantGraph, connectance, neighbor_sums, new_circulant, quadratic_form
from .model import (
    AnnealSchedule,
    FrozenSchedule,
    PhysicalParams,
    RotorState,
    control_parameter,
    e_min,
    e_min_numeric,
    gradient,
    hamiltonian,
    schedule_at,
)
from .integrator import (
    IntegrationConfig,
    NoiseModel,
    run_batch,
    run_trajectory,
    step,
    thermal_init,
)
from .observables import (
    CorrelationAccumulator,
    CorrelationProfile,
    TrajectoryRecord,
    excess_energy_density,
    graph_defect_density,
    kink_density_1d,
    magnetization,
)
from .stats import BootstrapResult, EnsembleSummary, bootstrap, cumulant_ratios, cumulants
from .analysis import FitResult, KzPrediction, collapse_score, fit_correlation_length, fit_exponential, fit_power_law, kz_predict
from .config import ExperimentConfig, ResolvedConfig, resolve

__all__ = [
    "AnnealSchedule", "BootstrapResult", "CirculantGraph", "CorrelationAccumulator",
    "CorrelationProfile", "EnsembleSummary", "ExperimentConfig", "FitResult",
    "FrozenSchedule", "IntegrationConfig", "KzPrediction", "NoiseModel",
    "PhysicalParams", "ResolvedConfig", "RotorState", "TrajectoryRecord",
    "bootstrap", "collapse_score", "connectance", "control_parameter",
    "cumulant_ratios", "cumulants", "e_min", "e_min_numeric",
    "excess_energy_density", "fit_correlation_length", "fit_exponential",
    "fit_power_law", "gradient", "graph_defect_density", "hamiltonian",
    "kink_density_1d", "kz_predict", "magnetization", "neighbor_sums",
    "new_circulant", "quadratic_form", "resolve", "run_batch",
    "run_trajectory", "schedule_at", "step", "thermal_init",
]
