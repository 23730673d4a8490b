"""Flat Metric evaluation of point-source reconstructions."""

from .classical import (
    MetricPanel,
    PairingResult,
    efficiency,
    jaccard,
    metric_panel,
    pair_within_radius,
    precision_recall,
    rmse,
    rmsmd,
)
from .estimators import FlatMetric, LocalizationMetrics
from .flat import (
    DualPotentials,
    FlatMetricResult,
    SolverError,
    TransportDecomposition,
    TransportPlan,
    decompose_plan,
    flat_metric,
    flat_metric_bruteforce,
    reduce_to_transportation,
    solve_dual_lp,
    solve_transportation,
    wasserstein1,
)
from .measures import DiscreteMeasure, distance_matrix, new_measure, total_mass, uniform_normalize

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure",
    "DualPotentials",
    "FlatMetric",
    "FlatMetricResult",
    "LocalizationMetrics",
    "MetricPanel",
    "PairingResult",
    "SolverError",
    "TransportDecomposition",
    "TransportPlan",
    "decompose_plan",
    "distance_matrix",
    "efficiency",
    "flat_metric",
    "flat_metric_bruteforce",
    "jaccard",
    "metric_panel",
    "new_measure",
    "pair_within_radius",
    "precision_recall",
    "reduce_to_transportation",
    "rmse",
    "rmsmd",
    "solve_dual_lp",
    "solve_transportation",
    "total_mass",
    "uniform_normalize",
    "wasserstein1",
]
