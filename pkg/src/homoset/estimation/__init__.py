"""Homography estimators over the reprojection cost."""

from .bundle import (
    AugLagOptions,
    EstimationReport,
    ESTIMATORS,
    ba_explicit,
    ba_implicit,
    ba_unconstrained,
    dlt_all,
    estimate,
    estimate_dlt,
    explicit_constraints,
)
from .cost import MlState, RmsReport, evaluate_rms, ml_cost, optimal_corrections
from .dlt import dlt, hartley_normalize, transform_points
from .lm import LMOptions, LMResult, dense_step, lm_minimize
