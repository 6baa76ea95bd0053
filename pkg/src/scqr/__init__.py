"""Penalized convolution-smoothed composite quantile regression."""

from .admm import AdmmConfig, penalized_check_objective, prox_check, solve_cqr_admm, solve_cqr_admm_irw
from .core import (
    Dataset,
    Kernel,
    PenaltyFamily,
    PenaltySpec,
    QuantileGrid,
    check_loss,
    composite_check_loss,
    penalty_weight,
    quantile_grid,
    soft_threshold,
)
from .estimator import ModelFit, fit_model
from .lamm import FitResult, LammConfig, solve_irw, solve_weighted_l1
from .loss import (
    ParamVector,
    SmoothedLossSpec,
    default_bandwidth,
    hessian_quadratic_form,
    loss_gradient,
    loss_value,
    smoothed_check,
)
from .tuning import (
    LambdaGrid,
    TuneReport,
    bic,
    cross_validate,
    pivotal_lambda,
    select_bic,
    select_pivotal,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "Dataset",
    "FitResult",
    "Kernel",
    "LambdaGrid",
    "LammConfig",
    "ModelFit",
    "ParamVector",
    "PenaltyFamily",
    "PenaltySpec",
    "QuantileGrid",
    "SmoothedLossSpec",
    "TuneReport",
    "bic",
    "check_loss",
    "composite_check_loss",
    "cross_validate",
    "default_bandwidth",
    "fit_model",
    "hessian_quadratic_form",
    "loss_gradient",
    "loss_value",
    "penalized_check_objective",
    "penalty_weight",
    "pivotal_lambda",
    "prox_check",
    "quantile_grid",
    "select_bic",
    "select_pivotal",
    "smoothed_check",
    "soft_threshold",
    "solve_cqr_admm",
    "solve_cqr_admm_irw",
    "solve_irw",
    "solve_weighted_l1",
]
