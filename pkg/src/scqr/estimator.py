"""One-call fitting: standardize, choose lambda, solve, map back to raw scale."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .admm import AdmmConfig
from .core import Dataset, Kernel, PenaltyFamily, quantile_grid
from .lamm import FitResult, LammConfig
from .loss import SmoothedLossSpec, default_bandwidth
from .tuning import (
    METHOD_SCQR,
    FitSettings,
    TuneReport,
    cross_validate,
    fit_path,
    select_bic,
    select_pivotal,
)

TUNE_MODES = ("cv", "bic", "pivotal")


@dataclass
class ModelFit:
    alpha: np.ndarray
    beta: np.ndarray
    lam: float
    h: Optional[float]
    q: int
    method: str
    penalty: str
    steps: List[FitResult]
    tune: Optional[TuneReport] = None

    @property
    def fit(self) -> FitResult:
        return self.steps[-1]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta != 0)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.steps)

    def to_dict(self) -> dict:
        return {
            "alpha": (self.alpha + 0.0).tolist(),
            "beta": (self.beta + 0.0).tolist(),
            "support": self.support.tolist(),
            "lambda": self.lam,
            "h": self.h,
            "q": self.q,
            "method": self.method,
            "penalty": self.penalty,
            "iterations": int(sum(r.iterations for r in self.steps)),
            "kkt_residual": None if np.isnan(self.fit.kkt_residual) else self.fit.kkt_residual,
            "converged": self.converged,
        }


def make_settings(n: int, p: int, method: str = METHOD_SCQR, penalty="l1", q: int = 19,
                  h: Optional[float] = None, kernel="gaussian", a: Optional[float] = None,
                  lamm: LammConfig = LammConfig(), admm: AdmmConfig = AdmmConfig()) -> FitSettings:
    grid = quantile_grid(q)
    loss = None
    if method == METHOD_SCQR:
        bw = default_bandwidth(n, p, grid) if h is None else float(h)
        loss = SmoothedLossSpec(grid, Kernel(kernel), bw)
    return FitSettings(grid=grid, family=PenaltyFamily(penalty), a=a, method=method,
                       loss=loss, lamm=lamm, admm=admm)


def fit_model(X, y, method: str = METHOD_SCQR, penalty="l1", lam: Optional[float] = None,
              tune: Optional[str] = None, q: int = 19, h: Optional[float] = None,
              kernel="gaussian", a: Optional[float] = None, seed: int = 0, folds: int = 5,
              standardize: bool = True, lamm: LammConfig = LammConfig(),
              admm: AdmmConfig = AdmmConfig(), pivotal_B: int = 200) -> ModelFit:
    """Fit penalized (S)CQR on raw arrays.

    Exactly one of ``lam`` and ``tune`` may be given; with neither, the pivotal
    rule picks lambda. Lambda refers to the standardized covariate scale when
    ``standardize`` is set; coefficients are always returned on the raw scale.
    """
    if lam is not None and tune is not None:
        raise ValueError("give either a fixed lambda or a tuning mode, not both")
    if lam is None and tune is None:
        tune = "pivotal"
    if tune is not None and tune not in TUNE_MODES:
        raise ValueError(f"unknown tuning mode {tune!r}; choose from {TUNE_MODES}")
    data = Dataset.from_arrays(X, y, standardize=standardize)
    settings = make_settings(data.n, data.p, method, penalty, q, h, kernel, a, lamm, admm)

    report = None
    if tune == "pivotal":
        report = select_pivotal(data, settings, B=pivotal_B, seed=seed, fit=False)
    elif tune == "bic":
        report = select_bic(data, settings)
    elif tune == "cv":
        report = cross_validate(data, settings, K=folds, seed=seed, refit=False)
    if report is not None:
        lam = report.chosen_lambda
    steps = fit_path(data, settings, [lam])[0]
    alpha, beta = data.to_original_scale(steps[-1].alpha_hat, steps[-1].beta_hat)
    return ModelFit(alpha=alpha, beta=beta, lam=float(lam),
                    h=settings.loss.h if settings.loss is not None else None,
                    q=settings.grid.q, method=method, penalty=settings.family.value,
                    steps=steps, tune=report)
