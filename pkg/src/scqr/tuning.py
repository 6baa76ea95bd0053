"""Penalty-level selection: lambda paths, K-fold CV, high-dimensional BIC and
the simulation-based pivotal rule."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .admm import AdmmConfig, NormalSolver, solve_cqr_admm
from .core import Dataset, PenaltyFamily, PenaltySpec, QuantileGrid, composite_check_loss
from .lamm import FitResult, LammConfig, default_init, run_lla, solve_weighted_l1
from .loss import SmoothedLossSpec, lambda_max
from .simulate import STREAM_FOLDS, STREAM_PIVOTAL, rng_for

METHOD_SCQR = "scqr"
METHOD_ADMM = "cqr-admm"
BIC_FLOOR = -1e30
CV_TIE_TOL = 1e-10

DEFAULT_PIVOTAL_C = {PenaltyFamily.L1: 1.9, PenaltyFamily.SCAD: 3.1, PenaltyFamily.MCP: 3.1}


class DegenerateBICWarning(RuntimeWarning):
    """Raised as a warning when the residual check loss is exactly zero."""


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("lambda grid is empty")
        if any(v <= 0 or not math.isfinite(v) for v in vals):
            raise ValueError("lambda values must be positive and finite")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise ValueError("lambda grid must be strictly decreasing")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def geometric(cls, lam_max: float, num: int = 50, ratio: float = 0.01) -> "LambdaGrid":
        return cls(tuple(np.geomspace(lam_max, lam_max * ratio, num)))


@dataclass
class TuneRecord:
    lam: float
    criterion: float
    support_size: int
    iterations: int
    converged: bool
    degenerate: bool = False


@dataclass
class TuneReport:
    method: str
    records: List[TuneRecord]
    chosen_lambda: float
    chosen_fit: Optional[FitResult] = None
    extras: dict = field(default_factory=dict)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    @property
    def criteria(self) -> np.ndarray:
        return np.array([r.criterion for r in self.records])


@dataclass(frozen=True)
class FitSettings:
    """Everything needed to fit one penalized model besides data and lambda."""

    grid: QuantileGrid
    family: PenaltyFamily = PenaltyFamily.L1
    a: Optional[float] = None
    method: str = METHOD_SCQR
    loss: Optional[SmoothedLossSpec] = None
    lamm: LammConfig = LammConfig()
    admm: AdmmConfig = AdmmConfig()

    def __post_init__(self):
        object.__setattr__(self, "family", PenaltyFamily(self.family))
        if self.method not in (METHOD_SCQR, METHOD_ADMM):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == METHOD_SCQR and self.loss is None:
            raise ValueError("smoothed fitting needs a SmoothedLossSpec")

    def penalty(self, lam: float) -> PenaltySpec:
        return PenaltySpec(self.family, lam, self.a)


def fit_path(data: Dataset, settings: FitSettings, lambdas: Sequence[float]) -> List[List[FitResult]]:
    """Reweighted fits along a decreasing lambda sequence with warm starts.

    Returns, for every lambda, the list of LLA step results; the first step at
    each lambda starts from the first-step solution at the previous lambda.
    """
    steps = settings.lamm.irw_steps
    if settings.method == METHOD_SCQR:
        spec = settings.loss
        start = default_init(spec, data)

        def inner(weights, init):
            return solve_weighted_l1(spec, data, weights, init, settings.lamm)
    else:
        normal = NormalSolver(data.X, settings.grid.q)
        start = None

        def inner(weights, init):
            return solve_cqr_admm(data, settings.grid, weights, settings.admm,
                                  init=init, normal=normal)

    out = []
    for lam in lambdas:
        results = run_lla(inner, settings.penalty(lam), data.p, steps, start)
        start = results[0].params
        out.append(results)
    return out


def default_lambda_grid(data: Dataset, settings: FitSettings, num: int = 50,
                        ratio: float = 0.01) -> LambdaGrid:
    spec = settings.loss
    if spec is None:
        # the unsmoothed fit still needs an anchor; use a small bandwidth
        spec = SmoothedLossSpec(settings.grid, h=0.01)
    return LambdaGrid.geometric(lambda_max(spec, data), num, ratio)


def bic(data: Dataset, grid: QuantileGrid, fit: FitResult, p: int, Cn: float) -> float:
    """log((1/q) sum_ik rho(y_i - alpha_k - x_i'beta)) + |S| Cn log(p) / n.

    A zero residual loss gives ``BIC_FLOOR`` and a ``DegenerateBICWarning``.
    """
    if fit.alpha_hat.shape != (grid.q,) or fit.beta_hat.shape != (data.p,):
        raise ValueError("fit dimensions do not match the data and grid")
    if not Cn > 0:
        raise ValueError("Cn must be positive")
    r = (data.y - data.X @ fit.beta_hat)[:, None] - fit.alpha_hat[None, :]
    total = float(np.sum(composite_check_loss(r, grid.tau))) / grid.q
    penalty = len(fit.support) * Cn * math.log(p) / data.n
    if total <= 0.0:
        warnings.warn("residual check loss is zero; BIC is unbounded below",
                      DegenerateBICWarning, stacklevel=2)
        return BIC_FLOOR
    return math.log(total) + penalty


def held_out_loss(data: Dataset, grid: QuantileGrid, fit: FitResult) -> float:
    """Mean unsmoothed composite check loss of ``fit`` on ``data``."""
    r = (data.y - data.X @ fit.beta_hat)[:, None] - fit.alpha_hat[None, :]
    return float(np.mean(composite_check_loss(r, grid.tau)))


def select_bic(data: Dataset, settings: FitSettings, lambdas: Optional[LambdaGrid] = None,
               Cn: Optional[float] = None) -> TuneReport:
    if lambdas is None:
        lambdas = default_lambda_grid(data, settings)
    if Cn is None:
        Cn = math.log(math.log(data.n))
    path = fit_path(data, settings, lambdas)
    records = []
    for lam, results in zip(lambdas, path):
        fit = results[-1]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateBICWarning)
            value = bic(data, settings.grid, fit, data.p, Cn)
        records.append(TuneRecord(lam, value, len(fit.support), fit.iterations,
                                  all(r.converged for r in results), bool(caught)))
    best = int(np.argmin([r.criterion for r in records]))
    return TuneReport("bic", records, records[best].lam, path[best][-1], {"Cn": Cn})


def fold_labels(n: int, K: int, seed: int, index: int = 0) -> np.ndarray:
    """Seeded random assignment of n observations to K near-equal folds."""
    if K < 2 or n < K:
        raise ValueError(f"need 2 <= K <= n, got K={K}, n={n}")
    perm = rng_for(seed, STREAM_FOLDS, index).permutation(n)
    labels = np.empty(n, dtype=int)
    for k, block in enumerate(np.array_split(perm, K)):
        labels[block] = k
    return labels


def cross_validate(data: Dataset, settings: FitSettings, lambdas: Optional[LambdaGrid] = None,
                   K: int = 5, seed: int = 0, folds: Optional[np.ndarray] = None,
                   refit: bool = True) -> TuneReport:
    """K-fold CV on the pooled held-out composite check loss.

    ``folds`` may supply explicit fold labels (0..K-1); otherwise they are drawn
    from ``seed``. Ties in the criterion go to the larger lambda.
    """
    if lambdas is None:
        lambdas = default_lambda_grid(data, settings)
    if folds is None:
        folds = fold_labels(data.n, K, seed)
    folds = np.asarray(folds)
    if folds.shape != (data.n,):
        raise ValueError("fold labels must have length n")
    labels = np.unique(folds)
    if len(labels) < 2:
        raise ValueError("cross-validation needs at least two folds")
    total = np.zeros(len(lambdas))
    for k in labels:
        test = folds == k
        if np.count_nonzero(~test) < 2:
            raise ValueError(f"fold {k} leaves fewer than 2 training observations")
        train_data, test_data = data.subset(~test), data.subset(test)
        path = fit_path(train_data, settings, lambdas)
        for j, results in enumerate(path):
            total[j] += held_out_loss(test_data, settings.grid, results[-1]) * test_data.n
    crit = total / data.n
    # criteria equal up to rounding count as ties; the first (largest) lambda wins
    best = int(np.flatnonzero(crit <= crit.min() + CV_TIE_TOL * max(1.0, abs(crit.min())))[0])
    chosen = lambdas.values[best]
    records = [TuneRecord(lam, float(c), -1, 0, True) for lam, c in zip(lambdas, crit)]
    chosen_fit = None
    if refit:
        full = fit_path(data, settings, lambdas.values[: best + 1])
        for rec, results in zip(records, full):
            rec.support_size = len(results[-1].support)
            rec.iterations = results[-1].iterations
            rec.converged = all(r.converged for r in results)
        chosen_fit = full[best][-1]
    return TuneReport("cv", records, chosen, chosen_fit, {"K": int(len(labels)), "seed": seed})


def pivotal_statistics(X, grid: QuantileGrid, B: int, seed: int) -> np.ndarray:
    """B draws of ||(1/nq) sum_ik {1(u_ik <= tau_k) - tau_k} x_i||_inf given X."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    if B < 1:
        raise ValueError("B must be at least 1")
    n = X.shape[0]
    q = grid.q
    tau = grid.tau
    stats = np.empty(B)
    for b in range(B):
        u = rng_for(seed, STREAM_PIVOTAL, b).random((n, q))
        score = ((u <= tau) - tau).sum(axis=1)
        stats[b] = np.max(np.abs(X.T @ score)) / (n * q)
    return stats


def pivotal_lambda(X, grid: QuantileGrid, c: float = 1.9, alpha: float = 0.05,
                   B: int = 200, seed: int = 0) -> float:
    """c times the empirical (1 - alpha) quantile of the pivotal score norm.

    The quantile is the order statistic of rank ceil((1 - alpha) B). The
    response never enters, so the result depends on X and the seed only.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    stats = np.sort(pivotal_statistics(X, grid, B, seed))
    rank = max(1, math.ceil((1.0 - alpha) * B - 1e-9))
    return float(c * stats[rank - 1])


def select_pivotal(data: Dataset, settings: FitSettings, c: Optional[float] = None,
                   alpha: float = 0.05, B: int = 200, seed: int = 0,
                   fit: bool = True) -> TuneReport:
    if c is None:
        c = DEFAULT_PIVOTAL_C[settings.family]
    lam = pivotal_lambda(data.X, settings.grid, c, alpha, B, seed)
    chosen_fit = None
    records = []
    if fit:
        results = fit_path(data, settings, [lam])[0]
        chosen_fit = results[-1]
        records.append(TuneRecord(lam, float("nan"), len(chosen_fit.support),
                                  chosen_fit.iterations, all(r.converged for r in results)))
    return TuneReport("pivotal", records, lam, chosen_fit,
                      {"c": c, "alpha": alpha, "B": B, "seed": seed})
