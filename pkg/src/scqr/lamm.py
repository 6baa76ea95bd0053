"""Local adaptive majorize-minimization for weighted-L1 smoothed CQR.

Each iteration takes a proximal gradient step under an isotropic quadratic
majorant whose curvature ``phi`` is inflated by ``gamma`` until the majorant
dominates the smoothed loss at the new point. The reweighted driver wraps it
in the local linear approximation loop for SCAD and MCP penalties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import Dataset, PenaltySpec, penalty_weight, soft_threshold
from .loss import (
    ParamVector,
    SmoothedLossSpec,
    gradient_from_weights,
    loss_and_weights,
    marginal_smoothed_quantiles,
)


@dataclass(frozen=True)
class LammConfig:
    """Step-size search and stopping parameters.

    The majorization test compares loss values, which pins the iterates down only
    to roughly the square root of machine precision; ``tol`` much below 1e-6
    will typically run to ``max_iter``.
    """

    phi0: float = 0.01
    gamma: float = 1.25
    tol: float = 1e-5
    max_iter: int = 5000
    irw_steps: int = 3
    max_inflations: int = 60

    def __post_init__(self):
        if not self.phi0 > 0:
            raise ValueError("phi0 must be positive")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.irw_steps < 1 or self.max_inflations < 1:
            raise ValueError("max_iter, irw_steps and max_inflations must be positive")


@dataclass
class FitResult:
    """Outcome of one weighted-L1 solve (LAMM or ADMM)."""

    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    iterations: int
    converged: bool
    weights: np.ndarray
    kkt_residual: float = float("nan")
    final_phi: float = float("nan")
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    min_majorization_gap: float = float("inf")
    message: str = ""
    state: Optional[object] = field(default=None, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta_hat != 0)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1]) if len(self.objective_trace) else float("nan")

    @property
    def params(self) -> ParamVector:
        return ParamVector(self.alpha_hat, self.beta_hat)


def kkt_residual(grad_alpha, grad_beta, beta, weights) -> float:
    """Sup-norm violation of the first-order conditions of the weighted-L1 problem."""
    nz = beta != 0
    viol = np.where(nz, np.abs(grad_beta + weights * np.sign(beta)),
                    np.maximum(np.abs(grad_beta) - weights, 0.0))
    beta_part = float(viol.max()) if viol.size else 0.0
    return beta_part + float(np.max(np.abs(grad_alpha)))


def default_init(spec: SmoothedLossSpec, data: Dataset) -> ParamVector:
    """beta = 0 with intercepts at the marginal smoothed quantiles of y."""
    return ParamVector(marginal_smoothed_quantiles(spec, data.y), np.zeros(data.p))


def solve_weighted_l1(spec: SmoothedLossSpec, data: Dataset, weights,
                      init: Optional[ParamVector] = None,
                      cfg: LammConfig = LammConfig()) -> FitResult:
    """Minimize Q_h(alpha, beta) + sum_j weights_j |beta_j| by LAMM.

    Parameters
    ----------
    spec : smoothed loss definition (grid, kernel, bandwidth).
    data : observations; the columns of ``data.X`` are used as given.
    weights : length-p nonnegative penalty weights; intercepts are unpenalized.
    init : starting point; defaults to zeros as in the textbook algorithm.
    cfg : step-size search and stopping parameters.

    Returns
    -------
    FitResult with the final iterate, the penalized objective after every
    accepted step, and the KKT residual at the returned point. Hitting
    ``max_iter`` or the inflation cap yields ``converged=False`` rather than
    an exception.
    """
    X, y = data.X, data.y
    q, p = spec.grid.q, data.p
    w = np.broadcast_to(np.asarray(weights, dtype=float), (p,)).copy()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("penalty weights must be finite and nonnegative")
    if init is None:
        init = ParamVector.zeros(q, p)
    alpha = np.array(init.alpha, dtype=float)
    beta = np.array(init.beta, dtype=float)
    if alpha.shape != (q,) or beta.shape != (p,):
        raise ValueError("init dimensions do not match (q, p)")

    xb = X @ beta
    U = (y - xb)[:, None] - alpha[None, :]
    loss, W = loss_and_weights(spec, U)
    g_alpha, g_beta = gradient_from_weights(spec, data, W)
    objective = loss + float(w @ np.abs(beta))
    if not math.isfinite(objective):
        raise FloatingPointError("objective is not finite at the initial point")
    trace = [objective]

    phi = cfg.phi0
    min_gap = math.inf
    converged = False
    message = ""
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        phi = max(cfg.phi0, phi / cfg.gamma)
        for _ in range(cfg.max_inflations + 1):
            alpha_new = alpha - g_alpha / phi
            beta_new = soft_threshold(beta - g_beta / phi, w / phi)
            d_alpha = alpha_new - alpha
            d_beta = beta_new - beta
            xb_new = X @ beta_new
            U = (y - xb_new)[:, None] - alpha_new[None, :]
            loss_new, W_new = loss_and_weights(spec, U)
            if not math.isfinite(loss_new):
                raise FloatingPointError("smoothed loss became non-finite")
            majorant = (loss + g_alpha @ d_alpha + g_beta @ d_beta
                        + 0.5 * phi * (d_alpha @ d_alpha + d_beta @ d_beta))
            # rounding slack so a vanishing step is not mistaken for a failed majorization
            gap = majorant - loss_new
            if gap >= -1e-13 * abs(loss):
                break
            phi *= cfg.gamma
        else:
            message = f"step-size search exceeded {cfg.max_inflations} inflations"
            break
        min_gap = min(min_gap, gap)
        alpha, beta, xb, loss, W = alpha_new, beta_new, xb_new, loss_new, W_new
        g_alpha, g_beta = gradient_from_weights(spec, data, W)
        trace.append(loss + float(w @ np.abs(beta)))
        change = max(np.max(np.abs(d_alpha)), np.max(np.abs(d_beta)) if p else 0.0)
        if change <= cfg.tol:
            converged = True
            break
    else:
        message = f"no convergence within {cfg.max_iter} iterations"

    return FitResult(
        alpha_hat=alpha,
        beta_hat=beta,
        iterations=iterations,
        converged=converged,
        weights=w,
        kkt_residual=kkt_residual(g_alpha, g_beta, beta, w),
        final_phi=phi,
        objective_trace=np.asarray(trace),
        min_majorization_gap=min_gap,
        message=message,
    )


def run_lla(inner: Callable[[np.ndarray, Optional[ParamVector]], FitResult],
            penalty: PenaltySpec, p: int, steps: int,
            init: Optional[ParamVector] = None) -> List[FitResult]:
    """Local linear approximation loop around a weighted-L1 solver ``inner``.

    The first step uses the uniform weight lambda (the reweighting derivative at
    beta = 0); later steps use ``penalty_weight`` at the previous slopes and warm
    start from the previous solution. A step whose weights coincide with the
    previous step's weights reuses that solution, so an L1 penalty returns the
    same fit at every step.
    """
    if not penalty.lam > 0:
        raise ValueError("reweighted fitting requires lambda > 0")
    weights = np.full(p, penalty.lam)
    results: List[FitResult] = []
    for step in range(steps):
        if step > 0:
            new_weights = penalty_weight(penalty, np.abs(results[-1].beta_hat))
            if np.array_equal(new_weights, weights):
                results.append(results[-1])
                continue
            weights = new_weights
            init = results[-1].params
        results.append(inner(weights, init))
    return results


def solve_irw(spec: SmoothedLossSpec, data: Dataset, penalty: PenaltySpec,
              cfg: LammConfig = LammConfig(),
              init: Optional[ParamVector] = None) -> List[FitResult]:
    """Reweighted smoothed CQR fits, one per LLA step (``cfg.irw_steps`` of them)."""
    if init is None:
        init = default_init(spec, data)

    def inner(weights, start):
        return solve_weighted_l1(spec, data, weights, start, cfg)

    return run_lla(inner, penalty, data.p, cfg.irw_steps, init)
