"""ADMM baseline for the nonsmooth weighted-L1 penalized CQR problem.

The residual slack ``Z`` (n x q) and the copy ``gamma`` of the slopes split the
check loss and the L1 term away from the linear constraints, so every block
update is closed form. The stacked design ``X1`` (nq x (q+p)) is never
materialized: products with it reduce to column sums and products with ``X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import Dataset, PenaltySpec, QuantileGrid, composite_check_loss, soft_threshold
from .lamm import FitResult, run_lla
from .loss import ParamVector

# Above this many parameters the normal equations go through an n x n system.
DIRECT_FACTOR_LIMIT = 2000


@dataclass(frozen=True)
class AdmmConfig:
    sigma: float = 0.05
    max_iter: int = 20000
    primal_tol: float = 1e-4
    dual_tol: float = 1e-4
    objective_every: int = 10

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not (self.primal_tol > 0 and self.dual_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class AdmmState:
    """Primal and dual iterates; ``varphi`` stacks (alpha, beta)."""

    varphi: np.ndarray
    Z: np.ndarray
    gamma_slack: np.ndarray
    U: np.ndarray
    v: np.ndarray


def prox_check(tau, v, a):
    """Proximal map of rho_tau with parameter a: v - max{(tau-1)/a, min(v, tau/a)}."""
    v = np.asarray(v, dtype=float)
    out = v - np.maximum((tau - 1.0) / a, np.minimum(v, tau / a))
    return out if out.ndim else float(out)


def penalized_check_objective(data: Dataset, grid: QuantileGrid, alpha, beta, weights) -> float:
    """(1/nq) sum rho_{tau_k}(y_i - alpha_k - x_i' beta) + sum_j w_j |beta_j|."""
    r = (data.y - data.X @ beta)[:, None] - np.asarray(alpha)[None, :]
    return float(np.mean(composite_check_loss(r, grid.tau))) + float(np.dot(weights, np.abs(beta)))


class NormalSolver:
    """Solves (X1'X1 + X2'X2) phi = b, factorized once per design."""

    def __init__(self, X: np.ndarray, q: int):
        n, p = X.shape
        self.n, self.p, self.q = n, p, q
        colsum = X.sum(axis=0)
        self.colsum = colsum
        if p + q <= DIRECT_FACTOR_LIMIT:
            M = np.empty((q + p, q + p))
            M[:q, :q] = n * np.eye(q)
            M[:q, q:] = colsum[None, :]
            M[q:, :q] = colsum[:, None]
            M[q:, q:] = q * (X.T @ X) + np.eye(p)
            self._direct = cho_factor(M, lower=True)
        else:
            # Eliminating alpha leaves I + q Xc'Xc with Xc the centered design;
            # Woodbury turns its inverse into an n x n solve.
            self._direct = None
            self._Xc = X - colsum / n
            self._inner = cho_factor(np.eye(n) + q * (self._Xc @ self._Xc.T), lower=True)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._direct is not None:
            return cho_solve(self._direct, b, check_finite=False)
        q, n = self.q, self.n
        b_alpha, b_beta = b[:q], b[q:]
        rhs = b_beta - self.colsum * (b_alpha.sum() / n)
        Xc = self._Xc
        beta = rhs - q * (Xc.T @ cho_solve(self._inner, Xc @ rhs, check_finite=False))
        alpha = (b_alpha - self.colsum @ beta) / n
        return np.concatenate([alpha, beta])


def solve_cqr_admm(data: Dataset, grid: QuantileGrid, weights,
                   cfg: AdmmConfig = AdmmConfig(),
                   init: Optional[ParamVector] = None,
                   normal: Optional[NormalSolver] = None) -> FitResult:
    """Weighted-L1 penalized (unsmoothed) CQR by ADMM.

    ``beta_hat`` is the thresholded copy ``gamma`` so that the support carries
    exact zeros. ``normal`` may be passed to reuse a factorization across calls
    on the same design.
    """
    X, y = data.X, data.y
    n, p = X.shape
    q = grid.q
    tau = grid.tau
    w = np.broadcast_to(np.asarray(weights, dtype=float), (p,)).copy()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("penalty weights must be finite and nonnegative")
    sigma = cfg.sigma
    if normal is None:
        normal = NormalSolver(X, q)

    if init is None:
        alpha, beta = np.zeros(q), np.zeros(p)
    else:
        alpha, beta = np.array(init.alpha, float), np.array(init.beta, float)
    Z = y[:, None] - alpha[None, :] - (X @ beta)[:, None]
    gam = beta.copy()
    U = np.zeros((n, q))
    v = np.zeros(p)

    best = math.inf
    trace = []
    converged = False
    it = 0
    a = n * q * sigma
    for it in range(1, cfg.max_iter + 1):
        # phi-update: normal equations with X1'vec(.) computed blockwise
        Wm = sigma * (y[:, None] - Z) - U
        row = Wm.sum(axis=1)
        b = np.concatenate([Wm.sum(axis=0), X.T @ row + sigma * gam + v])
        phi = normal.solve(b) / sigma
        alpha_new, beta_new = phi[:q], phi[q:]

        fitted = alpha_new[None, :] + (X @ beta_new)[:, None]
        Z_new = prox_check(tau[None, :], y[:, None] - fitted - U / sigma, a)
        gam_new = soft_threshold(beta_new - v / sigma, w / sigma)

        r_z = Z_new + fitted - y[:, None]
        r_g = gam_new - beta_new
        U += sigma * r_z
        v += sigma * r_g

        change = max(np.max(np.abs(alpha_new - alpha)),
                     np.max(np.abs(beta_new - beta)) if p else 0.0,
                     np.max(np.abs(Z_new - Z)),
                     np.max(np.abs(gam_new - gam)) if p else 0.0)
        alpha, beta, Z, gam = alpha_new, beta_new, Z_new, gam_new
        primal = max(np.max(np.abs(r_z)), np.max(np.abs(r_g)) if p else 0.0)
        done = primal <= cfg.primal_tol and change <= cfg.dual_tol
        if it % cfg.objective_every == 0 or done:
            obj = penalized_check_objective(data, grid, alpha, gam, w)
            if not math.isfinite(obj):
                raise FloatingPointError("ADMM objective became non-finite")
            trace.append(obj)
            if obj < best:
                best = obj
                best_point = (alpha.copy(), gam.copy())
        if done:
            converged = True
            break

    final = penalized_check_objective(data, grid, alpha, gam, w)
    alpha_out, beta_out = alpha, gam
    message = "" if converged else f"no convergence within {cfg.max_iter} iterations"
    if best < final - 1e-4 * abs(final):
        alpha_out, beta_out = best_point
        final = best
        message = (message + "; " if message else "") + "returned best iterate seen"
    trace.append(final)
    return FitResult(
        alpha_hat=np.array(alpha_out),
        beta_hat=np.array(beta_out),
        iterations=it,
        converged=converged,
        weights=w,
        objective_trace=np.asarray(trace),
        message=message,
        state=AdmmState(np.concatenate([alpha, beta]), Z, gam, U, v),
    )


def solve_cqr_admm_irw(data: Dataset, grid: QuantileGrid, penalty: PenaltySpec,
                       steps: int = 3, cfg: AdmmConfig = AdmmConfig()) -> List[FitResult]:
    """Reweighted (LLA) CQR with ADMM as the weighted-L1 inner solver."""
    normal = NormalSolver(data.X, grid.q)

    def inner(weights, start):
        return solve_cqr_admm(data, grid, weights, cfg, init=start, normal=normal)

    return run_lla(inner, penalty, data.p, steps)
