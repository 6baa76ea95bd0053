"""Convolution-smoothed composite quantile loss, its gradient and curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .core import Dataset, Kernel, QuantileGrid, kernel_cdf, kernel_pdf, unit_smoothed_check

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SmoothedLossSpec:
    grid: QuantileGrid
    kernel: Kernel = Kernel.GAUSSIAN
    h: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        if not (self.h > 0) or not math.isfinite(self.h):
            raise ValueError(f"bandwidth must be positive, got {self.h}")


class ParamVector(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def zeros(cls, q: int, p: int) -> "ParamVector":
        return cls(np.zeros(q), np.zeros(p))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])


def _check_dims(spec: SmoothedLossSpec, data: Dataset, params: ParamVector):
    if np.shape(params.alpha) != (spec.grid.q,):
        raise ValueError(f"alpha must have length q={spec.grid.q}, got {np.shape(params.alpha)}")
    if np.shape(params.beta) != (data.p,):
        raise ValueError(f"beta must have length p={data.p}, got {np.shape(params.beta)}")


def smoothed_check(spec: SmoothedLossSpec, k: int, u):
    """(rho_{tau_k} * K_h)(u) for the 1-based level index ``k``."""
    if not 1 <= k <= spec.grid.q:
        raise ValueError(f"level index must be in 1..{spec.grid.q}, got {k}")
    tau = spec.grid.levels[k - 1]
    out = spec.h * unit_smoothed_check(spec.kernel, tau, np.asarray(u, dtype=float) / spec.h)
    return out if np.ndim(out) else float(out)


def residual_matrix(data: Dataset, params: ParamVector) -> np.ndarray:
    """n x q matrix of y_i - alpha_k - x_i' beta."""
    r = data.y - data.X @ params.beta
    return r[:, None] - params.alpha[None, :]


def _loss_from_residuals(spec: SmoothedLossSpec, U: np.ndarray) -> float:
    vals = unit_smoothed_check(spec.kernel, spec.grid.tau[None, :], U / spec.h)
    return spec.h * float(np.mean(vals))


def loss_and_weights(spec: SmoothedLossSpec, U: np.ndarray):
    """Loss value and gradient weights K_bar(-u/h) - tau from one residual matrix."""
    h = spec.h
    tau = spec.grid.tau
    if spec.kernel is Kernel.GAUSSIAN:
        t = U * (1.0 / h)
        lower = ndtr(-t)
        W = lower - tau
        dens = t * t
        dens *= -0.5
        np.exp(dens, out=dens)
        # t (tau - Phi(-t)) + phi(t), summed
        total = _INV_SQRT_2PI * dens.sum() - float(np.vdot(t, W))
        return h * total / U.size, W
    t = U / h
    value = spec.h * float(np.mean(unit_smoothed_check(spec.kernel, tau, t)))
    return value, kernel_cdf(spec.kernel, -t) - tau


def gradient_from_weights(spec: SmoothedLossSpec, data: Dataset, W: np.ndarray):
    # W[i, k] = K_bar((alpha_k - r_i) / h) - tau_k
    nq = W.size
    grad_alpha = W.sum(axis=0) / nq
    grad_beta = data.X.T @ W.sum(axis=1) / nq
    return grad_alpha, grad_beta


def loss_value(spec: SmoothedLossSpec, data: Dataset, params: ParamVector) -> float:
    """Average smoothed check loss over all observations and quantile levels."""
    _check_dims(spec, data, params)
    return _loss_from_residuals(spec, residual_matrix(data, params))


def loss_gradient(spec: SmoothedLossSpec, data: Dataset, params: ParamVector):
    """Return ``(grad_alpha, grad_beta)`` of the smoothed composite loss."""
    _check_dims(spec, data, params)
    U = residual_matrix(data, params)
    W = kernel_cdf(spec.kernel, -U / spec.h) - spec.grid.tau[None, :]
    return gradient_from_weights(spec, data, W)


def hessian_quadratic_form(spec: SmoothedLossSpec, data: Dataset, params: ParamVector,
                           direction) -> float:
    """d' H d where H is the Hessian of the smoothed loss at ``params``.

    ``direction`` is a length q + p vector ordered as (alpha part, beta part).
    """
    _check_dims(spec, data, params)
    d = np.asarray(direction, dtype=float)
    q = spec.grid.q
    if d.shape != (q + data.p,):
        raise ValueError(f"direction must have length q + p = {q + data.p}")
    U = residual_matrix(data, params)
    dens = kernel_pdf(spec.kernel, U / spec.h) / spec.h
    lin = d[None, :q] + (data.X @ d[q:])[:, None]
    return float(np.mean(dens * lin * lin))


def default_bandwidth(n: int, p: int, grid: QuantileGrid) -> float:
    """max{0.01, sqrt(tbar (1 - tbar)) (log p / n)^(1/4)}, tbar the mean level."""
    if n < 2 or p < 1:
        raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    tbar = grid.mean_level
    return max(0.01, math.sqrt(tbar * (1.0 - tbar)) * (math.log(p) / n) ** 0.25)


def marginal_smoothed_quantiles(spec: SmoothedLossSpec, y) -> np.ndarray:
    """Intercepts minimizing the smoothed loss with beta = 0, one root per level."""
    y = np.asarray(y, dtype=float)
    h = spec.h
    lo = float(y.min()) - 45.0 * h
    hi = float(y.max()) + 45.0 * h
    out = np.empty(spec.grid.q)
    for k, tau in enumerate(spec.grid.levels):
        def score(a, tau=tau):
            return float(np.mean(kernel_cdf(spec.kernel, (a - y) / h))) - tau
        out[k] = brentq(score, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return out


def lambda_max(spec: SmoothedLossSpec, data: Dataset) -> float:
    """Smallest uniform L1 weight at which beta = 0 is optimal."""
    alpha0 = marginal_smoothed_quantiles(spec, data.y)
    _, g_beta = loss_gradient(spec, data, ParamVector(alpha0, np.zeros(data.p)))
    return float(np.max(np.abs(g_beta)))
