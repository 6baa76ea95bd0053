"""Quantile grids, smoothing kernels, check loss, penalties and data containers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, ndtr

# Arguments to the kernel CDF beyond this magnitude are clamped to the asymptotes.
CDF_CLAMP = 40.0


class Kernel(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"
    UNIFORM = "uniform"
    EPANECHNIKOV = "epanechnikov"

    @property
    def positive_everywhere(self) -> bool:
        """True for kernels with unbounded support (required by the theory)."""
        return self in (Kernel.GAUSSIAN, Kernel.LOGISTIC)


class PenaltyFamily(str, enum.Enum):
    L1 = "l1"
    SCAD = "scad"
    MCP = "mcp"


DEFAULT_CONCAVITY = {PenaltyFamily.L1: 0.0, PenaltyFamily.SCAD: 3.7, PenaltyFamily.MCP: 3.0}


@dataclass(frozen=True)
class QuantileGrid:
    levels: tuple
    _tau: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        levels = tuple(float(t) for t in self.levels)
        if len(levels) < 1:
            raise ValueError("a quantile grid needs at least one level")
        if any(not (0.0 < t < 1.0) for t in levels):
            raise ValueError(f"quantile levels must lie in (0, 1), got {levels}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("quantile levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)
        tau = np.array(levels)
        tau.flags.writeable = False
        object.__setattr__(self, "_tau", tau)

    @property
    def q(self) -> int:
        return len(self.levels)

    @property
    def tau(self) -> np.ndarray:
        return self._tau

    @property
    def mean_level(self) -> float:
        return float(np.mean(self.levels))


def quantile_grid(q: int) -> QuantileGrid:
    """Equally spaced levels k/(q+1), k = 1..q."""
    if int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q!r}")
    q = int(q)
    return QuantileGrid(tuple(k / (q + 1) for k in range(1, q + 1)))


@dataclass(frozen=True)
class PenaltySpec:
    family: PenaltyFamily
    lam: float
    a: Optional[float] = None

    def __post_init__(self):
        family = PenaltyFamily(self.family)
        object.__setattr__(self, "family", family)
        if self.a is None:
            object.__setattr__(self, "a", DEFAULT_CONCAVITY[family])
        if not (self.lam >= 0.0) or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite and nonnegative, got {self.lam}")
        if family is PenaltyFamily.SCAD and not self.a > 2.0:
            raise ValueError(f"SCAD requires a > 2, got {self.a}")
        if family is PenaltyFamily.MCP and not self.a >= 1.0:
            raise ValueError(f"MCP requires a >= 1, got {self.a}")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, lam, self.a)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response vector and design matrix, optionally column-standardized.

    When ``standardized`` is set, ``X`` holds the centered and scaled columns and
    ``column_means`` / ``column_scales`` record the transformation so fitted
    coefficients can be mapped back to the original covariate scale.
    """

    y: np.ndarray
    X: np.ndarray
    standardized: bool = False
    column_means: Optional[np.ndarray] = field(default=None, repr=False)
    column_scales: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X must be n x p with n = len(y); got {X.shape} and {y.shape}")
        if y.shape[0] < 1:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if self.standardized:
            if self.column_means is None or self.column_scales is None:
                raise ValueError("standardized dataset requires column means and scales")
            means = np.asarray(self.column_means, dtype=float)
            scales = np.asarray(self.column_scales, dtype=float)
            if means.shape != (X.shape[1],) or scales.shape != (X.shape[1],):
                raise ValueError("standardization metadata must have length p")
            if np.any(scales <= 0):
                raise ValueError("standardization scales must be positive")
            object.__setattr__(self, "column_means", means)
            object.__setattr__(self, "column_scales", scales)
        elif self.column_means is not None or self.column_scales is not None:
            raise ValueError("standardization metadata given for an unstandardized dataset")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, X, y, standardize: bool = False) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if not standardize:
            return cls(y=y, X=X)
        means = X.mean(axis=0)
        scales = X.std(axis=0)
        if np.any(scales <= 0):
            bad = np.flatnonzero(scales <= 0).tolist()
            raise ValueError(f"cannot standardize constant columns {bad}")
        return cls(y=y, X=(X - means) / scales, standardized=True,
                   column_means=means, column_scales=scales)

    def to_original_scale(self, alpha, beta):
        """Map (alpha, beta) fitted on this dataset back to the raw covariates."""
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if not self.standardized:
            return alpha.copy(), beta.copy()
        beta_raw = beta / self.column_scales
        return alpha - self.column_means @ beta_raw, beta_raw

    def subset(self, rows) -> "Dataset":
        """Rows of this dataset, keeping the existing column transformation."""
        return Dataset(y=self.y[rows], X=self.X[rows], standardized=self.standardized,
                       column_means=self.column_means, column_scales=self.column_scales)


def check_loss(tau, u):
    """Quantile check function {tau - 1(u < 0)} * u, vectorized over ``u``."""
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0.0) | (tau >= 1.0)):
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return out if out.ndim else float(out)


def composite_check_loss(residuals: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Elementwise rho_{tau_k}(u_ik) for an n x q residual matrix."""
    return residuals * (tau - (residuals < 0))


# Kernel primitives, all for the unit-bandwidth kernel. The smoothed check loss
# at bandwidth h satisfies l_h(u) = h * l_1(u / h).

def kernel_pdf(kernel: Kernel, t):
    kernel = Kernel(kernel)
    t = np.asarray(t, dtype=float)
    if kernel is Kernel.GAUSSIAN:
        return np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    if kernel is Kernel.LOGISTIC:
        e = np.exp(-np.abs(t))
        return e / (1.0 + e) ** 2
    if kernel is Kernel.UNIFORM:
        return np.where(np.abs(t) <= 1.0, 0.5, 0.0)
    return np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t * t), 0.0)


def kernel_cdf(kernel: Kernel, t):
    """Integrated kernel K_bar(t) = int_{-inf}^t K(v) dv.

    Arguments beyond +-CDF_CLAMP return the asymptotes 0 and 1 exactly.
    """
    kernel = Kernel(kernel)
    raw = np.asarray(t, dtype=float)
    t = np.clip(raw, -CDF_CLAMP, CDF_CLAMP)
    if kernel is Kernel.GAUSSIAN:
        out = ndtr(t)
    elif kernel is Kernel.LOGISTIC:
        out = expit(t)
    elif kernel is Kernel.UNIFORM:
        out = np.clip(0.5 * (1.0 + t), 0.0, 1.0)
    else:
        s = np.clip(t, -1.0, 1.0)
        out = 0.5 + 0.75 * s - 0.25 * s ** 3
    out = np.where(raw >= CDF_CLAMP, 1.0, np.where(raw <= -CDF_CLAMP, 0.0, out))
    return out if out.ndim else float(out)


def unit_smoothed_check(kernel: Kernel, tau, t):
    """(rho_tau * K)(t) at unit bandwidth, in closed form for every kernel."""
    kernel = Kernel(kernel)
    t = np.asarray(t, dtype=float)
    if kernel is Kernel.GAUSSIAN:
        return t * (tau - ndtr(-t)) + np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    if kernel is Kernel.LOGISTIC:
        return tau * t + np.logaddexp(0.0, -t)
    rho = t * (tau - (t < 0))
    inside = np.abs(t) < 1.0
    if kernel is Kernel.UNIFORM:
        smooth = (tau - 0.5) * t + 0.25 * (t * t + 1.0)
    else:
        t2 = t * t
        smooth = t * (tau - 0.5 + 0.75 * t - 0.25 * t * t2) + 0.1875 * (1.0 - t2) ** 2
    return np.where(inside, smooth, rho)


def penalty_weight(spec: PenaltySpec, t):
    """LLA weight lambda * P'(t / lambda) for t >= 0; vectorized over ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("penalty_weight is defined for nonnegative arguments")
    lam = spec.lam
    if spec.family is PenaltyFamily.L1:
        out = np.full_like(t, lam)
    else:
        if lam <= 0:
            raise ValueError("concave reweighting requires lambda > 0")
        u = t / lam
        if spec.family is PenaltyFamily.SCAD:
            a = spec.a
            deriv = np.where(u <= 1.0, 1.0, np.maximum(a - u, 0.0) / (a - 1.0))
        else:
            deriv = np.maximum(1.0 - u / spec.a, 0.0)
        out = lam * deriv
    return out if out.ndim else float(out)


def soft_threshold(v, a):
    """sign(v) * (|v| - a)_+, vectorized; exact zeros inside [-a, a]."""
    v = np.asarray(v, dtype=float)
    out = np.sign(v) * np.maximum(np.abs(v) - a, 0.0)
    return out if out.ndim else float(out)
