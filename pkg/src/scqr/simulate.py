"""Synthetic data from the sparse linear model with AR(1) Gaussian covariates."""

from __future__ import annotations

import enum
import math

import numpy as np


class ErrorLaw(str, enum.Enum):
    NORMAL3 = "normal3"
    MIXTURE_NORMAL = "mixture_normal"
    T3 = "t3"
    CAUCHY = "cauchy"


# Stream tags keep the random draws for different purposes independent.
STREAM_DATA = 0
STREAM_FOLDS = 1
STREAM_PIVOTAL = 2
STREAM_PILOT = 3


def rng_for(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (seed, purpose, replication index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(index)]))


def default_beta_star(p: int) -> np.ndarray:
    """(3, 1.5, 0, 0, 2, 0, ..., 0) truncated or zero-padded to length p."""
    head = np.array([3.0, 1.5, 0.0, 0.0, 2.0])
    beta = np.zeros(p)
    beta[: min(p, 5)] = head[: min(p, 5)]
    return beta


def ar1_design(rng: np.random.Generator, n: int, p: int, rho: float) -> np.ndarray:
    """Rows ~ N_p(0, Sigma) with Sigma_jk = rho^|j-k|, via the AR(1) recursion."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"AR(1) parameter must lie in (-1, 1), got {rho}")
    Z = rng.standard_normal((n, p))
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + s * Z[:, j]
    return X


def draw_errors(rng: np.random.Generator, law: ErrorLaw, n: int) -> np.ndarray:
    law = ErrorLaw(law)
    if law is ErrorLaw.NORMAL3:
        return rng.normal(0.0, math.sqrt(3.0), n)
    if law is ErrorLaw.MIXTURE_NORMAL:
        wide = rng.random(n) < 0.5
        sd = np.where(wide, 1.0, 0.5 ** 3)
        return math.sqrt(6.0) * sd * rng.standard_normal(n)
    if law is ErrorLaw.T3:
        return rng.standard_t(3, n)
    return rng.standard_cauchy(n)


def error_quantile(law: ErrorLaw, tau):
    """Population quantile F^{-1}(tau) of the error law."""
    from scipy import stats
    from scipy.optimize import brentq

    law = ErrorLaw(law)
    tau = np.asarray(tau, dtype=float)
    if law is ErrorLaw.NORMAL3:
        return stats.norm.ppf(tau, scale=math.sqrt(3.0))
    if law is ErrorLaw.T3:
        return stats.t.ppf(tau, 3)
    if law is ErrorLaw.CAUCHY:
        return stats.cauchy.ppf(tau)

    def cdf(x):
        s = math.sqrt(6.0)
        return 0.5 * stats.norm.cdf(x / s) + 0.5 * stats.norm.cdf(x / (s * 0.5 ** 3))

    return np.array([brentq(lambda x, t=t: cdf(x) - t, -20.0, 20.0, xtol=1e-14)
                     for t in np.atleast_1d(tau)]).reshape(tau.shape)


def ar1_quadratic_form(d, rho: float) -> float:
    """d' Sigma d for Sigma_jk = rho^|j-k| without forming Sigma.

    Uses s_j = rho * s_{j-1} + d_j, so that d' Sigma d = sum_j d_j (2 s_j - d_j).
    """
    d = np.asarray(d, dtype=float)
    s = np.empty_like(d)
    acc = 0.0
    for j, dj in enumerate(d):
        acc = rho * acc + dj
        s[j] = acc
    return float(np.sum(d * (2.0 * s - d)))


def model_error(beta_hat, beta_star, rho: float) -> float:
    """Squared model error ||beta_hat - beta_star||_Sigma^2 under AR(1) covariance."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape:
        raise ValueError(f"length mismatch: {beta_hat.shape} vs {beta_star.shape}")
    return max(ar1_quadratic_form(beta_hat - beta_star, rho), 0.0)
