import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

import scqr.admm as admm_mod
from scqr.admm import (
    AdmmConfig,
    NormalSolver,
    penalized_check_objective,
    prox_check,
    solve_cqr_admm,
    solve_cqr_admm_irw,
)
from scqr.core import Dataset, Kernel, PenaltySpec, check_loss, quantile_grid
from scqr.lamm import solve_weighted_l1
from scqr.loss import SmoothedLossSpec


def lp_oracle(data, grid, weights):
    """Weighted-L1 CQR as a linear program (HiGHS): returns (alpha, beta, objective)."""
    X, y = data.X, data.y
    n, p = X.shape
    q, tau = grid.q, grid.tau
    nv = q + 2 * p + 2 * n * q
    c = np.concatenate([np.zeros(q), weights, weights,
                        np.repeat(tau, n) / (n * q), np.repeat(1 - tau, n) / (n * q)])
    A = np.zeros((n * q, nv))
    for k in range(q):
        rows = slice(k * n, (k + 1) * n)
        A[rows, k] = 1
        A[rows, q:q + p] = X
        A[rows, q + p:q + 2 * p] = -X
        A[rows, q + 2 * p + k * n:q + 2 * p + (k + 1) * n] = np.eye(n)
        A[rows, q + 2 * p + n * q + k * n:q + 2 * p + n * q + (k + 1) * n] = -np.eye(n)
    b = np.tile(y, q)
    bounds = [(None, None)] * q + [(0, None)] * (2 * p + 2 * n * q)
    r = linprog(c, A_eq=A, b_eq=b, bounds=bounds, method="highs")
    assert r.status == 0
    return r.x[:q], r.x[q:q + p] - r.x[q + p:q + 2 * p], r.fun


def small_problem(rng, n=40, p=8):
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:3] = (2.0, -1.0, 1.5)
    return Dataset(X @ beta + rng.standard_normal(n), X)


def primal_residuals(data, grid, fit):
    st_ = fit.state
    q = grid.q
    alpha, beta = st_.varphi[:q], st_.varphi[q:]
    fitted = alpha[None, :] + (data.X @ beta)[:, None]
    return max(np.max(np.abs(st_.Z + fitted - data.y[:, None])),
               np.max(np.abs(st_.gamma_slack - beta)))


# ---- proximal map

@pytest.mark.parametrize("v,expected", [(2.0, 1.5), (0.2, 0.0), (-2.0, -1.5)])
def test_prox_check_branches(v, expected):
    assert prox_check(0.5, v, 1.0) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-5, 5), st.floats(0.1, 10))
def test_prox_check_minimizes_scalar_objective(tau, v, a):
    z = np.arange(v - 2, v + 2, 1e-4)
    obj = lambda t: check_loss(tau, t) + 0.5 * a * (t - v) ** 2
    assert obj(prox_check(tau, v, a)) <= np.min(obj(z)) + 1e-6


def test_prox_check_vectorized(rng):
    tau = quantile_grid(3).tau[None, :]
    v = rng.standard_normal((5, 3))
    out = prox_check(tau, v, 2.0)
    for i in range(5):
        for k in range(3):
            assert out[i, k] == prox_check(float(tau[0, k]), v[i, k], 2.0)


# ---- normal equations

def test_woodbury_route_matches_direct_factorization(rng, monkeypatch):
    X = rng.standard_normal((30, 50))
    b = rng.standard_normal(5 + 50)
    direct = NormalSolver(X, 5).solve(b)
    monkeypatch.setattr(admm_mod, "DIRECT_FACTOR_LIMIT", 0)
    wood = NormalSolver(X, 5)
    assert wood._direct is None
    np.testing.assert_allclose(wood.solve(b), direct, rtol=1e-9, atol=1e-10)
    # against the explicit stacked system
    q, n = 5, 30
    X1 = np.hstack([np.kron(np.eye(q), np.ones((n, 1))), np.tile(X, (q, 1))])
    X2 = np.hstack([np.zeros((50, q)), np.eye(50)])
    M = X1.T @ X1 + X2.T @ X2
    np.testing.assert_allclose(M @ direct, b, atol=1e-9)


def test_config_validation():
    for bad in ({"sigma": 0.0}, {"max_iter": 0}, {"primal_tol": 0.0}):
        with pytest.raises(ValueError):
            AdmmConfig(**bad)


# ---- solver

def test_huge_weights_give_sample_quantiles(rng):
    data = small_problem(rng, n=41, p=5)
    grid = quantile_grid(5)
    fit = solve_cqr_admm(data, grid, np.full(5, 1e6))
    assert np.all(fit.beta_hat == 0)
    n = data.n
    for a, tau in zip(fit.alpha_hat, grid.tau):
        below = np.mean(data.y < a - 1e-6)
        at_most = np.mean(data.y <= a + 1e-6)
        assert below <= tau + 1 / n and at_most >= tau - 1 / n


def test_matches_linear_program(rng):
    data = small_problem(rng)
    grid = quantile_grid(3)
    w = np.full(data.p, 0.02)
    _, beta_lp, obj_lp = lp_oracle(data, grid, w)
    fit = solve_cqr_admm(data, grid, w)
    assert fit.converged
    obj = penalized_check_objective(data, grid, fit.alpha_hat, fit.beta_hat, w)
    assert obj == pytest.approx(obj_lp, rel=1e-3)
    assert np.max(np.abs(fit.beta_hat - beta_lp)) < 0.05


def test_feasibility_at_convergence(rng):
    data = small_problem(rng)
    grid = quantile_grid(3)
    cfg = AdmmConfig()
    fit = solve_cqr_admm(data, grid, np.full(data.p, 0.02), cfg)
    assert fit.converged
    q = grid.q
    assert np.max(np.abs(fit.state.gamma_slack - fit.state.varphi[q:])) <= cfg.primal_tol
    assert primal_residuals(data, grid, fit) <= cfg.primal_tol


def test_resolve_is_bit_identical(rng):
    data = small_problem(rng)
    grid = quantile_grid(3)
    a = solve_cqr_admm(data, grid, np.full(data.p, 0.02))
    b = solve_cqr_admm(data, grid, np.full(data.p, 0.02))
    np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
    np.testing.assert_array_equal(a.objective_trace, b.objective_trace)


def test_returned_objective_near_best_seen(rng):
    data = small_problem(rng)
    grid = quantile_grid(3)
    fit = solve_cqr_admm(data, grid, np.full(data.p, 0.02), AdmmConfig(max_iter=500))
    assert fit.objective <= np.min(fit.objective_trace) * (1 + 1e-4)


def test_support_has_exact_zeros(rng):
    data = small_problem(rng)
    fit = solve_cqr_admm(data, quantile_grid(3), np.full(data.p, 0.05))
    assert 0 < fit.support.size < data.p
    assert np.all(fit.beta_hat[np.setdiff1d(np.arange(data.p), fit.support)] == 0.0)


def test_primal_residual_trend(rng):
    data = small_problem(rng)
    grid = quantile_grid(3)
    w = np.full(data.p, 0.02)
    res = {}
    for it in (10, 100, 1000):
        fit = solve_cqr_admm(data, grid, w, AdmmConfig(max_iter=it, primal_tol=1e-14, dual_tol=1e-14))
        res[it] = primal_residuals(data, grid, fit)
    assert res[100] <= res[10] and res[1000] <= res[100]


def test_agrees_with_smoothed_solver_at_small_bandwidth():
    rng = np.random.default_rng(7)
    n, p, q = 50, 20, 5
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[[0, 1, 4]] = (3.0, 1.5, 2.0)
    data = Dataset(X @ beta + rng.normal(0, np.sqrt(3), n), X)
    grid = quantile_grid(q)
    spec = SmoothedLossSpec(grid, Kernel.GAUSSIAN, 0.05)
    w = np.full(p, 0.1)
    a = solve_cqr_admm(data, grid, w)
    b = solve_weighted_l1(spec, data, w)
    assert np.max(np.abs(a.beta_hat - b.beta_hat)) <= 0.05


def test_negative_weights_rejected(rng):
    data = small_problem(rng)
    with pytest.raises(ValueError):
        solve_cqr_admm(data, quantile_grid(3), -np.ones(data.p))


def test_reweighted_admm(rng):
    data = small_problem(rng)
    grid = quantile_grid(3)
    l1 = solve_cqr_admm_irw(data, grid, PenaltySpec("l1", 0.05), steps=3)
    assert len(l1) == 3
    np.testing.assert_array_equal(l1[0].beta_hat, l1[-1].beta_hat)
    scad = solve_cqr_admm_irw(data, grid, PenaltySpec("scad", 0.05), steps=2)
    # strong signals lose their shrinkage at the second step
    assert np.all(scad[1].weights[:3] == 0)
    _, _, obj_lp = lp_oracle(data, grid, scad[1].weights)
    obj = penalized_check_objective(data, grid, scad[1].alpha_hat, scad[1].beta_hat, scad[1].weights)
    assert obj == pytest.approx(obj_lp, rel=1e-3)
