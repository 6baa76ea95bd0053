import numpy as np
import pytest

from scqr.core import Dataset, Kernel, PenaltySpec, penalty_weight, quantile_grid
from scqr.lamm import LammConfig, default_init, kkt_residual, solve_irw, solve_weighted_l1
from scqr.loss import (
    ParamVector,
    SmoothedLossSpec,
    default_bandwidth,
    lambda_max,
    loss_gradient,
    loss_value,
)
from scqr.simulate import model_error
from scqr.tuning import pivotal_lambda

from conftest import model_instance, random_instance

TRUE_SUPPORT = {0, 1, 4}


def penalized(spec, data, params, w):
    return loss_value(spec, data, params) + float(np.dot(w, np.abs(params.beta)))


def model_spec(data, q=19):
    grid = quantile_grid(q)
    return SmoothedLossSpec(grid, Kernel.GAUSSIAN, default_bandwidth(data.n, data.p, grid))


def test_config_validation():
    for bad in ({"gamma": 1.0}, {"tol": 0.0}, {"phi0": -1.0}, {"max_iter": 0}, {"irw_steps": 0}):
        with pytest.raises(ValueError):
            LammConfig(**bad)
    cfg = LammConfig()
    assert (cfg.phi0, cfg.gamma, cfg.tol, cfg.max_iter, cfg.irw_steps) == (0.01, 1.25, 1e-5, 5000, 3)


def test_full_shrinkage_at_critical_level(rng):
    for _ in range(5):
        spec, data, _ = random_instance(rng, n=40, p=8, q=5)
        lam = lambda_max(spec, data) * (1 + 1e-6)
        fit = solve_weighted_l1(spec, data, np.full(data.p, lam), default_init(spec, data))
        assert fit.converged
        assert np.all(fit.beta_hat == 0)
        assert fit.support.size == 0


def test_negative_weights_rejected(rng):
    spec, data, _ = random_instance(rng)
    with pytest.raises(ValueError):
        solve_weighted_l1(spec, data, -np.ones(data.p))


def test_init_dimension_checked(rng):
    spec, data, _ = random_instance(rng, q=3, p=5)
    with pytest.raises(ValueError):
        solve_weighted_l1(spec, data, np.ones(5), ParamVector(np.zeros(2), np.zeros(5)))


def test_non_convergence_is_flagged_not_raised(rng):
    spec, data, _ = random_instance(rng, n=40, p=8)
    fit = solve_weighted_l1(spec, data, np.full(8, 0.01), cfg=LammConfig(max_iter=3))
    assert not fit.converged
    assert fit.iterations == 3
    assert "no convergence" in fit.message


@pytest.mark.parametrize("kernel", list(Kernel))
def test_descent_majorization_and_kkt(rng, kernel):
    for _ in range(6):
        spec, data, _ = random_instance(rng, n=int(rng.integers(10, 60)), p=int(rng.integers(1, 25)),
                                        q=int(rng.choice([1, 3, 9])), h=rng.uniform(0.1, 1),
                                        kernel=kernel)
        w = rng.uniform(0, 0.2, data.p)
        fit = solve_weighted_l1(spec, data, w, default_init(spec, data))
        trace = fit.objective_trace
        assert np.all(np.diff(trace) <= 1e-12)
        assert fit.min_majorization_gap >= -1e-13 * (1 + trace[0])
        assert fit.converged
        assert fit.kkt_residual <= 10 * LammConfig().tol
        ga, gb = loss_gradient(spec, data, fit.params)
        assert kkt_residual(ga, gb, fit.beta_hat, w) == pytest.approx(fit.kkt_residual)
        assert fit.objective == pytest.approx(penalized(spec, data, fit.params, w), rel=1e-12)


def test_zero_weights_give_unpenalized_stationary_point(rng):
    spec, data, _ = random_instance(rng, n=60, p=3, q=3)
    fit = solve_weighted_l1(spec, data, np.zeros(3), default_init(spec, data),
                            LammConfig(tol=1e-6, max_iter=50000))
    ga, gb = loss_gradient(spec, data, fit.params)
    assert max(np.max(np.abs(ga)), np.max(np.abs(gb))) < 1e-5


def test_returned_point_beats_random_perturbations(rng):
    spec, data, _ = random_instance(rng, n=50, p=10, q=5, h=0.3)
    w = np.full(10, 0.05)
    fit = solve_weighted_l1(spec, data, w, default_init(spec, data), LammConfig(tol=1e-6))
    assert fit.converged
    base = penalized(spec, data, fit.params, w)
    theta = fit.params.stacked()
    q = spec.grid.q
    for _ in range(1000):
        d = rng.standard_normal(theta.size)
        t = theta + 1e-3 * d / np.linalg.norm(d)
        assert penalized(spec, data, ParamVector(t[:q], t[q:]), w) >= base - 1e-12


def test_solves_are_deterministic(rng):
    spec, data, _ = random_instance(rng, n=40, p=12)
    w = np.full(12, 0.02)
    a = solve_weighted_l1(spec, data, w)
    b = solve_weighted_l1(spec, data, w)
    np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
    np.testing.assert_array_equal(a.objective_trace, b.objective_trace)


@pytest.mark.parametrize("c", [2.0, 3.0, 0.7])
def test_scaling_covariance(rng, c):
    # scaling y, the bandwidth and the stopping tolerance by c, and the initial
    # curvature by 1/c, maps every LAMM iterate to c times itself
    spec, data, _ = random_instance(rng, n=40, p=6, q=3, h=0.4)
    w = np.full(6, 0.03)
    base = solve_weighted_l1(spec, data, w)
    spec_c = SmoothedLossSpec(spec.grid, spec.kernel, c * spec.h)
    scaled = solve_weighted_l1(spec_c, Dataset(c * data.y, data.X), w,
                               cfg=LammConfig(phi0=0.01 / c, tol=c * 1e-5))
    assert base.converged and scaled.converged
    np.testing.assert_allclose(scaled.alpha_hat, c * base.alpha_hat, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(scaled.beta_hat, c * base.beta_hat, rtol=1e-8, atol=1e-10)


# ---- reweighting driver

def test_l1_steps_identical(rng):
    spec, data, _ = random_instance(rng, n=50, p=10, q=5)
    res = solve_irw(spec, data, PenaltySpec("l1", 0.05), LammConfig(irw_steps=4))
    assert len(res) == 4
    np.testing.assert_array_equal(res[0].beta_hat, res[-1].beta_hat)


def test_huge_lambda_zeroes_every_step(rng):
    spec, data, _ = random_instance(rng, n=50, p=10, q=5)
    lam = 1e6 * lambda_max(spec, data)
    for fam in ("l1", "scad", "mcp"):
        res = solve_irw(spec, data, PenaltySpec(fam, lam))
        assert all(np.all(r.beta_hat == 0) for r in res)


def test_reweighting_requires_positive_lambda(rng):
    spec, data, _ = random_instance(rng)
    with pytest.raises(ValueError):
        solve_irw(spec, data, PenaltySpec("scad", 0.0))


def test_warm_start_equivalence(rng):
    spec, data, _ = random_instance(rng, n=60, p=15, q=5)
    pen = PenaltySpec("scad", 0.05)
    cfg = LammConfig(irw_steps=2)
    res = solve_irw(spec, data, pen, cfg)
    first = solve_weighted_l1(spec, data, np.full(15, 0.05), default_init(spec, data), cfg)
    second = solve_weighted_l1(spec, data, penalty_weight(pen, np.abs(first.beta_hat)),
                               first.params, cfg)
    np.testing.assert_array_equal(res[0].beta_hat, first.beta_hat)
    np.testing.assert_array_equal(res[1].beta_hat, second.beta_hat)
    np.testing.assert_array_equal(res[1].alpha_hat, second.alpha_hat)


def test_second_step_weights_follow_penalty_derivative(rng):
    spec, data, _ = random_instance(rng, n=60, p=15, q=5)
    pen = PenaltySpec("mcp", 0.05)
    res = solve_irw(spec, data, pen, LammConfig(irw_steps=2))
    np.testing.assert_array_equal(res[0].weights, np.full(15, 0.05))
    np.testing.assert_array_equal(res[1].weights, penalty_weight(pen, np.abs(res[0].beta_hat)))


def test_pivotal_lasso_recovers_true_support():
    hits = 0
    for seed in range(20):
        data, _ = model_instance(seed, 200, 30)
        spec = model_spec(data)
        lam = pivotal_lambda(data.X, spec.grid, c=1.9, seed=seed)
        fit = solve_irw(spec, data, PenaltySpec("l1", lam))[-1]
        hits += TRUE_SUPPORT <= set(fit.support.tolist())
    assert hits >= 19


def test_scad_second_step_reduces_model_error():
    better = 0
    for seed in range(20):
        data, beta_star = model_instance(seed, 200, 30)
        spec = model_spec(data)
        lam = pivotal_lambda(data.X, spec.grid, c=3.1, seed=seed)
        res = solve_irw(spec, data, PenaltySpec("scad", lam))
        me = [model_error(data.to_original_scale(r.alpha_hat, r.beta_hat)[1], beta_star, 0.5)
              for r in res[:2]]
        better += me[1] <= me[0]
    assert better >= 18
