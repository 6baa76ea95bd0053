import sys

import numpy as np
import pytest

from scqr.core import Dataset, Kernel, quantile_grid
from scqr.loss import ParamVector, SmoothedLossSpec
from scqr.simulate import ar1_design, default_beta_star, draw_errors, rng_for


def random_instance(rng, n=30, p=5, q=3, h=0.5, kernel=Kernel.GAUSSIAN, scale=1.0):
    """Small random smoothed-loss problem with a random evaluation point."""
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    spec = SmoothedLossSpec(quantile_grid(q), kernel, h)
    params = ParamVector(scale * rng.standard_normal(q), scale * rng.standard_normal(p))
    return spec, Dataset(y, X), params


def model_instance(seed, n, p, law="normal3", rho=0.5, standardize=True):
    """Draw from the sparse AR(1) linear model; returns (dataset, beta_star)."""
    rng = rng_for(seed, 0, 0)
    beta = default_beta_star(p)
    X = ar1_design(rng, n, p, rho)
    y = X @ beta + draw_errors(rng, law, n)
    return Dataset.from_arrays(X, y, standardize=standardize), beta


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
