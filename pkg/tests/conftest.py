import numpy as np
import pytest

from covising.model import Dataset, ModelDims, ThetaParams


def random_theta(rng, q, p, scale=1.0, density=1.0):
    dims = ModelDims(q, p)
    coef = rng.uniform(-scale, scale, (dims.n_pairs, p + 1))
    coef *= rng.random(coef.shape) < density
    return ThetaParams(dims, coef)


def random_data(rng, n, q, p, prob=0.5):
    """Covariates and responses with every response column non-constant."""
    X = rng.standard_normal((n, p))
    Y = (rng.random((n, q)) < prob).astype(float)
    Y[0], Y[1] = 0.0, 1.0
    return Dataset(X, Y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
