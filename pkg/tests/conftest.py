import numpy as np
import pytest

from smnreg import ChainState, Dataset, NIWPrior


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, dim, strength=1.0):
    w = rng.standard_normal((dim, dim + 2))
    return w @ w.T / (dim + 2) + strength * np.eye(dim)


def random_dataset(rng, n, p, d):
    return Dataset(rng.standard_normal((n, p)), rng.standard_normal((n, d)))


def random_prior(rng, p, d):
    return NIWPrior(
        mean=0.5 * rng.standard_normal((p, d)),
        row_cov=random_spd(rng, p),
        dof=d + 2.0 + rng.random(),
        scale=random_spd(rng, d),
    )


def random_state(rng, n, p, d):
    return ChainState(
        beta=rng.standard_normal((p, d)),
        sigma=random_spd(rng, d, strength=0.3),
        u=rng.gamma(2.0, 1.0, size=n) + 0.05,
    )


@pytest.fixture
def small_problem(rng):
    n, p, d = 12, 2, 2
    data = random_dataset(rng, n, p, d)
    prior = random_prior(rng, p, d)
    return data, prior
