import numpy as np
import pytest

from sqrtslr.estimators import GaussianSqrt, StateSpaceModel
from sqrtslr.linalg import TriangularFactor
from sqrtslr.slr import constant_noise


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def lower_factor_of(mat):
    return TriangularFactor(np.linalg.cholesky(mat), "lower")


def linear_state_space(model):
    """Wrap a dense linear model dict (see _oracles) as a StateSpaceModel."""
    q_factor = lower_factor_of(model["q"])
    r_factor = lower_factor_of(model["r"])
    return StateSpaceModel(
        transition_mean=lambda x: model["phi"] @ x + model["b"],
        transition_noise=constant_noise(q_factor),
        observation_mean=lambda x: model["c"] @ x + model["d"],
        observation_noise=constant_noise(r_factor),
        state_dim=model["phi"].shape[0],
        obs_dim=model["c"].shape[0],
    )


def initial_gaussian(model):
    return GaussianSqrt(model["mu0"], lower_factor_of(model["p0"]))
