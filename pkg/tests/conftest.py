import numpy as np
import pytest

from affectloop.mdp import default_mdp_model
from affectloop.simulator import make_population, train_population_model


@pytest.fixture(scope="session")
def shared_population():
    """Six synthetic students reused across engine/service tests."""
    rng = np.random.default_rng(42)
    return make_population(6, rng)


@pytest.fixture(scope="session")
def shared_model(shared_population):
    """A quick single-combo fit good enough for plumbing tests."""
    model, _ = train_population_model(shared_population, seed=42, rows_per_user=60)
    return model


@pytest.fixture(scope="session")
def mdp_model():
    return default_mdp_model()
