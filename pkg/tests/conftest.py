import numpy as np
import pytest

from reduxion.state import PureState, gauge_mode, matter_mode


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mt_system():
    """One photon mode and a two-level matter partner."""
    return (gauge_mode("M"), matter_mode("T", 2))


def random_state(rng, modes) -> PureState:
    dim = int(np.prod([m.dimension for m in modes]))
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.from_dense(modes, v / np.linalg.norm(v))
