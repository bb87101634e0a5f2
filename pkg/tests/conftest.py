from __future__ import annotations

import pytest

from reasonctl.backends import SimBackend, SimWorld, SimWorldConfig


@pytest.fixture
def sim_world() -> SimWorld:
    return SimWorld(SimWorldConfig(seed=11, step_error_prob=0.3))


@pytest.fixture
def sim_backend(sim_world) -> SimBackend:
    return SimBackend(sim_world)


@pytest.fixture
def noiseless_backend() -> SimBackend:
    world = SimWorld(SimWorldConfig(seed=5, step_error_prob=0.0, oracle_noise=0.0))
    return SimBackend(world)
