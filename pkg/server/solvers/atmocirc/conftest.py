"""
Shared fixtures for the atmocirc tests
"""

import numpy as np
import pytest

from server.solvers.atmocirc.fields import State
from server.solvers.atmocirc.grid import Grid
from server.solvers.atmocirc.params import DimensionlessParams
from server.solvers.atmocirc.pressure import project
from server.solvers.atmocirc.stepper import Forcing, Integrator, StepConfig

HEAT_PARAMS = DimensionlessParams(Pr=1.0, Le=1.0, R=0.0, R_tilde=0.0, sigma0p=0.0, sigma1p=0.0, omega=0.0)


def random_state(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0) -> State:
    """Smooth random state with a box-divergence-free velocity and a random midpoint pressure"""
    X1, X2 = grid.mesh()
    u1 = np.zeros(grid.shape)
    u2 = np.zeros(grid.shape)
    T = np.zeros(grid.shape)
    q = np.zeros(grid.shape)
    for k in range(4):
        for m in (1, 2, 3):
            a, b, phase = rng.standard_normal(3)
            # ψ = a·cos(k·x1 + phase)·sin²(mπx2)
            u1 += a * np.cos(k * X1 + phase) * m * np.pi * np.sin(2.0 * m * np.pi * X2)
            u2 += a * k * np.sin(k * X1 + phase) * np.sin(m * np.pi * X2) ** 2
            T += b * np.cos(k * X1 + phase) * np.sin(m * np.pi * X2)
            q += rng.standard_normal() * np.sin(k * X1 - phase) * np.sin(m * np.pi * X2)
    u1[:, 0] = u1[:, -1] = 0.0
    u2[:, 0] = u2[:, -1] = 0.0
    v1, v2, _ = project(grid, u1, u2, 1.0, 1.0)
    p_mid = rng.standard_normal((grid.n1, grid.n2 - 1))
    return State.from_arrays(
        grid,
        u1=amplitude * v1,
        u2=amplitude * v2,
        T=amplitude * T,
        q=amplitude * q,
        p_mid=p_mid,
    )


def heat_decay_states(grid: Grid, dt: float, t_end: float, scheme: str = "crank_nicolson"):
    """Every state of a run starting from T = sin(πx2) with the flow and couplings switched off"""
    _, X2 = grid.mesh()
    state = State.from_arrays(grid, T=np.sin(np.pi * X2))
    step_config = StepConfig(dt=dt, t_end=t_end, diffusion_scheme=scheme)
    states = []
    Integrator(state, Forcing.zeros(grid), HEAT_PARAMS, step_config).run(callback=lambda i, s: states.append(s))
    return states


@pytest.fixture
def grid():
    return Grid(16, 17)


@pytest.fixture
def params():
    return DimensionlessParams(Pr=1.0, Le=0.5, R=50.0, R_tilde=10.0, sigma0p=0.5, sigma1p=0.3, omega=0.2)


@pytest.fixture
def heat_params():
    return HEAT_PARAMS


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
