"""
Pressure Poisson solver and velocity projection

The projection enforces incompressibility through a midpoint ("box")
divergence: u1 is averaged onto x2 midpoints and differentiated in x1,
u2 is differenced across the cell. Its negative adjoint is the pressure
gradient at interior nodes, so the composite operator is tridiagonal per
x1 Fourier mode, projected velocities are divergence free to roundoff and
the pressure does no discrete work.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import GridMismatchError, ParameterError, SingularModeError, SolverBreakdownError
from .fields import ScalarField, State
from .grid import Grid
from .operators import DEFAULT_CONFIG, OperatorConfig, d1, dirichlet_form, from_modes, to_modes, x1_symbols

logger = logging.getLogger(__name__)


class PressureLocation(str, Enum):
    NODES = "nodes"
    MIDPOINTS = "midpoints"


@dataclass
class PoissonProblem:
    """Δ_h p = rhs, homogeneous Neumann at both walls, periodic in x1

    rhs lives on the nodes (n1 × n2) or on the x2 midpoints (n1 × (n2 - 1)).
    """

    grid: Grid
    rhs: Union[np.ndarray, ScalarField]
    pin_nullspace: bool = True
    location: str = PressureLocation.NODES.value
    config: OperatorConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if isinstance(self.rhs, ScalarField):
            if self.rhs.grid != self.grid:
                raise GridMismatchError(f"rhs grid {self.rhs.grid} does not match {self.grid}")
            self.rhs = self.rhs.values
        self.rhs = np.asarray(self.rhs, dtype=float)
        expected = self.grid.shape if self.at_nodes else (self.grid.n1, self.grid.n2 - 1)
        if self.rhs.shape != expected:
            raise GridMismatchError(f"rhs shape {self.rhs.shape} does not match {expected} for {self.location}")

    @property
    def at_nodes(self) -> bool:
        return PressureLocation(self.location) is PressureLocation.NODES


def midpoint_divergence(
    grid: Grid, u1: np.ndarray, u2: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """Box divergence at x2 midpoints, shape n1 × (n2 - 1)"""
    u1_mid = 0.5 * (u1[:, :-1] + u1[:, 1:])
    return d1(grid, u1_mid, config) + np.diff(u2, axis=1) / grid.dx2


def midpoint_gradient(
    grid: Grid, phi: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of a midpoint pressure at interior nodes; wall rows are zero"""
    g1 = grid.zeros()
    g2 = grid.zeros()
    g1[:, 1:-1] = d1(grid, 0.5 * (phi[:, :-1] + phi[:, 1:]), config)
    g2[:, 1:-1] = np.diff(phi, axis=1) / grid.dx2
    return g1, g2


def midpoints_to_nodes(grid: Grid, p_mid: np.ndarray) -> np.ndarray:
    """Node pressure from midpoint pressure, normalized to zero mean"""
    p = grid.zeros()
    p[:, 1:-1] = 0.5 * (p_mid[:, :-1] + p_mid[:, 1:])
    p[:, 0] = 1.5 * p_mid[:, 0] - 0.5 * p_mid[:, 1]
    p[:, -1] = 1.5 * p_mid[:, -1] - 0.5 * p_mid[:, -2]
    return p - grid.integrate(p) / grid.L1


def nodes_to_midpoints(grid: Grid, p: np.ndarray) -> np.ndarray:
    return 0.5 * (p[:, :-1] + p[:, 1:])


def _is_singular(coefficient: float) -> bool:
    return coefficient == 0.0


@lru_cache(maxsize=None)
def _poisson_bands(grid: Grid, x1_method: str, location: str) -> Tuple[List[np.ndarray], Tuple[bool, ...]]:
    """Banded matrices (solve_banded layout) of the x2 operator for every x1 mode"""
    sym1, sym11 = x1_symbols(grid, x1_method)
    h2 = grid.dx2**2
    bands = []
    singular = []
    if PressureLocation(location) is PressureLocation.NODES:
        n = grid.n2
        for c in sym11:
            ab = np.zeros((3, n))
            ab[0, 1:] = 1.0 / h2
            ab[2, :-1] = 1.0 / h2
            ab[1, :] = c - 2.0 / h2
            # ghost-point Neumann rows
            ab[0, 1] = 2.0 / h2
            ab[2, -2] = 2.0 / h2
            bands.append(ab)
            singular.append(_is_singular(c))
    else:
        n = grid.n2 - 1
        for s in sym1:
            c = float((s * s).real)
            ab = np.zeros((3, n))
            ab[0, 1:] = 0.25 * c + 1.0 / h2
            ab[2, :-1] = 0.25 * c + 1.0 / h2
            ab[1, :] = 0.5 * c - 2.0 / h2
            ab[1, 0] = 0.25 * c - 1.0 / h2
            ab[1, -1] = 0.25 * c - 1.0 / h2
            bands.append(ab)
            singular.append(_is_singular(c))
    for ab in bands:
        ab.flags.writeable = False
    return bands, tuple(singular)


def _weights(grid: Grid, n: int, at_nodes: bool) -> np.ndarray:
    if at_nodes:
        return grid.trapezoid_weights
    return np.full(n, grid.dx2)


def solve_poisson(prob: PoissonProblem) -> np.ndarray:
    """Mean-zero solution of Δ_h p = rhs - mean(rhs)

    Each x1 Fourier mode is one tridiagonal system in x2. Modes whose
    operator has the constants as nullspace are pinned (first row replaced
    by p = 0) and re-centred.
    """
    grid = prob.grid
    at_nodes = prob.at_nodes
    rhs = prob.rhs
    n = rhs.shape[1]
    w = _weights(grid, n, at_nodes)
    rhs = rhs - np.sum(rhs @ w) / (grid.n1 * np.sum(w))

    bands, singular = _poisson_bands(grid, prob.config.x1_method, prob.location)
    rhs_hat = to_modes(rhs)
    p_hat = np.zeros_like(rhs_hat)
    for k, ab in enumerate(bands):
        b = rhs_hat[k]
        if singular[k]:
            if not prob.pin_nullspace:
                raise SingularModeError(f"x1 mode {k} is singular and pin_nullspace is disabled")
            ab = ab.copy()
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
            b = b.copy()
            b[0] = 0.0
        try:
            sol = solve_banded((1, 1), ab, b, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SolverBreakdownError(f"Poisson solve failed for x1 mode {k}: {e}") from e
        if singular[k]:
            sol = sol - np.dot(sol, w) / np.sum(w)
        p_hat[k] = sol
    return from_modes(p_hat, grid.n1)


def neumann_laplacian(grid: Grid, p: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """The node operator solve_poisson inverts, applied to p"""
    bands, _ = _poisson_bands(grid, config.x1_method, PressureLocation.NODES.value)
    return _apply_bands(grid, bands, p)


def projection_operator(grid: Grid, phi: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Box divergence of the midpoint gradient, the operator project inverts"""
    g1, g2 = midpoint_gradient(grid, phi, config)
    return midpoint_divergence(grid, g1, g2, config)


def _apply_bands(grid: Grid, bands: List[np.ndarray], values: np.ndarray) -> np.ndarray:
    modes = to_modes(values)
    out = np.zeros_like(modes)
    for k, ab in enumerate(bands):
        v = modes[k]
        r = ab[1] * v
        r[:-1] += ab[0, 1:] * v[1:]
        r[1:] += ab[2, :-1] * v[:-1]
        out[k] = r
    return from_modes(out, grid.n1)


def project(
    grid: Grid,
    u1: np.ndarray,
    u2: np.ndarray,
    dt: float,
    Pr: float,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Remove the gradient part of (u1, u2)

    Solves for φ at x2 midpoints with rhs div_h(u)/(dt·Pr) and returns
    (u1 - dt·Pr·∂1φ, u2 - dt·Pr·∂2φ, φ). Wall rows of the result are zero.
    """
    if not dt > 0:
        raise ParameterError("dt", f"must be positive, got {dt!r}")
    if not Pr > 0:
        raise ParameterError("Pr", f"must be positive, got {Pr!r}")
    scale = dt * Pr
    rhs = midpoint_divergence(grid, u1, u2, config) / scale
    phi = solve_poisson(PoissonProblem(grid, rhs, location=PressureLocation.MIDPOINTS.value, config=config))
    g1, g2 = midpoint_gradient(grid, phi, config)
    v1 = u1 - scale * g1
    v2 = u2 - scale * g2
    for v in (v1, v2):
        v[:, 0] = 0.0
        v[:, -1] = 0.0
    return v1, v2, phi


def project_state(state: State, config: OperatorConfig = DEFAULT_CONFIG) -> State:
    """Copy of state with a box-divergence-free velocity; scalars, pressure and time are kept"""
    v1, v2, _ = project(state.grid, state.u1.values, state.u2.values, 1.0, 1.0, config)
    out = state.copy()
    out.u1.values[...] = v1
    out.u2.values[...] = v2
    return out


def divergence_inf(grid: Grid, u1: np.ndarray, u2: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> float:
    """max |div_h u| relative to 1 + ‖∇u‖"""
    div = midpoint_divergence(grid, u1, u2, config)
    d_u = dirichlet_form(grid, u1, u1, config) + dirichlet_form(grid, u2, u2, config)
    return float(np.max(np.abs(div)) / (1.0 + np.sqrt(max(d_u, 0.0))))
