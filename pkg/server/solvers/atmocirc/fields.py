"""
Field storage, wall conditions and quadrature on the channel grid
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import GridMismatchError, ParameterError
from .grid import Grid
from .operators import DEFAULT_CONFIG, OperatorConfig, dirichlet_form

logger = logging.getLogger(__name__)

COMPONENTS: Tuple[str, ...] = ("u1", "u2", "T", "q")


@dataclass
class ScalarField:
    """Node values of one field; Dirichlet fields carry exact zeros on both walls"""

    grid: Grid
    values: np.ndarray
    dirichlet_zero: bool = True

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("values", "field contains non-finite values")
        if self.dirichlet_zero and (np.any(self.values[:, 0] != 0.0) or np.any(self.values[:, -1] != 0.0)):
            raise ParameterError("values", "dirichlet_zero field has nonzero wall rows")

    @classmethod
    def zeros(cls, grid: Grid, dirichlet_zero: bool = True) -> "ScalarField":
        return cls(grid, grid.zeros(), dirichlet_zero)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values, self.dirichlet_zero)


def zero_walls(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def apply_dirichlet(f: ScalarField) -> ScalarField:
    """Copy of f with both wall rows set to exact zeros"""
    return ScalarField(f.grid, zero_walls(f.values), dirichlet_zero=True)


@dataclass
class State:
    """Velocity, temperature, humidity and pressure at one instant

    p holds node pressure (mean zero); p_mid is the pressure the projection
    works with, stored at x2 midpoints.
    """

    u1: ScalarField
    u2: ScalarField
    T: ScalarField
    q: ScalarField
    p: ScalarField
    time: float = 0.0
    p_mid: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        grid = self.u1.grid
        for name in COMPONENTS + ("p",):
            f = getattr(self, name)
            if f.grid != grid:
                raise GridMismatchError(f"{name} is on grid {f.grid}, expected {grid}")
            if name != "p" and not f.dirichlet_zero:
                raise ParameterError(name, "must be a dirichlet_zero field")
        if self.p.dirichlet_zero:
            raise ParameterError("p", "pressure does not carry wall conditions")
        if self.p_mid is None:
            self.p_mid = np.zeros((grid.n1, grid.n2 - 1))
        elif self.p_mid.shape != (grid.n1, grid.n2 - 1):
            raise GridMismatchError(f"p_mid shape {self.p_mid.shape} does not match grid {grid.shape}")

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "State":
        return cls(
            u1=ScalarField.zeros(grid),
            u2=ScalarField.zeros(grid),
            T=ScalarField.zeros(grid),
            q=ScalarField.zeros(grid),
            p=ScalarField.zeros(grid, dirichlet_zero=False),
            time=time,
        )

    @classmethod
    def from_arrays(
        cls,
        grid: Grid,
        u1=None,
        u2=None,
        T=None,
        q=None,
        p=None,
        time: float = 0.0,
        p_mid: Optional[np.ndarray] = None,
    ) -> "State":
        """Build a state from node arrays (None means zero); wall rows are zeroed"""

        def dirichlet(values) -> ScalarField:
            if values is None:
                return ScalarField.zeros(grid)
            return ScalarField(grid, zero_walls(np.broadcast_to(values, grid.shape)))

        pressure = grid.zeros() if p is None else np.broadcast_to(p, grid.shape)
        return cls(
            u1=dirichlet(u1),
            u2=dirichlet(u2),
            T=dirichlet(T),
            q=dirichlet(q),
            p=ScalarField(grid, pressure, dirichlet_zero=False),
            time=float(time),
            p_mid=None if p_mid is None else np.array(p_mid, dtype=float),
        )

    def components(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name).values for name in COMPONENTS}

    def copy(self) -> "State":
        return State(
            u1=self.u1.copy(),
            u2=self.u2.copy(),
            T=self.T.copy(),
            q=self.q.copy(),
            p=self.p.copy(),
            time=self.time,
            p_mid=self.p_mid.copy(),
        )


def _check_same_grid(a: State, b: State) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"states on different grids: {a.grid} vs {b.grid}")


def integrate(f) -> float:
    """∫_Ω f for a ScalarField"""
    return f.grid.integrate(f.values)


def field_mean(f) -> float:
    """Mean over Ω, which has area 2π"""
    return integrate(f) / f.grid.L1


def inner_product_H(a: State, b: State) -> float:
    """(a, b)_H over u1, u2, T, q; pressure excluded"""
    _check_same_grid(a, b)
    grid = a.grid
    return sum(grid.integrate(getattr(a, c).values * getattr(b, c).values) for c in COMPONENTS)


def energy(s: State) -> float:
    """E = ½‖φ‖²_H"""
    return 0.5 * inner_product_H(s, s)


def h1_seminorm_sq(s: State, config: OperatorConfig = DEFAULT_CONFIG) -> float:
    """Σ over u1, u2, T, q of the discrete ∫|∇f|²"""
    return sum(component_h1_sq(s, c, config) for c in COMPONENTS)


def component_h1_sq(s: State, name: str, config: OperatorConfig = DEFAULT_CONFIG) -> float:
    values = getattr(s, name).values
    return dirichlet_form(s.grid, values, values, config)


def l2_norm(values: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(max(grid.integrate(values * values), 0.0)))


def max_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0
