"""
IMEX time integration of the channel system

Advection, friction/rotation, buoyancy, the u2 source terms and forcing are
explicit (AB2 after an Euler start); diffusion is implicit (backward Euler
or Crank-Nicolson) through one tridiagonal x2 solve per x1 Fourier mode;
incompressibility is restored by an incremental projection.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import NumericalBreakdownError, ParameterError, SolverBreakdownError
from .fields import COMPONENTS, ScalarField, State, zero_walls
from .grid import Grid
from .operators import DEFAULT_CONFIG, OperatorConfig, advect, from_modes, laplacian, to_modes, x1_symbols
from .params import CoriolisSign, DimensionlessParams
from .pressure import midpoint_gradient, midpoints_to_nodes, project

logger = logging.getLogger(__name__)

Tendency = Dict[str, np.ndarray]


class DiffusionScheme(str, Enum):
    BACKWARD_EULER = "backward_euler"
    CRANK_NICOLSON = "crank_nicolson"


class ExplicitScheme(str, Enum):
    EULER = "euler"
    AB2 = "ab2"


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float
    diffusion_scheme: str = DiffusionScheme.CRANK_NICOLSON.value
    explicit_scheme: str = ExplicitScheme.AB2.value
    snapshot_interval: int = 1
    coriolis_sign: str = CoriolisSign.PAPER.value
    cfl_limit: float = 0.5

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError("dt", f"must be a positive finite number, got {self.dt!r}")
        if not (isinstance(self.t_end, (int, float)) and math.isfinite(self.t_end) and self.t_end >= 0):
            raise ParameterError("t_end", f"must be a non-negative finite number, got {self.t_end!r}")
        if not isinstance(self.snapshot_interval, int) or self.snapshot_interval < 1:
            raise ParameterError("snapshot_interval", f"must be a positive integer, got {self.snapshot_interval!r}")
        if not self.cfl_limit > 0:
            raise ParameterError("cfl_limit", f"must be positive, got {self.cfl_limit!r}")
        for name, enum in (
            ("diffusion_scheme", DiffusionScheme),
            ("explicit_scheme", ExplicitScheme),
            ("coriolis_sign", CoriolisSign),
        ):
            try:
                enum(getattr(self, name))
            except ValueError:
                raise ParameterError(name, f"unknown value {getattr(self, name)!r}") from None

    @property
    def theta(self) -> float:
        return 1.0 if DiffusionScheme(self.diffusion_scheme) is DiffusionScheme.BACKWARD_EULER else 0.5

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9))


SourceCallback = Callable[[float], Tendency]


@dataclass
class Forcing:
    """Heat and humidity sources; `source` adds time-dependent terms per component"""

    Q: ScalarField
    G: ScalarField
    source: Optional[SourceCallback] = field(default=None, repr=False)

    @classmethod
    def zeros(cls, grid: Grid) -> "Forcing":
        return cls(ScalarField.zeros(grid, dirichlet_zero=False), ScalarField.zeros(grid, dirichlet_zero=False))

    @classmethod
    def constant(cls, grid: Grid, Q0: float, G0: float) -> "Forcing":
        return cls(
            ScalarField(grid, np.full(grid.shape, float(Q0)), dirichlet_zero=False),
            ScalarField(grid, np.full(grid.shape, float(G0)), dirichlet_zero=False),
        )

    def at(self, t: float) -> Tendency:
        """Additive source per component at time t"""
        zero = np.zeros_like(self.Q.values)
        terms = {"u1": zero, "u2": zero, "T": self.Q.values, "q": self.G.values}
        if self.source is not None:
            extra = self.source(t)
            terms = {c: terms[c] + extra.get(c, 0.0) for c in COMPONENTS}
        return terms


def rhs_explicit(
    s: State,
    f: Forcing,
    d: DimensionlessParams,
    coriolis_sign: str = CoriolisSign.PAPER.value,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> Tendency:
    """Explicit tendencies for u1, u2, T, q (diffusion and pressure excluded); wall rows are zero"""
    grid = s.grid
    u1, u2 = s.u1.values, s.u2.values
    T, q = s.T.values, s.q.values
    sigma = d.sigma_matrix(coriolis_sign)
    sources = f.at(s.time)
    out = {
        "u1": -advect(grid, u1, u2, u1, config) - d.Pr * (sigma[0, 0] * u1 + sigma[0, 1] * u2),
        "u2": -advect(grid, u1, u2, u2, config)
        - d.Pr * (sigma[1, 0] * u1 + sigma[1, 1] * u2)
        + d.Pr * (d.R * T - d.R_tilde * q),
        "T": -advect(grid, u1, u2, T, config) + u2,
        "q": -advect(grid, u1, u2, q, config) + u2,
    }
    return {c: zero_walls(out[c] + sources[c]) for c in COMPONENTS}


@lru_cache(maxsize=64)
def _implicit_bands(grid: Grid, x1_method: str, coefficient: float) -> List[np.ndarray]:
    """(I - c·Δ_h) on interior rows with Dirichlet walls, per x1 mode, c = θ·dt·ν"""
    _, sym11 = x1_symbols(grid, x1_method)
    n = grid.n2 - 2
    off = -coefficient / grid.dx2**2
    bands = []
    for s in sym11:
        ab = np.zeros((3, n))
        ab[0, 1:] = off
        ab[2, :-1] = off
        ab[1, :] = 1.0 - coefficient * s - 2.0 * off
        ab.flags.writeable = False
        bands.append(ab)
    return bands


def implicit_solve(
    grid: Grid, rhs: np.ndarray, coefficient: float, config: OperatorConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """Solve (I - c·Δ_h) f = rhs on interior rows; returned walls are zero"""
    out = grid.zeros()
    if coefficient == 0.0:
        out[:, 1:-1] = rhs[:, 1:-1]
        return out
    bands = _implicit_bands(grid, config.x1_method, coefficient)
    rhs_hat = to_modes(rhs[:, 1:-1])
    sol_hat = np.empty_like(rhs_hat)
    for k, ab in enumerate(bands):
        try:
            sol_hat[k] = solve_banded((1, 1), ab, rhs_hat[k], check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SolverBreakdownError(f"implicit diffusion solve failed for x1 mode {k}: {e}") from e
    out[:, 1:-1] = from_modes(sol_hat, grid.n1)
    return out


def cfl_number(s: State, dt: float) -> float:
    grid = s.grid
    return float(dt * np.max(np.abs(s.u1.values) / grid.dx1 + np.abs(s.u2.values) / grid.dx2))


@dataclass
class StepResult:
    state: State
    tendency: Tendency


def step(
    s: State,
    f: Forcing,
    d: DimensionlessParams,
    c: StepConfig,
    history: Optional[Tendency] = None,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> StepResult:
    """Advance one IMEX step

    `history` is the explicit tendency of the previous step (None selects
    the Euler start). The returned tendency feeds the next AB2 step.
    """
    grid = s.grid
    dt = c.dt
    theta = c.theta

    cfl = cfl_number(s, dt)
    if cfl > c.cfl_limit:
        logger.warning(f"⚠️ CFL number {cfl:.3f} exceeds {c.cfl_limit} at t = {s.time:.6g}")

    tendency = rhs_explicit(s, f, d, c.coriolis_sign, config)
    if history is not None and ExplicitScheme(c.explicit_scheme) is ExplicitScheme.AB2:
        explicit = {k: 1.5 * tendency[k] - 0.5 * history[k] for k in COMPONENTS}
    else:
        explicit = tendency

    # incremental pressure: the predictor carries the previous pressure gradient
    gp1, gp2 = midpoint_gradient(grid, s.p_mid, config)
    explicit = dict(explicit)
    explicit["u1"] = explicit["u1"] - d.Pr * gp1
    explicit["u2"] = explicit["u2"] - d.Pr * gp2

    nu = d.diffusivities()
    new = {}
    for name, values in s.components().items():
        rhs = values + dt * explicit[name]
        if theta < 1.0:
            rhs = rhs + (1.0 - theta) * dt * nu[name] * laplacian(grid, values, config)
        new[name] = implicit_solve(grid, rhs, theta * dt * nu[name], config)

    u1, u2, phi = project(grid, new["u1"], new["u2"], dt, d.Pr, config)
    p_mid = s.p_mid + phi
    t_new = s.time + dt

    bad = [name for name, values in (("u1", u1), ("u2", u2), ("T", new["T"]), ("q", new["q"]), ("p", p_mid))
           if not np.all(np.isfinite(values))]
    if bad:
        raise NumericalBreakdownError(t_new, bad)

    state = State(
        u1=ScalarField(grid, u1),
        u2=ScalarField(grid, u2),
        T=ScalarField(grid, new["T"]),
        q=ScalarField(grid, new["q"]),
        p=ScalarField(grid, midpoints_to_nodes(grid, p_mid), dirichlet_zero=False),
        time=t_new,
        p_mid=p_mid,
    )
    return StepResult(state, tendency)


class Integrator:
    """Owns one run: current state, forcing, parameters and AB2 history"""

    def __init__(
        self,
        state: State,
        forcing: Forcing,
        params: DimensionlessParams,
        step_config: StepConfig,
        operators: OperatorConfig = DEFAULT_CONFIG,
    ):
        self.state = state
        self.forcing = forcing
        self.params = params
        self.step_config = step_config
        self.operators = operators
        self.history: Optional[Tendency] = None
        self.steps_taken = 0

    def advance(self, n: int = 1) -> State:
        for _ in range(n):
            try:
                result = step(self.state, self.forcing, self.params, self.step_config, self.history, self.operators)
            except NumericalBreakdownError as e:
                error = NumericalBreakdownError(e.time, e.fields, step=self.steps_taken + 1)
                logger.error(f"❌ Numerical breakdown: {error}")
                raise error from e
            self.state = result.state
            self.history = result.tendency
            self.steps_taken += 1
        return self.state

    def run(
        self,
        n_steps: Optional[int] = None,
        callback: Optional[Callable[[int, State], None]] = None,
    ) -> State:
        """Take n_steps (default: up to t_end); callback sees step 0, every snapshot_interval and the last step"""
        total = self.step_config.n_steps if n_steps is None else n_steps
        interval = self.step_config.snapshot_interval
        if callback is not None:
            callback(self.steps_taken, self.state)
        for i in range(1, total + 1):
            self.advance()
            if callback is not None and (i % interval == 0 or i == total):
                callback(self.steps_taken, self.state)
        return self.state
