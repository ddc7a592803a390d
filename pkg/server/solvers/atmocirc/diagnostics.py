"""
Energy budget, dissipation-inequality and Hölder checks, weak-form residuals

Every quantity here is a discrete quadrature over the same inner product
the stepper's operators are adjoint in, so the cancellations of advection
and pressure work hold to roundoff rather than to truncation error.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import TestFunctionError, TrajectoryError
from .fields import COMPONENTS, State, energy, h1_seminorm_sq, zero_walls
from .grid import Grid
from .mms import fit_order
from .operators import DEFAULT_CONFIG, OperatorConfig, advect, dirichlet_form, laplacian
from .params import CoriolisSign, DimensionlessParams
from .pressure import divergence_inf, midpoint_gradient, project
from .stepper import Forcing, rhs_explicit

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-6
CANCELLATION_TOLERANCE = 1e-8
A1_ROUNDOFF = 1e-12
HOLDER_TARGET = 0.5 - 0.05


@dataclass
class EnergyBudget:
    """Terms of ⟨Fφ, φ⟩ by quadrature; `full` is assembled independently from the discrete tendencies"""

    diffusion_u: float
    friction: float
    coupling_T: float
    coupling_q: float
    diffusion_T: float
    source_T: float
    diffusion_q: float
    source_q: float
    advection_total: float
    pressure_work: float
    full: float
    source_u: float = 0.0
    forcing_norm_sq: float = 0.0

    @property
    def reduced(self) -> float:
        return (
            self.diffusion_u
            + self.friction
            + self.coupling_T
            + self.coupling_q
            + self.diffusion_T
            + self.source_T
            + self.diffusion_q
            + self.source_q
            + self.source_u
        )

    @property
    def identity_defect(self) -> float:
        return abs(self.full - self.reduced - self.advection_total - self.pressure_work)

    @property
    def cancellation(self) -> float:
        return abs(self.advection_total) + abs(self.pressure_work)


def _pair(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return grid.integrate(a * b)


def energy_identity(
    s: State,
    f: Forcing,
    d: DimensionlessParams,
    coriolis_sign: str = CoriolisSign.PAPER.value,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> EnergyBudget:
    grid = s.grid
    u1, u2, T, q = s.u1.values, s.u2.values, s.T.values, s.q.values
    sigma = d.sigma_matrix(coriolis_sign)
    sources = f.at(s.time)
    nu = d.diffusivities()

    # full ⟨Fφ, φ⟩ straight from the discrete right-hand side
    tendency = rhs_explicit(s, f, d, coriolis_sign, config)
    gp1, gp2 = midpoint_gradient(grid, s.p_mid, config)
    pressure = {"u1": gp1, "u2": gp2}
    full = 0.0
    for c, values in s.components().items():
        total = tendency[c] + nu[c] * laplacian(grid, values, config)
        if c in pressure:
            total = total - d.Pr * pressure[c]
        full += _pair(grid, total, values)

    friction_density = sigma[0, 0] * u1 * u1 + (sigma[0, 1] + sigma[1, 0]) * u1 * u2 + sigma[1, 1] * u2 * u2
    advection = sum(_pair(grid, advect(grid, u1, u2, v, config), v) for v in (u1, u2, T, q))
    budget = EnergyBudget(
        diffusion_u=-d.Pr * (dirichlet_form(grid, u1, u1, config) + dirichlet_form(grid, u2, u2, config)),
        friction=-d.Pr * grid.integrate(friction_density),
        coupling_T=(d.Pr * d.R + 1.0) * _pair(grid, u2, T),
        coupling_q=-(d.Pr * d.R_tilde - 1.0) * _pair(grid, q, u2),
        diffusion_T=-dirichlet_form(grid, T, T, config),
        source_T=_pair(grid, sources["T"], T),
        diffusion_q=-d.Le * dirichlet_form(grid, q, q, config),
        source_q=_pair(grid, sources["q"], q),
        advection_total=-advection,
        pressure_work=-d.Pr * (_pair(grid, gp1, u1) + _pair(grid, gp2, u2)),
        full=full,
        source_u=_pair(grid, sources["u1"], u1) + _pair(grid, sources["u2"], u2),
        forcing_norm_sq=grid.integrate(sources["T"] ** 2 + sources["q"] ** 2),
    )
    scale = 1.0 + abs(full) + abs(budget.reduced)
    if abs(budget.full - budget.reduced) > IDENTITY_TOLERANCE * scale:
        logger.warning(
            f"⚠️ Energy identity mismatch at t = {s.time:.6g}: full {budget.full:.6e} vs reduced {budget.reduced:.6e}"
        )
    return budget


@dataclass
class A1Certificate:
    C1: float
    C2: float
    C4: float
    lhs: float
    rhs: float
    margin: float
    satisfied: bool


def a1_constants(d: DimensionlessParams, coriolis_sign: str = CoriolisSign.PAPER.value) -> Dict[str, float]:
    return {
        "C1": 0.5 * min(d.Pr, 1.0, d.Le),
        "C2": d.Pr * abs(d.R) + d.Pr * abs(d.R_tilde) + 2.0 + d.Pr * d.sigma_norm(coriolis_sign),
    }


def check_A1(
    budget: EnergyBudget,
    E: float,
    D: float,
    d: DimensionlessParams,
    coriolis_sign: str = CoriolisSign.PAPER.value,
) -> A1Certificate:
    """⟨Fφ, φ⟩ ≤ -C1·‖φ‖²_H1 + C2·‖φ‖²_H + C4 with ‖φ‖²_H = 2E"""
    consts = a1_constants(d, coriolis_sign)
    C4 = budget.forcing_norm_sq
    lhs = budget.full
    rhs = -consts["C1"] * D + consts["C2"] * 2.0 * E + C4
    margin = rhs - lhs
    satisfied = margin >= -A1_ROUNDOFF * (1.0 + abs(rhs))
    if not satisfied:
        logger.warning(f"⚠️ A1 inequality violated: lhs {lhs:.6e} > rhs {rhs:.6e}")
    return A1Certificate(consts["C1"], consts["C2"], C4, lhs, rhs, margin, satisfied)


@dataclass
class TestFunction:
    """Wall-vanishing test function; components missing from `values` are zero"""

    __test__ = False

    name: str
    grid: Grid
    values: Dict[str, np.ndarray]

    def __post_init__(self):
        unknown = set(self.values) - set(COMPONENTS)
        if unknown:
            raise TestFunctionError(f"{self.name}: unknown components {sorted(unknown)}")
        for c, v in self.values.items():
            v = np.asarray(v, dtype=float)
            if v.shape != self.grid.shape:
                raise TestFunctionError(f"{self.name}: component {c} has shape {v.shape}, expected {self.grid.shape}")
            if np.any(v[:, 0] != 0.0) or np.any(v[:, -1] != 0.0):
                raise TestFunctionError(f"{self.name}: component {c} does not vanish on the walls")
            self.values[c] = v


def test_function_bank(grid: Grid, config: OperatorConfig = DEFAULT_CONFIG) -> List[TestFunction]:
    """Products trig(k·x1)·sin(mπx2) in T and q, and streamfunction velocity pairs, for k ≤ 2, m ≤ 2

    Velocity pairs are projected so the discrete pressure does no work on them.
    """
    X1, X2 = grid.mesh()
    modes = [("cos", 0), ("cos", 1), ("sin", 1), ("cos", 2), ("sin", 2)]
    bank: List[TestFunction] = []
    for c in ("T", "q"):
        for m in (1, 2):
            for kind, k in modes:
                trig = np.cos(k * X1) if kind == "cos" else np.sin(k * X1)
                values = zero_walls(trig * np.sin(m * np.pi * X2))
                bank.append(TestFunction(f"{c}_{kind}{k}_m{m}", grid, {c: values}))
    for m in (1, 2):
        for kind, k in modes:
            if kind == "cos":
                trig, dtrig = np.cos(k * X1), -k * np.sin(k * X1)
            else:
                trig, dtrig = np.sin(k * X1), k * np.cos(k * X1)
            u1 = zero_walls(trig * m * np.pi * np.sin(2.0 * m * np.pi * X2))
            u2 = zero_walls(-dtrig * np.sin(m * np.pi * X2) ** 2)
            v1, v2, _ = project(grid, u1, u2, 1.0, 1.0, config)
            bank.append(TestFunction(f"u_{kind}{k}_m{m}", grid, {"u1": v1, "u2": v2}))
    return bank


test_function_bank.__test__ = False


def _as_test_function(v, grid: Grid) -> TestFunction:
    if isinstance(v, TestFunction):
        if v.grid != grid:
            raise TestFunctionError(f"{v.name}: grid {v.grid} does not match trajectory grid {grid}")
        return v
    if isinstance(v, State):
        return TestFunction("state", grid, v.components())
    return TestFunction("custom", grid, dict(v))


def pair_with_state(s: State, v: TestFunction) -> float:
    """(φ, v)_H"""
    return sum(_pair(s.grid, getattr(s, c).values, vc) for c, vc in v.values.items())


def weak_pairings(
    s: State,
    bank: Sequence[TestFunction],
    f: Forcing,
    d: DimensionlessParams,
    coriolis_sign: str = CoriolisSign.PAPER.value,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """⟨Fφ, v⟩ for every v in the bank, diffusion in integrated-by-parts form, pressure omitted"""
    grid = s.grid
    nu = d.diffusivities()
    tendency = rhs_explicit(s, f, d, coriolis_sign, config)
    out = np.empty(len(bank))
    for i, v in enumerate(bank):
        total = 0.0
        for c, vc in v.values.items():
            phi = getattr(s, c).values
            total += -nu[c] * dirichlet_form(grid, phi, vc, config) + _pair(grid, tendency[c], vc)
        out[i] = total
    return out


def weak_pairing(
    s: State,
    v,
    f: Forcing,
    d: DimensionlessParams,
    coriolis_sign: str = CoriolisSign.PAPER.value,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> float:
    return float(weak_pairings(s, [_as_test_function(v, s.grid)], f, d, coriolis_sign, config)[0])


@dataclass
class Trajectory:
    """Snapshots of one run together with what is needed to evaluate F along it"""

    states: List[State]
    forcing: Forcing
    params: DimensionlessParams
    coriolis_sign: str = CoriolisSign.PAPER.value
    config: OperatorConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if not self.states:
            raise TrajectoryError("trajectory has no snapshots")
        t = self.times
        if np.any(np.diff(t) <= 0):
            raise TrajectoryError("snapshot times must be strictly increasing")

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    def pairings(self, bank: Sequence[TestFunction]) -> np.ndarray:
        """⟨Fφ(t_n), v_i⟩ as an array of shape (snapshots, bank)"""
        return np.array(
            [weak_pairings(s, bank, self.forcing, self.params, self.coriolis_sign, self.config) for s in self.states]
        ).reshape(len(self.states), len(bank))


def weak_residual(trajectory: Trajectory, v) -> np.ndarray:
    """r(t_n) = (φ(t_n), v)_H - (φ(t_0), v)_H - ∫⟨Fφ, v⟩dt, trapezoid over snapshots"""
    v = _as_test_function(v, trajectory.grid)
    g = trajectory.pairings([v])[:, 0]
    proj = np.array([pair_with_state(s, v) for s in trajectory.states])
    integral = cumulative_trapezoid(g, trajectory.times, initial=0.0)
    return proj - proj[0] - integral


@dataclass
class HolderFit:
    windows: List[float]
    integrals: List[float]
    slope: float
    degenerate: bool
    satisfied: bool
    target: float = HOLDER_TARGET


def default_windows(times: np.ndarray, t0: float, levels: int = 5, h_max: Optional[float] = None) -> List[float]:
    """Halving ladder from h_max (default half the remaining span), never shorter than two snapshot gaps"""
    span = times[-1] - t0
    spacing = float(np.min(np.diff(times))) if len(times) > 1 else 0.0
    top = 0.5 * span if h_max is None else min(h_max, span)
    windows = [top * 2.0**-m for m in range(levels)]
    return [h for h in windows if h >= 2.0 * spacing] or [span]


def check_A2(
    trajectory: Trajectory,
    v,
    windows: Optional[Sequence[float]] = None,
    t0: Optional[float] = None,
) -> HolderFit:
    """Fit the exponent α in |∫_{t0}^{t0+h}⟨Fφ, v⟩dt| ~ h^α over a ladder of windows"""
    v = _as_test_function(v, trajectory.grid)
    times = trajectory.times
    t0 = float(times[0]) if t0 is None else float(t0)
    if len(times) < 2:
        raise TrajectoryError("at least two snapshots are needed for a window integral")
    windows = list(default_windows(times, t0) if windows is None else windows)
    eps = 1e-12 * max(1.0, abs(times[-1]))
    if t0 < times[0] - eps:
        raise TrajectoryError(f"t0 = {t0} precedes the trajectory start {times[0]}")
    for h in windows:
        if h <= 0:
            raise TrajectoryError(f"window length must be positive, got {h}")
        if t0 + h > times[-1] + eps:
            raise TrajectoryError(f"window [{t0}, {t0 + h}] exceeds the trajectory end {times[-1]}")

    g = trajectory.pairings([v])[:, 0]
    cumulative = cumulative_trapezoid(g, times, initial=0.0)
    start = np.interp(t0, times, cumulative)
    integrals = [abs(float(np.interp(t0 + h, times, cumulative) - start)) for h in windows]

    scale = max(1.0, max(abs(pair_with_state(s, v)) for s in trajectory.states), float(np.max(np.abs(g))))
    positive = [(h, i) for h, i in zip(windows, integrals) if i > 1e-12 * scale]
    if len(positive) < 2:
        return HolderFit(windows, integrals, math.nan, degenerate=True, satisfied=True)
    slope = fit_order([h for h, _ in positive], [i for _, i in positive])
    return HolderFit(windows, integrals, slope, degenerate=False, satisfied=slope >= HOLDER_TARGET)


def energy_rate_check(trajectory: Trajectory) -> np.ndarray:
    """Finite-difference dE/dt between snapshots minus the mean of ⟨Fφ, φ⟩ at the two ends"""
    times = trajectory.times
    E = np.array([energy(s) for s in trajectory.states])
    full = np.array(
        [
            energy_identity(s, trajectory.forcing, trajectory.params, trajectory.coriolis_sign, trajectory.config).full
            for s in trajectory.states
        ]
    )
    return np.diff(E) / np.diff(times) - 0.5 * (full[1:] + full[:-1])


@dataclass
class DiagnosticsRecord:
    time: float
    E: float
    D: float
    divergence_inf: float
    budget: EnergyBudget
    a1: A1Certificate
    weak_residuals: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, float]:
        row = {
            "time": self.time,
            "E": self.E,
            "D": self.D,
            "div_inf": self.divergence_inf,
            "adv_total": self.budget.advection_total,
            "press_work": self.budget.pressure_work,
            "A1_margin": self.a1.margin,
        }
        row.update({f"r_{name}": value for name, value in self.weak_residuals.items()})
        return row


def record(
    s: State,
    f: Forcing,
    d: DimensionlessParams,
    coriolis_sign: str = CoriolisSign.PAPER.value,
    config: OperatorConfig = DEFAULT_CONFIG,
    weak_residuals: Optional[Dict[str, float]] = None,
) -> DiagnosticsRecord:
    E = energy(s)
    D = h1_seminorm_sq(s, config)
    budget = energy_identity(s, f, d, coriolis_sign, config)
    if budget.cancellation > CANCELLATION_TOLERANCE * (1.0 + E + D):
        logger.warning(f"⚠️ Advection/pressure cancellation {budget.cancellation:.3e} at t = {s.time:.6g}")
    return DiagnosticsRecord(
        time=s.time,
        E=E,
        D=D,
        divergence_inf=divergence_inf(s.grid, s.u1.values, s.u2.values, config),
        budget=budget,
        a1=check_A1(budget, E, D, d, coriolis_sign),
        weak_residuals=dict(weak_residuals or {}),
    )


class WeakResidualTracker:
    """Running weak-form residuals over a bank of test functions, one snapshot at a time"""

    def __init__(
        self,
        bank: Iterable[TestFunction],
        forcing: Forcing,
        params: DimensionlessParams,
        coriolis_sign: str = CoriolisSign.PAPER.value,
        config: OperatorConfig = DEFAULT_CONFIG,
    ):
        self.bank = list(bank)
        self.forcing = forcing
        self.params = params
        self.coriolis_sign = coriolis_sign
        self.config = config
        self._initial: Optional[np.ndarray] = None
        self._last_time: Optional[float] = None
        self._last_pairing: Optional[np.ndarray] = None
        self._integral = np.zeros(len(self.bank))

    @property
    def names(self) -> List[str]:
        return [v.name for v in self.bank]

    def update(self, s: State) -> Dict[str, float]:
        g = weak_pairings(s, self.bank, self.forcing, self.params, self.coriolis_sign, self.config)
        proj = np.array([pair_with_state(s, v) for v in self.bank])
        if self._initial is None:
            self._initial = proj
        else:
            self._integral = self._integral + 0.5 * (s.time - self._last_time) * (g + self._last_pairing)
        self._last_time = s.time
        self._last_pairing = g
        residual = proj - self._initial - self._integral
        return dict(zip(self.names, residual.tolist()))
