"""
Manufactured-solution verification of the stepper

The exact fields are built from a streamfunction so the velocity is
divergence free and every field vanishes on the walls; the forcing that
makes them an exact solution is derived symbolically and evaluated with
numpy at every step.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from .fields import COMPONENTS, State, l2_norm
from .grid import Grid
from .operators import DEFAULT_CONFIG, OperatorConfig
from .params import DimensionlessParams
from .pressure import project_state
from .stepper import Forcing, Integrator, StepConfig

logger = logging.getLogger(__name__)

DEFAULT_PARAMS = DimensionlessParams(Pr=1.0, Le=0.5, R=1.0, R_tilde=0.5, sigma0p=0.5, sigma1p=0.5, omega=0.25)
DEFAULT_SPATIAL_GRIDS: Tuple[Tuple[int, int], ...] = ((16, 17), (32, 33), (64, 65))
DEFAULT_TEMPORAL_DTS: Tuple[float, ...] = (0.02, 0.01, 0.005, 0.0025)

DtPolicy = Union[float, Callable[[Grid], float]]


class ManufacturedSolution:
    """ψ = A sin x1 sin²(πx2) cos t, T = A sin x1 sin(πx2) cos t, q = A cos x1 sin(πx2) cos t, p = 0"""

    def __init__(
        self,
        params: DimensionlessParams = DEFAULT_PARAMS,
        amplitude: float = 0.5,
        coriolis_sign: str = "paper",
    ):
        self.params = params
        self.amplitude = amplitude
        self.coriolis_sign = coriolis_sign
        x1, x2, t = sp.symbols("x1 x2 t", real=True)
        self._symbols = (x1, x2, t)
        self.exact_expr, self.source_expr = self._derive(x1, x2, t)
        self._exact = {c: sp.lambdify((x1, x2, t), e, "numpy") for c, e in self.exact_expr.items()}
        self._source = {c: sp.lambdify((x1, x2, t), e, "numpy") for c, e in self.source_expr.items()}

    def _derive(self, x1, x2, t) -> Tuple[Dict[str, sp.Expr], Dict[str, sp.Expr]]:
        d = self.params
        A = sp.Float(self.amplitude)
        pi = sp.pi
        psi = A * sp.sin(x1) * sp.sin(pi * x2) ** 2 * sp.cos(t)
        u1 = sp.diff(psi, x2)
        u2 = -sp.diff(psi, x1)
        T = A * sp.sin(x1) * sp.sin(pi * x2) * sp.cos(t)
        q = A * sp.cos(x1) * sp.sin(pi * x2) * sp.cos(t)

        sigma = sp.Matrix(d.sigma_matrix(self.coriolis_sign).tolist())
        Pr, Le = sp.Float(d.Pr), sp.Float(d.Le)
        R, Rt = sp.Float(d.R), sp.Float(d.R_tilde)

        def lap(f):
            return sp.diff(f, x1, 2) + sp.diff(f, x2, 2)

        def transport(f):
            return u1 * sp.diff(f, x1) + u2 * sp.diff(f, x2)

        rhs = {
            "u1": Pr * (lap(u1) - (sigma[0, 0] * u1 + sigma[0, 1] * u2)) - transport(u1),
            "u2": Pr * (lap(u2) - (sigma[1, 0] * u1 + sigma[1, 1] * u2)) + Pr * (R * T - Rt * q) - transport(u2),
            "T": lap(T) + u2 - transport(T),
            "q": Le * lap(q) + u2 - transport(q),
        }
        exact = {"u1": u1, "u2": u2, "T": T, "q": q}
        source = {c: sp.diff(exact[c], t) - rhs[c] for c in COMPONENTS}
        return exact, source

    @staticmethod
    def _evaluate(fn, grid: Grid, t: float) -> np.ndarray:
        X1, X2 = grid.mesh()
        return np.broadcast_to(np.asarray(fn(X1, X2, t), dtype=float), grid.shape).copy()

    def exact(self, grid: Grid, t: float) -> State:
        values = {c: self._evaluate(self._exact[c], grid, t) for c in COMPONENTS}
        return State.from_arrays(grid, time=t, **values)

    def forcing(self, grid: Grid) -> Forcing:
        def source(t: float) -> Dict[str, np.ndarray]:
            return {c: self._evaluate(self._source[c], grid, t) for c in COMPONENTS}

        forcing = Forcing.zeros(grid)
        forcing.source = source
        return forcing

    def errors(self, s: State) -> Dict[str, float]:
        """Discrete L² error of each component against the exact fields at s.time"""
        ref = self.exact(s.grid, s.time)
        return {c: l2_norm(getattr(s, c).values - getattr(ref, c).values, s.grid) for c in COMPONENTS}

    def run(
        self,
        grid: Grid,
        dt: float,
        t_end: float,
        diffusion_scheme: str = "crank_nicolson",
        explicit_scheme: str = "ab2",
        config: OperatorConfig = DEFAULT_CONFIG,
    ) -> State:
        step_config = StepConfig(
            dt=dt,
            t_end=t_end,
            diffusion_scheme=diffusion_scheme,
            explicit_scheme=explicit_scheme,
            coriolis_sign=self.coriolis_sign,
        )
        start = project_state(self.exact(grid, 0.0), config)
        integrator = Integrator(start, self.forcing(grid), self.params, step_config, config)
        return integrator.run()


def fit_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)"""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0.0):
        return math.inf if np.all(e == 0.0) else math.nan
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


@dataclass
class ConvergenceReport:
    kind: str
    resolutions: List[float]
    errors: Dict[str, List[float]]
    orders: Dict[str, float] = field(default_factory=dict)
    target: float = 1.9

    @property
    def passed(self) -> bool:
        return all(o >= self.target for o in self.orders.values())

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "resolutions": self.resolutions,
            "errors": self.errors,
            "orders": self.orders,
            "passed": self.passed,
        }


def _resolve_dt(dt_policy: DtPolicy, grid: Grid) -> float:
    if callable(dt_policy):
        return float(dt_policy(grid))
    return float(dt_policy) * grid.dx2**2


def verify_mms(
    grid_sizes: Sequence[Tuple[int, int]] = DEFAULT_SPATIAL_GRIDS,
    dt_policy: DtPolicy = 0.5,
    t_end: float = 0.1,
    params: DimensionlessParams = DEFAULT_PARAMS,
    amplitude: float = 0.5,
    coriolis_sign: str = "paper",
    config: OperatorConfig = DEFAULT_CONFIG,
    solution: Optional[ManufacturedSolution] = None,
) -> ConvergenceReport:
    """Spatial convergence against the manufactured solution

    A float dt_policy means dt = factor·dx2²; a callable maps a grid to dt.
    The error is taken at the last step time, which is t_end rounded up to
    a whole number of steps.
    """
    mms = solution or ManufacturedSolution(params, amplitude, coriolis_sign)
    errors: Dict[str, List[float]] = {c: [] for c in COMPONENTS}
    resolutions = []
    for n1, n2 in grid_sizes:
        grid = Grid(n1, n2)
        dt = _resolve_dt(dt_policy, grid)
        final = mms.run(grid, dt, t_end, config=config)
        err = mms.errors(final)
        logger.info(f"📊 MMS {n1}x{n2} dt={dt:.3e} errors " + ", ".join(f"{c}={v:.3e}" for c, v in err.items()))
        for c in COMPONENTS:
            errors[c].append(err[c])
        resolutions.append(grid.dx2)
    report = ConvergenceReport("spatial", resolutions, errors)
    if len(resolutions) > 1:
        report.orders = {c: fit_order(resolutions, errors[c]) for c in COMPONENTS}
    return report


def temporal_convergence(
    grid_size: Tuple[int, int] = (16, 17),
    dts: Sequence[float] = DEFAULT_TEMPORAL_DTS,
    t_end: float = 0.2,
    params: DimensionlessParams = DEFAULT_PARAMS,
    amplitude: float = 0.5,
    coriolis_sign: str = "paper",
    diffusion_scheme: str = "crank_nicolson",
    config: OperatorConfig = DEFAULT_CONFIG,
    solution: Optional[ManufacturedSolution] = None,
) -> ConvergenceReport:
    """Temporal order on a fixed grid from differences between successive dt halvings

    The spatial error is common to every run and cancels in the differences.
    """
    mms = solution or ManufacturedSolution(params, amplitude, coriolis_sign)
    grid = Grid(*grid_size)
    finals = [mms.run(grid, dt, t_end, diffusion_scheme=diffusion_scheme, config=config) for dt in dts]
    errors: Dict[str, List[float]] = {c: [] for c in COMPONENTS}
    for coarse, fine in zip(finals[:-1], finals[1:]):
        for c in COMPONENTS:
            errors[c].append(l2_norm(getattr(coarse, c).values - getattr(fine, c).values, grid))
    resolutions = list(dts[:-1])
    report = ConvergenceReport("temporal", resolutions, errors)
    if len(resolutions) > 1:
        report.orders = {c: fit_order(resolutions, errors[c]) for c in COMPONENTS}
    logger.info(f"📊 MMS temporal orders on {grid.n1}x{grid.n2}: {report.orders}")
    return report
