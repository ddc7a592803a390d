"""
Simulation runner - drives a configured run end to end and re-checks stored trajectories
"""

import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import __version__
from .config import ForcingKind, InitialKind, RunConfig, parse_config, render_config
from .diagnostics import (
    CANCELLATION_TOLERANCE,
    Trajectory,
    WeakResidualTracker,
    check_A1,
    check_A2,
    default_windows,
    energy_identity,
    pair_with_state,
    record,
    test_function_bank,
)
from .errors import AtmocircError, ConfigError, NumericalBreakdownError, SolverBreakdownError, TrajectoryError
from .fields import ScalarField, State, energy, h1_seminorm_sq
from .grid import Grid
from .params import scale_forcing
from .pressure import project_state
from .snapshots import (
    list_snapshots,
    load_forcing,
    load_snapshot,
    read_diagnostics,
    snapshot_name,
    snapshot_step,
    write_diagnostics,
    write_snapshot,
)
from .stepper import Forcing, Integrator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_MMS_ORDER = 3
EXIT_CHECK_FAILED = 4

MANIFEST = "manifest.txt"
DIAGNOSTICS = "diagnostics.csv"
LOCK = ".atmocirc.lock"
DEFAULT_OUTPUT_DIR = "atmocirc_output"


def resolve_output_dir(config: RunConfig, out_dir: Optional[str] = None) -> Path:
    return Path(out_dir or config.output_directory or os.getenv("ATMOCIRC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))


def build_initial_state(config: RunConfig, grid: Grid) -> State:
    spec = config.initial
    kind = InitialKind(spec.kind)
    if kind is InitialKind.ZERO:
        return State.zeros(grid)
    if kind is InitialKind.FILE:
        try:
            state = load_snapshot(spec.path, grid)
        except (AtmocircError, OSError, ValueError) as e:
            raise ConfigError(f"initial.path: {e}", field="initial.path") from e
        return project_state(state, config.operators)

    X1, X2 = grid.mesh()
    k, m = spec.k, spec.m
    mode = np.cos(k * X1)
    # ψ = a·cos(k·x1)·sin²(mπx2), u = (∂ψ/∂x2, -∂ψ/∂x1)
    a = spec.psi_amplitude
    u1 = a * mode * m * np.pi * np.sin(2.0 * m * np.pi * X2)
    u2 = a * k * np.sin(k * X1) * np.sin(m * np.pi * X2) ** 2
    shape = np.sin(m * np.pi * X2)
    state = State.from_arrays(grid, u1=u1, u2=u2, T=spec.T_amplitude * mode * shape, q=spec.q_amplitude * mode * shape)
    return project_state(state, config.operators)


def build_forcing(config: RunConfig, grid: Grid) -> Forcing:
    spec = config.nondimensional_forcing()
    kind = ForcingKind(spec.kind)
    if kind is ForcingKind.ZERO:
        return Forcing.zeros(grid)
    if kind is ForcingKind.CONSTANT:
        return Forcing.constant(grid, spec.Q0, spec.G0)
    if kind is ForcingKind.FILE:
        try:
            Q, G = load_forcing(spec.path, grid)
        except (AtmocircError, OSError, ValueError) as e:
            raise ConfigError(f"forcing.path: {e}", field="forcing.path") from e
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(G))):
            raise ConfigError(f"forcing.path: {spec.path} contains non-finite values", field="forcing.path")
        if config.physical is not None:
            Q, G = scale_forcing(config.physical, Q, G, config.humidity_source_scaling)
    else:
        X1, X2 = grid.mesh()
        shape = np.cos(spec.k * X1) * np.sin(spec.m * np.pi * X2)
        Q, G = spec.Q_amplitude * shape, spec.G_amplitude * shape
    return Forcing(ScalarField(grid, Q, dirichlet_zero=False), ScalarField(grid, G, dirichlet_zero=False))


def manifest_text(config: RunConfig) -> str:
    """Configuration echo preceded by version and derived parameters as comments, so it parses as a config"""
    params = config.params()
    step = config.nondimensional_step()
    lines = [
        "# atmocirc run manifest",
        f"# version = {__version__}",
    ]
    lines += [f"# derived {name} = {value!r}" for name, value in params.to_dict().items()]
    lines += [f"# derived dt = {step.dt!r}", f"# derived t_end = {step.t_end!r}", ""]
    return "\n".join(lines) + render_config(config)


@contextmanager
def output_lock(directory: Path) -> Iterator[Path]:
    """Exclusive lock file in the output directory for the duration of a run"""
    lock = directory / LOCK
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory {directory} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield lock
    finally:
        lock.unlink(missing_ok=True)


class SimulationRunner:
    """Runs one configuration and writes manifest, snapshots and diagnostics"""

    def __init__(self, config: RunConfig, out_dir: Optional[str] = None):
        self.config = config
        self.out_dir = resolve_output_dir(config, out_dir)
        self.records: List[dict] = []
        self.final_state: Optional[State] = None

    def run(self) -> int:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with output_lock(self.out_dir):
                return self._run_locked()
        except ConfigError as e:
            logger.error(f"❌ Configuration error: {e}")
            return EXIT_CONFIG
        except OSError as e:
            logger.error(f"❌ Output error: {e}")
            return EXIT_CONFIG

    def _run_locked(self) -> int:
        config = self.config
        grid = config.grid
        params = config.params()
        step = config.nondimensional_step()
        state = build_initial_state(config, grid)
        forcing = build_forcing(config, grid)

        (self.out_dir / MANIFEST).write_text(manifest_text(config), encoding="utf-8")
        for stale in list_snapshots(self.out_dir):
            stale.unlink()
        logger.info(f"🚀 Run {grid.n1}x{grid.n2}, {step.n_steps} steps of dt={step.dt:.3e} into {self.out_dir}")

        tracker = WeakResidualTracker(test_function_bank(grid, config.operators), forcing, params,
                                      step.coriolis_sign, config.operators)
        self.records = []

        def on_snapshot(index: int, s: State) -> None:
            write_snapshot(self.out_dir / snapshot_name(index), s)
            rec = record(s, forcing, params, step.coriolis_sign, config.operators, tracker.update(s))
            self.records.append(rec.to_row())

        integrator = Integrator(state, forcing, params, step, config.operators)
        try:
            self.final_state = integrator.run(callback=on_snapshot)
        except (NumericalBreakdownError, SolverBreakdownError) as e:
            logger.error(f"❌ Aborting run: {e}")
            return EXIT_NUMERICAL
        finally:
            write_diagnostics(self.out_dir / DIAGNOSTICS, self.records)
        logger.info(f"✅ Run complete: {len(self.records)} snapshots, t = {integrator.state.time:.6g}")
        return EXIT_OK


def run(config: RunConfig, out_dir: Optional[str] = None) -> int:
    return SimulationRunner(config, out_dir).run()


def load_trajectory(directory: str) -> Tuple[RunConfig, Trajectory]:
    """Configuration and snapshots of a finished run directory"""
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.exists():
        raise TrajectoryError(f"{directory} has no {MANIFEST}")
    config = parse_config(manifest.read_text(encoding="utf-8"))
    paths = list_snapshots(directory)
    if not paths:
        raise TrajectoryError(f"{directory} has no snapshots")
    step = config.nondimensional_step()
    times = [snapshot_step(p) * step.dt for p in paths]
    diagnostics = directory / DIAGNOSTICS
    if diagnostics.exists():
        frame = read_diagnostics(diagnostics)
        if "time" in frame.columns and len(frame) == len(paths):
            times = frame["time"].tolist()
    states = [load_snapshot(p, config.grid, t) for p, t in zip(paths, times)]
    trajectory = Trajectory(
        states,
        build_forcing(config, config.grid),
        config.params(),
        step.coriolis_sign,
        config.operators,
    )
    return config, trajectory


def check_trajectory(
    directory: str,
    max_window: Optional[float] = None,
) -> Tuple[int, Dict]:
    """Re-run the energy, A1, A2 and weak-residual checks over a stored run"""
    config, trajectory = load_trajectory(directory)
    params = trajectory.params
    sign = trajectory.coriolis_sign
    ops = trajectory.config

    a1_failures = 0
    worst_cancellation = 0.0
    for s in trajectory.states:
        E, D = energy(s), h1_seminorm_sq(s, ops)
        budget = energy_identity(s, trajectory.forcing, params, sign, ops)
        if not check_A1(budget, E, D, params, sign).satisfied:
            a1_failures += 1
        worst_cancellation = max(worst_cancellation, budget.cancellation / (1.0 + E + D))

    bank = test_function_bank(trajectory.grid, ops)
    pairings = trajectory.pairings(bank)
    times = trajectory.times
    weak = {}
    for i, v in enumerate(bank):
        proj = np.array([pair_with_state(s, v) for s in trajectory.states])
        r = proj - proj[0] - cumulative_trapezoid(pairings[:, i], times, initial=0.0)
        weak[v.name] = float(np.max(np.abs(r)))

    holder = {}
    a2_failures = 0
    if len(times) >= 2:
        windows = default_windows(times, float(times[0]), h_max=max_window)
        for v in bank:
            fit = check_A2(trajectory, v, windows)
            holder[v.name] = None if fit.degenerate else fit.slope
            if not fit.satisfied:
                a2_failures += 1

    a1_stable = _a1_is_stable(trajectory, config.seed)

    passed = a1_failures == 0 and a2_failures == 0 and worst_cancellation <= CANCELLATION_TOLERANCE and a1_stable
    summary = {
        "success": passed,
        "snapshots": len(trajectory.states),
        "a1_failures": a1_failures,
        "a2_failures": a2_failures,
        "a1_stable_under_perturbation": a1_stable,
        "max_cancellation": worst_cancellation,
        "max_weak_residual": max(weak.values()) if weak else 0.0,
        "holder_slopes": holder,
    }
    if passed:
        logger.info(f"✅ Trajectory checks passed for {directory}")
    else:
        logger.warning(f"⚠️ Trajectory checks failed for {directory}: A1 {a1_failures}, A2 {a2_failures}")
    return (EXIT_OK if passed else EXIT_CHECK_FAILED), summary


def _a1_is_stable(trajectory: Trajectory, seed: int, samples: int = 8, size: float = 1e-12) -> bool:
    """A1 verdict on the last snapshot does not flip under tiny random perturbations"""
    rng = np.random.default_rng(seed)
    s = trajectory.states[-1]
    params, sign, ops = trajectory.params, trajectory.coriolis_sign, trajectory.config

    def certificate(state: State):
        budget = energy_identity(state, trajectory.forcing, params, sign, ops)
        return check_A1(budget, energy(state), h1_seminorm_sq(state, ops), params, sign)

    base = certificate(s)
    tolerance = 1e-6 * (1.0 + abs(base.rhs))
    for _ in range(samples):
        noise = {c: size * rng.standard_normal(s.grid.shape) for c in ("u1", "u2", "T", "q")}
        perturbed = State.from_arrays(
            s.grid,
            u1=s.u1.values + noise["u1"],
            u2=s.u2.values + noise["u2"],
            T=s.T.values + noise["T"],
            q=s.q.values + noise["q"],
            p=s.p.values,
            time=s.time,
            p_mid=s.p_mid,
        )
        cert = certificate(perturbed)
        if abs(cert.margin - base.margin) > tolerance:
            return False
        if cert.satisfied != base.satisfied and abs(base.margin) > tolerance:
            return False
    return True
