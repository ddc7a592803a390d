"""
CSV persistence for snapshots, forcing files and diagnostics
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import GridMismatchError
from .fields import ScalarField, State
from .grid import Grid
from .pressure import nodes_to_midpoints

logger = logging.getLogger(__name__)

SNAPSHOT_COLUMNS = ["x1", "x2", "u1", "u2", "T", "q", "p"]
FORCING_COLUMNS = ["x1", "x2", "Q", "G"]
FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def snapshot_name(step: int) -> str:
    return f"snap_{step:06d}.csv"


def snapshot_step(path: PathLike) -> int:
    return int(Path(path).stem.split("_", 1)[1])


def _flatten(values: np.ndarray) -> np.ndarray:
    # j outer, i inner
    return values.ravel(order="F")


def _unflatten(column: pd.Series, grid: Grid) -> np.ndarray:
    return column.to_numpy(dtype=float).reshape(grid.shape, order="F")


def _frame(grid: Grid, columns: dict) -> pd.DataFrame:
    X1, X2 = grid.mesh()
    data = {"x1": _flatten(X1), "x2": _flatten(X2)}
    data.update({name: _flatten(values) for name, values in columns.items()})
    return pd.DataFrame(data)


def _write(frame: pd.DataFrame, path: PathLike) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _read(path: PathLike, expected: List[str]) -> Tuple[pd.DataFrame, Grid]:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != expected:
        raise GridMismatchError(f"{path}: expected columns {expected}, got {list(frame.columns)}")
    x2 = frame["x2"].to_numpy()
    n1 = int(np.count_nonzero(x2 == x2[0]))
    if n1 == 0 or len(frame) % n1:
        raise GridMismatchError(f"{path}: {len(frame)} rows do not form a grid")
    return frame, Grid(n1, len(frame) // n1)


def write_snapshot(path: PathLike, state: State) -> None:
    _write(_frame(state.grid, {c: getattr(state, c).values for c in SNAPSHOT_COLUMNS[2:]}), path)


def load_snapshot(path: PathLike, grid: Optional[Grid] = None, time: float = 0.0) -> State:
    """State stored in a snapshot CSV

    Only node pressure is stored, so p_mid is rebuilt by averaging
    neighbouring nodes. A run restarted from a snapshot also starts its
    explicit terms with an Euler step, so it agrees with the uninterrupted
    run to truncation error rather than bit for bit.
    """
    frame, found = _read(path, SNAPSHOT_COLUMNS)
    if grid is not None and found != grid:
        raise GridMismatchError(f"{path}: snapshot grid {found.n1}x{found.n2} does not match {grid.n1}x{grid.n2}")
    values = {c: _unflatten(frame[c], found) for c in SNAPSHOT_COLUMNS[2:]}
    return State(
        u1=ScalarField(found, values["u1"]),
        u2=ScalarField(found, values["u2"]),
        T=ScalarField(found, values["T"]),
        q=ScalarField(found, values["q"]),
        p=ScalarField(found, values["p"], dirichlet_zero=False),
        time=time,
        p_mid=nodes_to_midpoints(found, values["p"]),
    )


def write_forcing(path: PathLike, grid: Grid, Q: np.ndarray, G: np.ndarray) -> None:
    _write(_frame(grid, {"Q": Q, "G": G}), path)


def load_forcing(path: PathLike, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    frame, found = _read(path, FORCING_COLUMNS)
    if found != grid:
        raise GridMismatchError(f"{path}: forcing grid {found.n1}x{found.n2} does not match {grid.n1}x{grid.n2}")
    return _unflatten(frame["Q"], grid), _unflatten(frame["G"], grid)


def write_diagnostics(path: PathLike, rows: Iterable[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    _write(frame, path)
    return frame


def read_diagnostics(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def list_snapshots(directory: PathLike) -> List[Path]:
    return sorted(Path(directory).glob("snap_*.csv"), key=snapshot_step)
