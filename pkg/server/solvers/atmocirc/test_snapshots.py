"""
Tests for snapshot, forcing and diagnostics CSV files
"""

import numpy as np
import pytest

from server.solvers.atmocirc.conftest import random_state
from server.solvers.atmocirc.errors import GridMismatchError
from server.solvers.atmocirc.grid import Grid
from server.solvers.atmocirc.pressure import nodes_to_midpoints
from server.solvers.atmocirc.snapshots import (
    list_snapshots,
    load_forcing,
    load_snapshot,
    read_diagnostics,
    snapshot_name,
    snapshot_step,
    write_diagnostics,
    write_forcing,
    write_snapshot,
)


class TestNames:
    def test_snapshot_name(self):
        assert snapshot_name(12) == "snap_000012.csv"
        assert snapshot_step("out/snap_000012.csv") == 12

    def test_list_snapshots_sorted_by_step(self, tmp_path):
        for step in (100, 2, 10):
            (tmp_path / snapshot_name(step)).write_text("")
        (tmp_path / "diagnostics.csv").write_text("")
        assert [snapshot_step(p) for p in list_snapshots(tmp_path)] == [2, 10, 100]


class TestSnapshot:
    def test_reload_is_bit_identical(self, tmp_path, grid, rng):
        s = random_state(grid, rng)
        s.p.values[:] = rng.standard_normal(grid.shape)
        path = tmp_path / snapshot_name(0)
        write_snapshot(path, s)
        loaded = load_snapshot(path, grid, time=0.25)
        assert loaded.time == 0.25
        for name in ("u1", "u2", "T", "q", "p"):
            assert np.array_equal(getattr(loaded, name).values, getattr(s, name).values)

    def test_rewrite_gives_same_bytes(self, tmp_path, grid, rng):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        write_snapshot(first, random_state(grid, rng))
        write_snapshot(second, load_snapshot(first))
        assert first.read_bytes() == second.read_bytes()

    def test_layout(self, tmp_path, rng):
        grid = Grid(4, 3)
        path = tmp_path / "s.csv"
        write_snapshot(path, random_state(grid, rng))
        lines = path.read_text().splitlines()
        assert lines[0] == "x1,x2,u1,u2,T,q,p"
        assert len(lines) == 1 + 12
        # x1 varies fastest
        x1, x2 = (float(v) for v in lines[2].split(",")[:2])
        assert x1 == pytest.approx(grid.dx1)
        assert x2 == 0.0
        assert float(lines[5].split(",")[1]) == pytest.approx(0.5)

    def test_grid_is_inferred(self, tmp_path, rng):
        grid = Grid(8, 5)
        path = tmp_path / "s.csv"
        write_snapshot(path, random_state(grid, rng))
        loaded = load_snapshot(path)
        assert loaded.grid == grid
        assert loaded.p_mid.shape == (8, 4)

    def test_midpoint_pressure_rebuilt_from_nodes(self, tmp_path, grid, rng):
        s = random_state(grid, rng)
        s.p.values[:] = rng.standard_normal(grid.shape)
        s.p_mid[:] = rng.standard_normal(s.p_mid.shape)
        path = tmp_path / "s.csv"
        write_snapshot(path, s)
        loaded = load_snapshot(path, grid)
        assert np.array_equal(loaded.p_mid, nodes_to_midpoints(grid, s.p.values))
        assert not np.array_equal(loaded.p_mid, s.p_mid)

    def test_grid_mismatch(self, tmp_path, grid, rng):
        path = tmp_path / "s.csv"
        write_snapshot(path, random_state(grid, rng))
        with pytest.raises(GridMismatchError):
            load_snapshot(path, Grid(8, 17))

    def test_wrong_columns(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x1,x2,u\n0,0,1\n")
        with pytest.raises(GridMismatchError):
            load_snapshot(path)


class TestForcingFile:
    def test_round_trip(self, tmp_path, grid, rng):
        Q = rng.standard_normal(grid.shape)
        G = rng.standard_normal(grid.shape)
        path = tmp_path / "forcing.csv"
        write_forcing(path, grid, Q, G)
        Q2, G2 = load_forcing(path, grid)
        assert np.array_equal(Q, Q2)
        assert np.array_equal(G, G2)

    def test_grid_mismatch(self, tmp_path, grid):
        path = tmp_path / "forcing.csv"
        write_forcing(path, grid, grid.zeros(), grid.zeros())
        with pytest.raises(GridMismatchError):
            load_forcing(path, Grid(16, 9))


class TestDiagnosticsFile:
    def test_round_trip(self, tmp_path):
        rows = [{"time": 0.0, "E": 1.0 / 3.0}, {"time": 0.1, "E": 0.25}]
        path = tmp_path / "diagnostics.csv"
        write_diagnostics(path, rows)
        frame = read_diagnostics(path)
        assert list(frame.columns) == ["time", "E"]
        assert frame["E"].iloc[0] == 1.0 / 3.0
