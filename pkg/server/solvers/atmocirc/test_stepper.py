"""
Tests for the IMEX stepper and the run integrator
"""

import logging
import math

import numpy as np
import pytest

from server.solvers.atmocirc.conftest import heat_decay_states, random_state
from server.solvers.atmocirc.errors import NumericalBreakdownError, ParameterError
from server.solvers.atmocirc.fields import State, energy
from server.solvers.atmocirc.grid import Grid
from server.solvers.atmocirc.operators import laplacian
from server.solvers.atmocirc.pressure import divergence_inf
from server.solvers.atmocirc.stepper import (
    Forcing,
    Integrator,
    StepConfig,
    cfl_number,
    implicit_solve,
    rhs_explicit,
    step,
)


class TestStepConfig:
    def test_defaults(self):
        c = StepConfig(dt=0.1, t_end=1.0)
        assert c.theta == 0.5
        assert c.n_steps == 10
        assert StepConfig(dt=0.1, t_end=1.0, diffusion_scheme="backward_euler").theta == 1.0

    def test_partial_last_step_rounds_up(self):
        assert StepConfig(dt=0.3, t_end=1.0).n_steps == 4
        assert StepConfig(dt=0.3, t_end=0.0).n_steps == 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt": 0.0, "t_end": 1.0},
            {"dt": -1.0, "t_end": 1.0},
            {"dt": float("inf"), "t_end": 1.0},
            {"dt": 0.1, "t_end": -1.0},
            {"dt": 0.1, "t_end": 1.0, "snapshot_interval": 0},
            {"dt": 0.1, "t_end": 1.0, "diffusion_scheme": "rk4"},
            {"dt": 0.1, "t_end": 1.0, "explicit_scheme": "ab3"},
            {"dt": 0.1, "t_end": 1.0, "coriolis_sign": "negative"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            StepConfig(**kwargs)


class TestForcing:
    def test_constant_and_zero(self, grid):
        f = Forcing.constant(grid, 0.1, 0.2)
        terms = f.at(0.0)
        assert np.all(terms["T"] == 0.1) and np.all(terms["q"] == 0.2)
        assert np.all(terms["u1"] == 0.0)
        assert np.all(Forcing.zeros(grid).at(3.0)["T"] == 0.0)

    def test_source_callback_adds_terms(self, grid):
        f = Forcing.constant(grid, 1.0, 0.0)
        f.source = lambda t: {"T": np.full(grid.shape, t), "u2": np.full(grid.shape, 2.0)}
        terms = f.at(0.5)
        assert np.all(terms["T"] == 1.5)
        assert np.all(terms["u2"] == 2.0)
        assert np.all(terms["q"] == 0.0)


class TestRhsExplicit:
    def test_wall_rows_zero(self, grid, params, rng):
        out = rhs_explicit(random_state(grid, rng), Forcing.constant(grid, 1.0, 1.0), params)
        for values in out.values():
            assert np.all(values[:, 0] == 0.0) and np.all(values[:, -1] == 0.0)

    def test_linear_terms(self, grid, params):
        X1, X2 = grid.mesh()
        shape = np.sin(np.pi * X2) * np.ones_like(X1)
        s = State.from_arrays(grid, u2=0.0 * shape, T=shape, q=2.0 * shape)
        out = rhs_explicit(s, Forcing.constant(grid, 0.5, 0.25), params)
        expected_u2 = params.Pr * (params.R - 2.0 * params.R_tilde) * shape
        assert np.allclose(out["u2"][:, 1:-1], expected_u2[:, 1:-1])
        assert np.allclose(out["T"][:, 1:-1], 0.5)
        assert np.allclose(out["q"][:, 1:-1], 0.25)

    def test_coriolis_sign(self, grid, params):
        _, X2 = grid.mesh()
        s = State.from_arrays(grid, u1=1e-8 * np.sin(np.pi * X2))
        paper = rhs_explicit(s, Forcing.zeros(grid), params, "paper")
        rotation = rhs_explicit(s, Forcing.zeros(grid), params, "antisymmetric")
        assert np.allclose(paper["u2"], -rotation["u2"], atol=1e-20)
        assert np.allclose(paper["u1"], rotation["u1"], atol=1e-20)


class TestImplicitSolve:
    def test_inverts_helmholtz_operator(self, grid, rng):
        rhs = rng.standard_normal(grid.shape)
        c = 0.05
        f = implicit_solve(grid, rhs, c)
        applied = f - c * laplacian(grid, f)
        assert np.allclose(applied[:, 1:-1], rhs[:, 1:-1], atol=1e-10)
        assert np.all(f[:, 0] == 0.0) and np.all(f[:, -1] == 0.0)

    def test_zero_coefficient_copies_interior(self, grid, rng):
        rhs = rng.standard_normal(grid.shape)
        f = implicit_solve(grid, rhs, 0.0)
        assert np.array_equal(f[:, 1:-1], rhs[:, 1:-1])
        assert np.all(f[:, 0] == 0.0)


class TestStep:
    def test_heat_decay_matches_exact_solution(self, heat_params):
        grid = Grid(16, 33)
        states = heat_decay_states(grid, 1e-4, 0.1)
        final = states[-1]
        _, X2 = grid.mesh()
        exact = math.exp(-math.pi**2 * final.time) * np.sin(np.pi * X2)
        assert final.time == pytest.approx(0.1)
        assert np.max(np.abs(final.T.values - exact)) <= 1e-3
        assert np.all(final.u1.values == 0.0) and np.all(final.q.values == 0.0)

    def test_energy_non_increasing_backward_euler(self, grid, heat_params, rng):
        s = random_state(grid, rng)
        s = State.from_arrays(grid, T=s.T.values, q=s.q.values)
        integrator = Integrator(s, Forcing.zeros(grid), heat_params,
                                StepConfig(dt=0.01, t_end=0.2, diffusion_scheme="backward_euler"))
        energies = []
        integrator.run(callback=lambda i, st: energies.append(energy(st)))
        assert len(energies) == 21
        assert all(b <= a for a, b in zip(energies, energies[1:]))

    def test_velocity_energy_non_increasing(self, grid, heat_params, rng):
        s = random_state(grid, rng, amplitude=1e-3)
        s = State.from_arrays(grid, u1=s.u1.values, u2=s.u2.values)
        integrator = Integrator(s, Forcing.zeros(grid), heat_params,
                                StepConfig(dt=1e-3, t_end=0.05, diffusion_scheme="backward_euler"))
        energies = []
        integrator.run(callback=lambda i, st: energies.append(energy(st)))
        assert all(b <= a for a, b in zip(energies, energies[1:]))

    def test_divergence_and_walls_after_every_step(self, grid, params, rng):
        s = random_state(grid, rng, amplitude=0.1)
        integrator = Integrator(s, Forcing.constant(grid, 0.1, 0.1), params, StepConfig(dt=1e-3, t_end=0.02))

        def check(i, st):
            assert divergence_inf(grid, st.u1.values, st.u2.values) <= 1e-8
            for name in ("u1", "u2", "T", "q"):
                values = getattr(st, name).values
                assert np.all(values[:, 0] == 0.0) and np.all(values[:, -1] == 0.0)

        integrator.run(callback=check)
        assert integrator.steps_taken == 20

    def test_repeat_runs_are_bit_identical(self, grid, params, rng):
        s = random_state(grid, rng, amplitude=0.1)
        config = StepConfig(dt=1e-3, t_end=0.01)
        a = Integrator(s.copy(), Forcing.constant(grid, 0.1, 0.1), params, config).run()
        b = Integrator(s.copy(), Forcing.constant(grid, 0.1, 0.1), params, config).run()
        for name in ("u1", "u2", "T", "q", "p"):
            assert np.array_equal(getattr(a, name).values, getattr(b, name).values)

    def test_returns_tendency_for_next_step(self, grid, params, rng):
        s = random_state(grid, rng, amplitude=0.1)
        f = Forcing.zeros(grid)
        result = step(s, f, params, StepConfig(dt=1e-3, t_end=1.0))
        expected = rhs_explicit(s, f, params)
        for name, values in expected.items():
            assert np.array_equal(result.tendency[name], values)
        assert result.state.time == pytest.approx(1e-3)
        assert result.state.grid == grid

    def test_pressure_has_zero_mean(self, grid, params, rng):
        s = random_state(grid, rng, amplitude=0.1)
        new = step(s, Forcing.zeros(grid), params, StepConfig(dt=1e-3, t_end=1.0)).state
        assert grid.integrate(new.p.values) == pytest.approx(0.0, abs=1e-10)

    def test_cfl_warning(self, grid, heat_params, caplog):
        _, X2 = grid.mesh()
        s = State.from_arrays(grid, u1=np.sin(np.pi * X2) * np.ones(grid.shape))
        c = StepConfig(dt=1.0, t_end=1.0, cfl_limit=0.5)
        assert cfl_number(s, 1.0) > 0.5
        with caplog.at_level(logging.WARNING, logger="server.solvers.atmocirc.stepper"):
            step(s, Forcing.zeros(grid), heat_params, c)
        assert "CFL" in caplog.text

    def test_non_finite_values_abort(self, grid, heat_params):
        f = Forcing.zeros(grid)
        f.source = lambda t: {"T": np.full(grid.shape, np.inf)}
        integrator = Integrator(State.zeros(grid), f, heat_params, StepConfig(dt=1e-3, t_end=1.0))
        with pytest.raises(NumericalBreakdownError) as exc:
            integrator.advance()
        assert exc.value.step == 1
        assert "T" in exc.value.fields
        assert "step 1" in str(exc.value)


class TestIntegrator:
    def test_callback_schedule(self, grid, heat_params):
        seen = []
        config = StepConfig(dt=0.01, t_end=0.05, snapshot_interval=2)
        Integrator(State.zeros(grid), Forcing.zeros(grid), heat_params, config).run(
            callback=lambda i, s: seen.append(i)
        )
        assert seen == [0, 2, 4, 5]

    def test_advance_many(self, grid, heat_params):
        integrator = Integrator(State.zeros(grid), Forcing.zeros(grid), heat_params, StepConfig(dt=0.01, t_end=1.0))
        state = integrator.advance(3)
        assert integrator.steps_taken == 3
        assert state.time == pytest.approx(0.03)

    def test_zero_state_stays_zero(self, grid, params):
        final = Integrator(State.zeros(grid), Forcing.zeros(grid), params, StepConfig(dt=0.01, t_end=0.1)).run()
        assert energy(final) == 0.0
        assert np.all(final.p.values == 0.0)
