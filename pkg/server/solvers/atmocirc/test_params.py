"""
Tests for the physical/dimensionless parameter scalings
"""

from dataclasses import replace

import numpy as np
import pytest

from server.solvers.atmocirc.errors import ParameterError
from server.solvers.atmocirc.fields import State
from server.solvers.atmocirc.grid import Grid
from server.solvers.atmocirc.params import (
    DimensionlessParams,
    PhysicalParams,
    nondimensionalize,
    scale_forcing,
    scale_length,
    scale_time,
    scale_velocity,
    to_dimensional,
)


def physical(**overrides) -> PhysicalParams:
    base = dict(
        nu=1e-2,
        kappa_T=1e-2,
        kappa_q=5e-3,
        alpha_T=1e-3,
        alpha_q=2e-3,
        g=10.0,
        h=1.0,
        Omega=0.0,
        sigma0=0.0,
        sigma1=0.0,
        T_bottom=10.0,
        T_top=0.0,
        q_bottom=1.0,
        q_top=0.0,
    )
    base.update(overrides)
    return PhysicalParams(**base)


def unit_physical(**overrides) -> PhysicalParams:
    base = dict(nu=1.0, kappa_T=1.0, kappa_q=1.0, alpha_T=1.0, alpha_q=1.0, g=1.0, h=1.0, Omega=1.0,
                sigma0=1.0, sigma1=1.0, T_bottom=1.0, T_top=0.0, q_bottom=1.0, q_top=0.0)
    base.update(overrides)
    return PhysicalParams(**base)


class TestNondimensionalize:
    def test_prandtl_from_equal_diffusivities(self):
        assert nondimensionalize(physical()).Pr == 1.0

    def test_rayleigh_example(self):
        d = nondimensionalize(physical())
        assert d.R == pytest.approx(1000.0, rel=1e-14)
        assert d.Le == pytest.approx(0.5, rel=1e-14)

    def test_no_rotation_or_friction_gives_zero_sigma(self):
        d = nondimensionalize(physical())
        assert np.array_equal(d.sigma_matrix(), np.zeros((2, 2)))

    def test_doubling_omega_doubles_omega_prime(self):
        a = nondimensionalize(physical(Omega=0.3))
        b = nondimensionalize(physical(Omega=0.6))
        assert b.omega == pytest.approx(2.0 * a.omega, rel=1e-14)

    def test_doubling_depth(self):
        a = nondimensionalize(physical(Omega=0.3))
        b = nondimensionalize(physical(Omega=0.3, h=2.0))
        assert b.R == pytest.approx(8.0 * a.R, rel=1e-14)
        assert b.omega == pytest.approx(4.0 * a.omega, rel=1e-14)

    def test_swapping_wall_temperatures(self):
        a = nondimensionalize(physical(Omega=0.3))
        b = nondimensionalize(physical(Omega=0.3, T_bottom=0.0, T_top=10.0))
        assert b.R == -a.R
        assert (b.Pr, b.Le, b.omega) == (a.Pr, a.Le, a.omega)

    def test_random_inputs_stay_finite(self, rng):
        for _ in range(20):
            values = rng.uniform(0.1, 10.0, size=9)
            p = physical(nu=values[0], kappa_T=values[1], kappa_q=values[2], alpha_T=values[3],
                         g=values[4], h=values[5], Omega=values[6], sigma0=values[7], sigma1=values[8])
            d = nondimensionalize(p)
            assert all(np.isfinite(v) for v in d.to_dict().values())

    @pytest.mark.parametrize("name", ["nu", "kappa_T", "h"])
    def test_non_positive_divisor_names_the_field(self, name):
        with pytest.raises(ParameterError) as exc:
            nondimensionalize(physical(**{name: 0.0}))
        assert exc.value.field == name

    def test_non_finite_input_rejected(self):
        with pytest.raises(ParameterError) as exc:
            nondimensionalize(physical(g=float("nan")))
        assert exc.value.field == "g"

    def test_equal_wall_temperatures_rejected(self):
        with pytest.raises(ParameterError):
            nondimensionalize(physical(T_top=10.0))


class TestScalings:
    def test_scale_time_unit_scales(self):
        assert scale_time(unit_physical(), 5.0) == 5.0
        assert scale_time(unit_physical(), 0.0) == 0.0

    def test_scale_time_example(self):
        assert scale_time(unit_physical(h=2.0, kappa_T=0.5), 8.0) == 1.0

    def test_scale_forcing_examples(self):
        assert scale_forcing(unit_physical(), 0.0, 0.0) == (0.0, 0.0)
        assert scale_forcing(unit_physical(), 1.5, 2.5) == (1.5, 2.5)
        Q, G = scale_forcing(unit_physical(h=2.0, kappa_T=0.5, T_bottom=4.0), 1.0, 1.0)
        assert Q == 2.0
        assert G == 2.0

    def test_symmetric_humidity_scaling_uses_humidity_difference(self):
        p = unit_physical(T_bottom=4.0, q_bottom=2.0)
        Q, G = scale_forcing(p, 1.0, 1.0, "symmetric")
        assert Q == 0.25
        assert G == 0.5

    def test_symmetric_scaling_needs_humidity_difference(self):
        with pytest.raises(ParameterError):
            scale_forcing(unit_physical(q_bottom=0.0), 1.0, 1.0, "symmetric")

    def test_velocity_and_length(self):
        p = unit_physical(h=2.0, kappa_T=0.5)
        assert scale_velocity(p, 1.0) == 4.0
        assert scale_length(p, 3.0) == 1.5

    def test_scalings_accept_arrays(self):
        out = scale_time(unit_physical(h=2.0), np.array([4.0, 8.0]))
        assert np.array_equal(out, [1.0, 2.0])


class TestDimensionlessParams:
    def test_non_positive_prandtl_rejected(self):
        with pytest.raises(ParameterError):
            DimensionlessParams(Pr=0.0, Le=1.0, R=1.0, R_tilde=1.0, sigma0p=0.0, sigma1p=0.0, omega=0.0)

    def test_sigma_matrix_signs(self, params):
        paper = params.sigma_matrix("paper")
        rotation = params.sigma_matrix("antisymmetric")
        assert paper[1, 0] == params.omega
        assert rotation[1, 0] == -params.omega
        assert paper[0, 1] == rotation[0, 1] == params.omega

    def test_sigma_norm_is_spectral_norm(self):
        d = DimensionlessParams(Pr=1.0, Le=1.0, R=0.0, R_tilde=0.0, sigma0p=3.0, sigma1p=1.0, omega=0.0)
        assert d.sigma_norm() == pytest.approx(3.0)

    def test_diffusivities(self, params):
        assert params.diffusivities() == {"u1": params.Pr, "u2": params.Pr, "T": 1.0, "q": params.Le}

    def test_frozen(self, params):
        with pytest.raises(Exception):
            params.Pr = 2.0
        assert replace(params, Pr=2.0).Pr == 2.0


class TestToDimensional:
    def test_zero_state_is_conduction_profile(self):
        p = physical(h=2.0)
        grid = Grid(4, 5)
        out = to_dimensional(p, State.zeros(grid, time=1.0))
        _, X2 = grid.mesh()
        assert np.allclose(out["T"], 10.0 - 10.0 * X2)
        assert np.allclose(out["q"], 1.0 - X2)
        assert np.array_equal(out["u1"], np.zeros(grid.shape))
        assert out["t"] == pytest.approx(4.0 / 1e-2)
        assert out["x2"][0, -1] == pytest.approx(2.0)

    def test_velocity_scale_inverts_scale_velocity(self):
        p = physical(h=2.0)
        grid = Grid(4, 5)
        state = State.from_arrays(grid, u1=np.full(grid.shape, 3.0))
        out = to_dimensional(p, state)
        assert scale_velocity(p, out["u1"][0, 2]) == pytest.approx(3.0)
