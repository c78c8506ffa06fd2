"""Closed-form densities, the general pipeline, capacities, and masses.

Frozen reference values come from tests/oracles/compute_reference_values.py
(mpmath, 40 digits).  Each closed form is pinned at two angles; masses are
checked against independent scipy quadrature in the desingularizing
variable s = sqrt(cos(alpha) - cos(phi)).
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from capfield.equilibrium import (
    DensityProfile,
    capacity_south_cap,
    density_general,
    edge_factor,
    nofield_density,
    northpole_density,
    pointcharge_density,
    profile_from_callable,
    profile_from_values,
    quadratic_density,
    total_mass,
)
from capfield.fields import (
    PointChargeField,
    QuadraticField,
    ShiftedField,
    TabulatedField,
    ZeroField,
)
from capfield.geometry import (
    boundary_clustered_grid,
    north_cap,
    south_cap,
    uniform_grid,
)

PI = math.pi

# frozen support angles and Robin constants (see tests/oracles/)
ALPHA0_PC_12 = 0.7270148450291979835692054
FQ_PC_12 = 1.491533425110004003327
ALPHA0_PC_1HALF = 1.071329656580780854469236
FQ_PC_1HALF = 1.945417876306199508307
ALPHA0_NP_1 = 1.1217246238633008265287
ALPHA0_QUAD = 1.905121063815038955604994
FQ_QUAD = 2.375621847562275707877242


def mass_by_quadrature(f, alpha: float) -> float:
    # independent mass integral in the edge variable s
    smax = math.sqrt(1.0 + math.cos(alpha))

    def sigma(s: float) -> float:
        u = min(1.0, max(-1.0, math.cos(alpha) - s * s))
        return f(math.acos(u)) * s

    val, err = quad(sigma, 0.0, smax, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert err < 1e-9
    return 4.0 * PI * val


class TestCapacity:
    def test_hemisphere(self):
        assert capacity_south_cap(PI / 2) == pytest.approx(0.5 + 1.0 / PI, abs=1e-15)

    def test_full_sphere(self):
        assert capacity_south_cap(0.0) == 1.0

    def test_decreasing_in_alpha(self):
        alphas = np.linspace(0.0, 3.0, 40)
        caps = [capacity_south_cap(a) for a in alphas]
        assert all(c1 > c2 for c1, c2 in zip(caps, caps[1:]))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            capacity_south_cap(-0.1)
        with pytest.raises(ValueError):
            capacity_south_cap(3.5)


class TestEdgeFactor:
    def test_full_sphere_is_flat(self):
        assert edge_factor(0.0, 1.3) == pytest.approx(1.0, abs=1e-15)

    def test_blows_up_at_rim(self):
        assert math.isinf(edge_factor(1.0, 1.0))

    def test_decreasing_into_the_cap(self):
        vals = edge_factor(1.0, np.linspace(1.001, PI, 50))
        assert np.all(np.diff(vals) < 0.0)

    def test_domain_error_outside(self):
        with pytest.raises(ValueError):
            edge_factor(1.0, 0.5)


class TestNofieldDensity:
    def test_frozen_values(self):
        assert nofield_density(PI / 3, 2.0) == pytest.approx(
            0.08995746479437276376408, rel=1e-12
        )
        assert nofield_density(PI / 3, PI) == pytest.approx(
            0.08733719259277348798255, rel=1e-12
        )

    def test_full_sphere_uniform(self):
        for phi in (0.0, 1.0, 2.5, PI):
            assert nofield_density(0.0, phi) == pytest.approx(
                1.0 / (4.0 * PI), rel=1e-15
            )

    def test_unit_mass(self):
        for alpha in (PI / 6, PI / 3, PI / 2, 2 * PI / 3):
            m = mass_by_quadrature(lambda p: nofield_density(alpha, p), alpha)
            assert m == pytest.approx(1.0, abs=1e-8)

    def test_infinite_at_rim_and_error_outside(self):
        assert math.isinf(nofield_density(1.0, 1.0))
        with pytest.raises(ValueError):
            nofield_density(1.0, 0.9)

    def test_vectorized(self):
        phis = np.array([1.5, 2.0, 3.0])
        vals = nofield_density(1.0, phis)
        assert vals.shape == (3,)
        assert vals[0] > vals[1] > vals[2]


class TestPointChargeDensity:
    def test_frozen_values_outside_charge(self):
        f, fq = pointcharge_density(1.0, 2.0, ALPHA0_PC_12, 2.0)
        assert fq == pytest.approx(FQ_PC_12, rel=1e-12)
        assert f == pytest.approx(0.1042004241410041774847, rel=1e-12)
        f_pi, _ = pointcharge_density(1.0, 2.0, ALPHA0_PC_12, PI)
        assert f_pi == pytest.approx(0.1094956483080645889806, rel=1e-12)

    def test_frozen_values_inside_charge(self):
        f, fq = pointcharge_density(1.0, 0.5, ALPHA0_PC_1HALF, 2.0)
        assert fq == pytest.approx(FQ_PC_1HALF, rel=1e-12)
        assert f == pytest.approx(0.1226749744444645462227, rel=1e-12)

    def test_unit_mass(self):
        m = mass_by_quadrature(
            lambda p: pointcharge_density(1.0, 2.0, ALPHA0_PC_12, p)[0], ALPHA0_PC_12
        )
        assert m == pytest.approx(1.0, abs=1e-8)

    def test_nonnegative_on_support(self):
        phis = np.linspace(ALPHA0_PC_12 + 1e-6, PI, 500)
        f, _ = pointcharge_density(1.0, 2.0, ALPHA0_PC_12, phis)
        assert np.min(f) > 0.0

    def test_domain_and_parameter_errors(self):
        with pytest.raises(ValueError):
            pointcharge_density(1.0, 2.0, ALPHA0_PC_12, ALPHA0_PC_12)
        with pytest.raises(ValueError):
            pointcharge_density(1.0, 2.0, ALPHA0_PC_12, 0.3)
        with pytest.raises(ValueError):
            pointcharge_density(1.0, 1.0, 1.0, 2.0)  # charge on the sphere
        with pytest.raises(ValueError):
            pointcharge_density(-1.0, 2.0, 1.0, 2.0)


class TestNorthPoleDensity:
    def test_frozen_values(self):
        assert northpole_density(1.0, ALPHA0_NP_1, 2.0) == pytest.approx(
            0.1232170264597183753232, rel=1e-12
        )
        assert northpole_density(1.0, ALPHA0_NP_1, PI) == pytest.approx(
            0.1307413264392488944952, rel=1e-12
        )

    def test_unit_mass(self):
        m = mass_by_quadrature(
            lambda p: northpole_density(1.0, ALPHA0_NP_1, p), ALPHA0_NP_1
        )
        assert m == pytest.approx(1.0, abs=1e-8)

    def test_matches_near_unit_height_point_charge(self):
        # the density of a charge at h = 1 +/- eps converges to the
        # on-sphere closed form
        for h in (1.0 + 1e-9, 1.0 - 1e-9):
            f, _ = pointcharge_density(1.0, h, ALPHA0_NP_1, 2.2)
            assert f == pytest.approx(
                northpole_density(1.0, ALPHA0_NP_1, 2.2), rel=1e-6
            )


class TestQuadraticDensity:
    def test_frozen_values(self):
        f, fq = quadratic_density(1.0, 2.5, 2.0, ALPHA0_QUAD, 3.0)
        assert fq == pytest.approx(FQ_QUAD, rel=1e-12)
        assert f == pytest.approx(0.2801667301400183547967, rel=1e-12)
        f2, _ = quadratic_density(1.0, 2.5, 2.0, ALPHA0_QUAD, 2.2)
        assert f2 == pytest.approx(0.245563136437323126397, rel=1e-12)

    def test_unit_mass(self):
        m = mass_by_quadrature(
            lambda p: quadratic_density(1.0, 2.5, 2.0, ALPHA0_QUAD, p)[0], ALPHA0_QUAD
        )
        assert m == pytest.approx(1.0, abs=1e-8)

    def test_rejects_inadmissible_coefficients(self):
        with pytest.raises(ValueError):
            quadratic_density(1.0, 1.5, 2.0, 2.0, 2.5)


class TestDensityGeneral:
    def test_zero_field_reduces_to_nofield(self):
        alpha = PI / 3
        cap = south_cap(alpha)
        grid = boundary_clustered_grid(cap, 24)
        prof = density_general(ZeroField(), cap, grid)
        expected = nofield_density(alpha, grid.nodes)
        assert np.max(np.abs(prof.values - expected)) < 1e-10
        assert prof.robin_constant == pytest.approx(
            1.0 / capacity_south_cap(alpha), rel=1e-12
        )
        assert prof.negative_nodes == ()

    def test_constant_field_shifts_robin_only(self):
        # adding a constant to the field must leave the density unchanged
        # and shift the Robin constant by exactly that constant
        alpha = PI / 3
        cap = south_cap(alpha)
        grid = boundary_clustered_grid(cap, 16)
        prof = density_general(ShiftedField(ZeroField(), 1.0), cap, grid)
        expected = nofield_density(alpha, grid.nodes)
        assert np.max(np.abs(prof.values - expected)) < 1e-7
        assert prof.robin_constant == pytest.approx(
            1.0 / capacity_south_cap(alpha) + 1.0, abs=1e-8
        )

    def test_point_charge_matches_closed_form(self):
        cap = south_cap(ALPHA0_PC_12)
        grid = boundary_clustered_grid(cap, 16)
        prof = density_general(PointChargeField(1.0, 2.0), cap, grid)
        expected, fq = pointcharge_density(1.0, 2.0, ALPHA0_PC_12, grid.nodes)
        assert np.max(np.abs(prof.values - expected)) < 1e-5
        assert prof.robin_constant == pytest.approx(fq, abs=1e-6)
        assert prof.mass == pytest.approx(1.0, abs=1e-6)

    def test_tabulated_point_charge_matches_closed_form(self):
        x = np.linspace(-1.0, 1.0, 801)
        field = TabulatedField(x, PointChargeField(1.0, 2.0).value_at_x3(x))
        cap = south_cap(ALPHA0_PC_12)
        grid = boundary_clustered_grid(cap, 12)
        prof = density_general(field, cap, grid)
        expected, _ = pointcharge_density(1.0, 2.0, ALPHA0_PC_12, grid.nodes)
        assert np.max(np.abs(prof.values - expected)) < 1e-4

    def test_full_sphere_zero_field(self):
        cap = south_cap(0.0)
        grid = uniform_grid(0.0, PI, 20)
        prof = density_general(ZeroField(), cap, grid)
        assert np.max(np.abs(prof.values - 1.0 / (4.0 * PI))) < 1e-10
        assert prof.robin_constant == pytest.approx(1.0, abs=1e-12)

    def test_north_cap_mirrors_south(self):
        # zero field on a north cap of rim 2pi/3 mirrors the south cap of
        # rim pi/3
        cap = north_cap(2 * PI / 3)
        grid = boundary_clustered_grid(cap, 16)
        prof = density_general(ZeroField(), cap, grid)
        expected = nofield_density(PI / 3, PI - grid.nodes)
        assert np.max(np.abs(prof.values - expected)) < 1e-10

    def test_rejects_grid_outside_cap(self):
        cap = south_cap(1.0)
        bad = uniform_grid(0.5, 2.0, 8)
        with pytest.raises(ValueError):
            density_general(ZeroField(), cap, bad)

    def test_rejects_grid_in_guard_band(self):
        cap = south_cap(1.0)
        nodes = np.array([1.0 + 1e-8, 2.0, 3.0])
        from capfield.geometry import PhiGrid, SpacingPolicy

        grid = PhiGrid(nodes, SpacingPolicy.UNIFORM)
        with pytest.raises(ValueError):
            density_general(ZeroField(), cap, grid)


class TestProfilesAndMass:
    def test_closed_form_profile_mass(self):
        cap = south_cap(ALPHA0_PC_12)
        grid = boundary_clustered_grid(cap, 48)
        prof = profile_from_callable(
            cap,
            grid,
            lambda p: pointcharge_density(1.0, 2.0, ALPHA0_PC_12, p)[0],
            FQ_PC_12,
        )
        assert total_mass(prof) == pytest.approx(1.0, abs=1e-8)

    def test_node_only_profile_mass(self):
        cap = south_cap(PI / 3)
        grid = boundary_clustered_grid(cap, 64)
        values = nofield_density(PI / 3, grid.nodes)
        prof = profile_from_values(cap, grid, values, 1.0 / capacity_south_cap(PI / 3))
        assert total_mass(prof) == pytest.approx(1.0, abs=1e-5)

    def test_scaling_scales_mass(self):
        cap = south_cap(PI / 3)
        grid = boundary_clustered_grid(cap, 64)
        values = nofield_density(PI / 3, grid.nodes)
        prof = profile_from_values(cap, grid, 2.0 * values, 0.0)
        assert total_mass(prof) == pytest.approx(2.0, abs=2e-5)

    def test_negative_values_flagged_not_clamped(self):
        cap = south_cap(1.0)
        grid = uniform_grid(1.1, 3.0, 5)
        values = np.array([0.1, 0.2, -0.05, 0.2, 0.1])
        prof = profile_from_values(cap, grid, values, 1.0)
        assert prof.negative_nodes == (2,)
        assert prof.values[2] == -0.05

    def test_mismatched_lengths_rejected(self):
        cap = south_cap(1.0)
        grid = uniform_grid(1.1, 3.0, 5)
        with pytest.raises(ValueError):
            profile_from_values(cap, grid, np.ones(4), 1.0)

    def test_north_profile_mass(self):
        cap = north_cap(2 * PI / 3)
        grid = boundary_clustered_grid(cap, 48)
        prof = profile_from_callable(
            cap,
            grid,
            lambda p: nofield_density(PI / 3, PI - np.asarray(p)),
            1.0 / capacity_south_cap(PI / 3),
        )
        assert total_mass(prof) == pytest.approx(1.0, abs=1e-7)
