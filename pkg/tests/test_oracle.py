"""Tests for the independent equilibrium solvers.

Closed-form reference values reproduced by tests/oracles/compute_reference_values.py.
"""

import math

import numpy as np
import pytest

from capfield.equilibrium import (
    nofield_density,
    pointcharge_density,
    quadratic_density,
)
from capfield.fields import PointChargeField, QuadraticField, ZeroField
from capfield.geometry import north_cap, south_cap
from capfield.oracle import (
    DiscreteMeasure,
    discrete_energy_minimize,
    nystrom_solve,
    ring_energy_system,
)
from capfield.singular_quadrature import NonconvergenceError

PI = math.pi

ALPHA0_PC_12 = 0.7270148450291979835692054
FQ_PC_12 = 1.491533425110004003327
ALPHA0_QUAD = 1.905121063815038955604994
FQ_QUAD = 2.375621847562275707877242


class TestDiscreteMeasure:
    def test_roundtrip(self):
        m = DiscreteMeasure((0.5, 1.5, 2.5), (0.2, 0.3, 0.5), (0.1, 0.1, 0.1))
        assert m.ring_angles == (0.5, 1.5, 2.5)
        assert math.isclose(sum(m.weights), 1.0, abs_tol=1e-15)

    def test_accepts_arrays(self):
        m = DiscreteMeasure(np.array([0.1, 2.0]), np.array([0.5, 0.5]), np.array([0.05, 0.05]))
        assert isinstance(m.weights, tuple)

    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            DiscreteMeasure((0.5, 1.5), (1.2, -0.2), (0.1, 0.1))

    def test_rejects_bad_total(self):
        with pytest.raises(ValueError):
            DiscreteMeasure((0.5, 1.5), (0.5, 0.5 + 1e-9), (0.1, 0.1))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            DiscreteMeasure((0.5, 1.5), (1.0,), (0.1, 0.1))

    def test_rejects_angle_outside_range(self):
        with pytest.raises(ValueError):
            DiscreteMeasure((0.5, 3.5), (0.5, 0.5), (0.1, 0.1))


class TestRingEnergySystem:
    def test_matrix_symmetric_positive_definite(self):
        sys48 = ring_energy_system(48)
        assert np.allclose(sys48.interaction, sys48.interaction.T, rtol=0, atol=1e-13)
        assert np.linalg.eigvalsh(sys48.interaction).min() > 0.0

    def test_uniform_weights_reproduce_sphere_energy(self):
        # calibration contract: area weights give potential 1 at every ring,
        # hence total energy exactly W(S^2) = 1
        sys64 = ring_energy_system(64)
        a = sys64.area_weights
        np.testing.assert_allclose(sys64.interaction @ a, 1.0, rtol=0, atol=1e-12)
        assert abs(a @ (sys64.interaction @ a) - 1.0) <= 1e-12

    def test_interior_effective_width_near_delta_over_pi(self):
        sys64 = ring_energy_system(64)
        mid = sys64.effective_widths[20:-20] / sys64.halfwidth
        np.testing.assert_allclose(mid, 1.0 / PI, rtol=2e-2)

    def test_area_weights_follow_sines(self):
        sys32 = ring_energy_system(32)
        s = np.sin(sys32.angles)
        np.testing.assert_allclose(sys32.area_weights, s / s.sum(), rtol=0, atol=1e-15)


class TestNystromSolve:
    def test_zero_field_matches_closed_form(self):
        alpha = PI / 3
        profile, fq = nystrom_solve(ZeroField(), south_cap(alpha), 64)
        assert abs(fq - PI / (PI - alpha + math.sin(alpha))) <= 1e-4
        nodes = np.asarray(profile.grid.nodes)
        exact = nofield_density(alpha, nodes)
        np.testing.assert_allclose(np.asarray(profile.values), exact, rtol=1e-2)

    def test_zero_field_profile_contract(self):
        profile, fq = nystrom_solve(ZeroField(), south_cap(PI / 3), 32)
        assert profile.robin_constant == fq
        assert profile.negative_nodes == ()
        assert abs(profile.mass - 1.0) <= 1e-4

    def test_self_convergence_zero_field(self):
        alpha = PI / 3

        def max_rel(n):
            profile, _ = nystrom_solve(ZeroField(), south_cap(alpha), n)
            nodes = np.asarray(profile.grid.nodes)
            exact = nofield_density(alpha, nodes)
            return np.max(np.abs(np.asarray(profile.values) - exact) / exact)

        assert max_rel(48) >= 2.0 * max_rel(96)

    def test_point_charge_matches_closed_form(self):
        profile, fq = nystrom_solve(
            PointChargeField(1.0, 2.0), south_cap(ALPHA0_PC_12), 96
        )
        assert abs(fq - FQ_PC_12) <= 1e-3
        nodes = np.asarray(profile.grid.nodes)
        exact, _ = pointcharge_density(1.0, 2.0, ALPHA0_PC_12, nodes)
        np.testing.assert_allclose(np.asarray(profile.values), exact, rtol=1e-2)

    def test_quadratic_matches_closed_form(self):
        profile, fq = nystrom_solve(
            QuadraticField(1.0, 2.5, 2.0), south_cap(ALPHA0_QUAD), 64
        )
        assert abs(fq - FQ_QUAD) <= 1e-3
        nodes = np.asarray(profile.grid.nodes)
        exact, _ = quadratic_density(1.0, 2.5, 2.0, ALPHA0_QUAD, nodes)
        np.testing.assert_allclose(np.asarray(profile.values), exact, rtol=1e-2)

    def test_full_sphere_zero_field(self):
        profile, fq = nystrom_solve(ZeroField(), south_cap(0.0), 48)
        assert abs(fq - 1.0) <= 1e-6
        np.testing.assert_allclose(
            np.asarray(profile.values), 1.0 / (4.0 * PI), rtol=1e-4
        )

    def test_north_cap_mirrors_south(self):
        south_profile, fq_s = nystrom_solve(ZeroField(), south_cap(PI / 3), 48)
        north_profile, fq_n = nystrom_solve(ZeroField(), north_cap(2 * PI / 3), 48)
        assert fq_n == pytest.approx(fq_s, rel=0, abs=1e-12)
        s_nodes = np.asarray(south_profile.grid.nodes)
        n_nodes = np.asarray(north_profile.grid.nodes)
        np.testing.assert_allclose(n_nodes, (PI - s_nodes)[::-1], rtol=0, atol=1e-12)
        # pi/3 and pi - 2*pi/3 differ by an ulp, so the two solves are not
        # bitwise twins, only numerically so
        np.testing.assert_allclose(
            np.asarray(north_profile.values),
            np.asarray(south_profile.values)[::-1],
            rtol=1e-9,
        )

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            nystrom_solve(ZeroField(), south_cap(PI / 3), 15)

    def test_rejects_degenerate_caps(self):
        with pytest.raises(ValueError):
            nystrom_solve(ZeroField(), south_cap(PI - 1e-9), 32)
        with pytest.raises(ValueError):
            nystrom_solve(ZeroField(), north_cap(1e-9), 32)


class TestDiscreteEnergyMinimize:
    def test_zero_field_weights_follow_ring_areas(self):
        measure = discrete_energy_minimize(ZeroField(), 64)
        w = np.asarray(measure.weights)
        sys64 = ring_energy_system(64)
        np.testing.assert_allclose(w, sys64.area_weights, rtol=2e-2)

    def test_measure_layout(self):
        measure = discrete_energy_minimize(ZeroField(), 32)
        assert len(measure.ring_angles) == 32
        assert measure.ring_angles[0] == pytest.approx(0.5 * PI / 32, rel=0, abs=1e-15)
        assert all(h == pytest.approx(0.5 * PI / 32) for h in measure.ring_halfwidths)

    def test_point_charge_support_emerges(self):
        n = 64
        measure = discrete_energy_minimize(PointChargeField(1.0, 2.0), n)
        phi = np.asarray(measure.ring_angles)
        w = np.asarray(measure.weights)
        spacing = PI / n
        assert np.all(w[phi < ALPHA0_PC_12 - 2 * spacing] < 1e-6)
        assert np.all(w[phi > ALPHA0_PC_12 + 2 * spacing] > 1e-8)

    def test_far_charge_keeps_full_support(self):
        # h = 3 lies beyond the large Gonchar height for q = 1
        measure = discrete_energy_minimize(PointChargeField(1.0, 3.0), 64)
        assert min(measure.weights) > 0.0

    def test_kkt_consistency_point_charge(self):
        n = 64
        field = PointChargeField(1.0, 2.0)
        measure = discrete_energy_minimize(field, n)
        sys_n = ring_energy_system(n)
        w = np.asarray(measure.weights)
        q = field.value_at_x3(np.cos(sys_n.angles))
        station = sys_n.interaction @ w + q
        active = w > 1e-6
        const = float(np.mean(station[active]))
        assert station[active].max() - station[active].min() <= 1e-2 * FQ_PC_12
        assert abs(const - FQ_PC_12) <= 1e-2 * FQ_PC_12
        assert np.all(station[~active] >= const - 1e-2 * FQ_PC_12)

    def test_mass_multiplier_matches_quadratic_robin(self):
        n = 64
        field = QuadraticField(1.0, 2.5, 2.0)
        measure = discrete_energy_minimize(field, n)
        sys_n = ring_energy_system(n)
        w = np.asarray(measure.weights)
        q = field.value_at_x3(np.cos(sys_n.angles))
        station = sys_n.interaction @ w + q
        active = w > 1e-6
        assert abs(float(np.mean(station[active])) - FQ_QUAD) <= 1e-2 * FQ_QUAD

    def test_deterministic(self):
        a = discrete_energy_minimize(PointChargeField(1.0, 2.0), 48)
        b = discrete_energy_minimize(PointChargeField(1.0, 2.0), 48)
        assert a.weights == b.weights

    def test_nonconvergence_reports_iterate(self):
        with pytest.raises(NonconvergenceError) as info:
            discrete_energy_minimize(PointChargeField(1.0, 2.0), 64, iterations=50)
        err = info.value
        assert err.error_bound > 0.0
        w = np.asarray(err.estimate.weights)
        assert w.shape == (64,)
        assert abs(w.sum() - 1.0) <= 1e-9

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            discrete_energy_minimize(ZeroField(), 31)

    def test_rejects_bad_iteration_count(self):
        with pytest.raises(ValueError):
            discrete_energy_minimize(ZeroField(), 32, iterations=0)

    def test_assembly_thread_invariant(self, monkeypatch):
        base = ring_energy_system(48).interaction
        monkeypatch.setenv("CAPFIELD_THREADS", "4")
        threaded = ring_energy_system(48).interaction
        assert np.array_equal(base, threaded)
