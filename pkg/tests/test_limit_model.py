"""Tests for the limit model: strains, recovered W3, energies, warpings.

Properties checked:

1. Membrane strain of linear and sloped fields
2. W3 recovered from U3(O) and the rod slopes, exact for polynomial data
3. Plate, rod and load terms on hand-computable fields
4. Total energy recomposes, and its gradient matches finite differences
5. Optimal warpings and limit strain tensors by substitution
"""

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from mechanics.forces import ForceData
from mechanics.limit_model import (
    LimitState,
    gradient,
    limit_strain_plate,
    limit_strain_rod,
    load_functional,
    membrane_strain,
    optimal_plate_warping,
    optimal_rod_warping,
    plate_energy,
    plate_energy_parts,
    recover_W3,
    rod_rotation_vector,
    reduced_plate_energy,
    reduced_rod_energy,
    rod_energy,
    total_energy,
)
from mechanics.material import LimitCoefficients, MaterialParams


def const(value):
    return lambda x, *rest: value + 0.0 * np.asarray(x)


# =============================================================================
# Strains & W3
# =============================================================================

class TestMembraneStrain:

    def test_zero_state(self, dofmap):
        Z = membrane_strain(LimitState.zeros(dofmap)).Z
        np.testing.assert_array_equal(Z, 0.0)

    def test_linear_in_plane_field(self, dofmap):
        state = LimitState.from_fields(dofmap, enforce_constraints=False, u1=lambda x, y: 0.3 * x)
        strain = membrane_strain(state)
        np.testing.assert_allclose(strain.z11, 0.3, atol=1e-14)
        np.testing.assert_allclose(strain.z12, 0.0, atol=1e-14)
        np.testing.assert_allclose(strain.z22, 0.0, atol=1e-14)

    def test_constant_slope(self, dofmap):
        a = 0.4
        state = LimitState.from_fields(
            dofmap, enforce_constraints=False,
            u3=lambda x, y: (a * x, const(a)(x), const(0.0)(x), const(0.0)(x)),
        )
        strain = membrane_strain(state)
        np.testing.assert_allclose(strain.z11, a ** 2 / 2.0, atol=1e-14)
        np.testing.assert_allclose(strain.z22, 0.0, atol=1e-14)


class TestRecoverW3:

    def test_constant_from_origin_value(self, dofmap):
        state = LimitState.from_fields(
            dofmap, enforce_constraints=False,
            u3=lambda x, y: (const(0.7)(x), const(0.0)(x), const(0.0)(x), const(0.0)(x)),
        )
        np.testing.assert_allclose(recover_W3(state, np.linspace(0.0, 1.0, 9)), 0.7, atol=1e-15)

    def test_quadratic_deflection(self, dofmap):
        a = 0.3
        state = LimitState.from_fields(dofmap, w1=lambda x: (a * x ** 2, 2 * a * x))
        x3 = np.linspace(0.0, 1.0, 13)
        np.testing.assert_allclose(recover_W3(state, x3), -(2 * a ** 2 / 3.0) * x3 ** 3, atol=1e-14)

    def test_matches_fine_trapezoid(self, small_state):
        x = np.linspace(0.0, 1.0, 200_001)
        W = small_state.rod_jet(x).W
        oracle = small_state.origin_value - 0.5 * cumulative_trapezoid(
            W[:, 0, 1] ** 2 + W[:, 1, 1] ** 2, x, initial=0.0)
        probes = np.array([0.0, 0.13, 0.5, 0.77, 1.0])
        idx = np.rint(probes * 200_000).astype(int)
        np.testing.assert_allclose(recover_W3(small_state, probes), oracle[idx], atol=1e-10)

    def test_junction_value(self, small_state):
        assert recover_W3(small_state, 0.0)[0] == small_state.origin_value

    def test_rotation_vector(self, dofmap):
        state = LimitState.from_fields(dofmap, w1=lambda x: (0.3 * x ** 2, 0.6 * x),
                                       w2=lambda x: (0.1 * x ** 3, 0.3 * x ** 2), q3=lambda x: 0.2 * x)
        x3 = np.linspace(0.0, 1.0, 9)
        expected = np.column_stack([-0.3 * x3 ** 2, 0.6 * x3, 0.2 * x3])
        np.testing.assert_allclose(rod_rotation_vector(state, x3), expected, atol=1e-14)


# =============================================================================
# Energies
# =============================================================================

class TestEnergies:

    def test_plate_energy_zero(self, dofmap, unit_material):
        assert plate_energy(LimitState.zeros(dofmap), unit_material) == 0.0

    def test_uniform_membrane(self, dofmap, unit_material):
        c = 0.2
        state = LimitState.from_fields(dofmap, enforce_constraints=False, u1=lambda x, y: c * x)
        bending, membrane = plate_energy_parts(state, unit_material)
        m = unit_material
        assert bending == pytest.approx(0.0, abs=1e-15)
        assert membrane == pytest.approx(m.young * c ** 2 * 16.0 / (1.0 - m.poisson ** 2), rel=1e-13)

    def test_plate_energy_against_dense_quadrature(self, dofmap, unit_material):
        def u3(x, y):
            return (0.1 * (x ** 2 - 4) * (y ** 2 - 4), 0.2 * x * (y ** 2 - 4),
                    0.2 * y * (x ** 2 - 4), 0.4 * x * y)

        state = LimitState.from_fields(dofmap, u3=u3)
        assert plate_energy(state, unit_material, order=8) == pytest.approx(
            plate_energy(state, unit_material, order=12), rel=1e-10)
        bending_default, _ = plate_energy_parts(state, unit_material)
        bending_dense, _ = plate_energy_parts(state, unit_material, order=10)
        assert bending_default == pytest.approx(bending_dense, rel=1e-12)

    def test_rod_bending(self, dofmap, printed):
        m = MaterialParams.from_engineering(1.0, 0.0)
        state = LimitState.from_fields(dofmap, w1=lambda x: (x ** 2, 2 * x))
        assert rod_energy(state, m, printed) == pytest.approx(np.pi / 2.0, rel=1e-13)

    def test_rod_torsion(self, dofmap, printed):
        m = MaterialParams.from_lame(0.0, 1.0)
        state = LimitState.from_fields(dofmap, q3=lambda x: x)
        assert rod_energy(state, m, printed) == pytest.approx(np.pi / 8.0, rel=1e-13)
        assert rod_energy(state, m, LimitCoefficients.consistent()) == pytest.approx(np.pi / 4.0, rel=1e-13)

    def test_load_of_plate_force(self, dofmap):
        state = LimitState.from_fields(
            dofmap, enforce_constraints=False,
            u3=lambda x, y: (const(1.0)(x), const(0.0)(x), const(0.0)(x), const(0.0)(x)),
        )
        fd = ForceData.from_config({"f_p": ["0", "0", "1"]})
        assert load_functional(state, fd) == pytest.approx(32.0, rel=1e-13)

    def test_load_of_axial_rod_force_through_W3(self, dofmap):
        state = LimitState.from_fields(
            dofmap, enforce_constraints=False,
            u3=lambda x, y: (const(1.0)(x), const(0.0)(x), const(0.0)(x), const(0.0)(x)),
        )
        fd = ForceData.from_config({"f_r": ["0", "0", "1"]})
        assert load_functional(state, fd) == pytest.approx(np.pi, rel=1e-13)

    def test_couple_load(self, dofmap, printed):
        state = LimitState.from_fields(dofmap, q3=lambda x: x)
        fd = ForceData.from_config({"g1": ["0", "1", "0"]})
        # couple_factor * integral_0^1 x dx
        assert load_functional(state, fd, printed) == pytest.approx(np.pi / 4.0, rel=1e-13)

    def test_total_energy_of_zero_state(self, dofmap, unit_material, demo_forces):
        assert total_energy(LimitState.zeros(dofmap), demo_forces, unit_material) == 0.0

    def test_total_energy_recomposes(self, small_state, unit_material, zero_forces):
        total = total_energy(small_state, zero_forces, unit_material)
        parts = plate_energy(small_state, unit_material) + rod_energy(small_state, unit_material)
        assert total >= 0.0
        assert total == pytest.approx(parts, rel=1e-14, abs=1e-300)


# =============================================================================
# Gradient
# =============================================================================

class TestGradient:

    def test_zero_state_zero_forces(self, dofmap, unit_material, zero_forces):
        np.testing.assert_array_equal(gradient(LimitState.zeros(dofmap), zero_forces, unit_material), 0.0)

    def test_central_differences(self, dofmap, unit_material, demo_forces, random_state, rng):
        state = random_state(dofmap, 0.05)
        g = gradient(state, demo_forces, unit_material)
        step = 1e-6
        picks = rng.choice(dofmap.n_free, size=12, replace=False)
        x = state.free_values
        scale = np.max(np.abs(g))
        for k in picks:
            e = np.zeros_like(x)
            e[k] = step
            up = total_energy(LimitState.from_free(dofmap, x + e), demo_forces, unit_material)
            down = total_energy(LimitState.from_free(dofmap, x - e), demo_forces, unit_material)
            fd = (up - down) / (2 * step)
            assert abs(fd - g[k]) <= 1e-6 * scale

    def test_linear_plate_load_at_origin(self, dofmap, unit_material):
        fd = ForceData.from_config({"f_p": ["0", "0", "1"]})
        g = gradient(LimitState.zeros(dofmap), fd, unit_material)
        # the derivative of -L in direction of each basis field
        for k in (0, 7, 20):
            e = np.zeros(dofmap.n_free)
            e[k] = 1.0
            assert g[k] == pytest.approx(-load_functional(LimitState.from_free(dofmap, e), fd), abs=1e-13)


# =============================================================================
# Warpings & Limit Strains
# =============================================================================

class TestWarpings:

    def test_no_poisson_no_warping(self, small_state, rng):
        m = MaterialParams.from_lame(0.0, 1.0)
        pts = np.column_stack([rng.uniform(-2, 2, (5, 2)), rng.uniform(-1, 1, 5)])
        np.testing.assert_array_equal(optimal_plate_warping(small_state, m, pts), 0.0)
        rod_pts = np.column_stack([rng.uniform(-0.5, 0.5, (5, 2)), rng.uniform(0, 1, 5)])
        np.testing.assert_array_equal(optimal_rod_warping(small_state, m, rod_pts), 0.0)

    def test_plate_warping_from_membrane_trace(self, dofmap):
        m = MaterialParams.from_engineering(1.0, 0.3)
        c = 0.2
        state = LimitState.from_fields(dofmap, enforce_constraints=False, u1=lambda x, y: c * x)
        out = optimal_plate_warping(state, m, np.array([[0.3, 0.4, 0.5]]))
        assert out[0, 2] == pytest.approx(-0.3 / 0.7 * 0.5 * c, rel=1e-13)
        assert out[0, 0] == out[0, 1] == 0.0

    def test_plate_warping_zero_crossing(self, dofmap):
        m = MaterialParams.from_engineering(1.0, 0.3)
        state = LimitState.from_fields(
            dofmap, u3=lambda x, y: (0.1 * (x ** 2 - 4) * (y ** 2 - 4), 0.2 * x * (y ** 2 - 4),
                                     0.2 * y * (x ** 2 - 4), 0.4 * x * y))
        # membrane trace vanishes at O where the slope is zero and U1 = U2 = 0
        out = optimal_plate_warping(state, m, np.array([[0.0, 0.0, 1.0 / np.sqrt(3.0)],
                                                        [0.0, 0.0, -1.0 / np.sqrt(3.0)]]))
        np.testing.assert_allclose(out[:, 2], 0.0, atol=1e-14)

    def test_rod_warping_substitution(self, dofmap):
        m = MaterialParams.from_engineering(1.0, 0.3)
        state = LimitState.from_fields(dofmap, w1=lambda x: (0.5 * x ** 2, x))
        out = optimal_rod_warping(state, m, np.array([[1.0, 0.0, 0.5]]))
        assert out[0, 0] == pytest.approx(0.15, rel=1e-13)
        assert out[0, 1] == pytest.approx(0.0, abs=1e-15)
        assert out[0, 2] == 0.0

    def test_rod_warping_even_in_cross_section(self, small_state, unit_material, rng):
        X = rng.uniform(-0.5, 0.5, (6, 2))
        x3 = rng.uniform(0.0, 1.0, 6)
        plus = optimal_rod_warping(small_state, unit_material, np.column_stack([X, x3]))
        minus = optimal_rod_warping(small_state, unit_material, np.column_stack([-X, x3]))
        np.testing.assert_allclose(plus, minus, atol=1e-15)


class TestLimitStrains:

    def test_zero_state(self, dofmap, unit_material):
        s = LimitState.zeros(dofmap)
        pts = np.array([[0.1, 0.2, 0.3]])
        np.testing.assert_array_equal(limit_strain_plate(s, unit_material, pts), 0.0)
        np.testing.assert_array_equal(limit_strain_rod(s, unit_material, pts), 0.0)

    def test_pure_bending_plate(self, dofmap, unit_material):
        # U3 = x1 x2 has zero membrane strain only at O, so probe there
        state = LimitState.from_fields(dofmap, enforce_constraints=False,
                                       u3=lambda x, y: (x * y, y, x, const(1.0)(x)))
        E = limit_strain_plate(state, unit_material, np.array([[0.0, 0.0, 0.5]]))
        np.testing.assert_allclose(E[0, :2, :2], -0.5 * np.array([[0.0, 1.0], [1.0, 0.0]]), atol=1e-14)

    def test_pure_torsion_rod(self, dofmap, unit_material):
        c = 0.3
        state = LimitState.from_fields(dofmap, q3=lambda x: c * x)
        E = limit_strain_rod(state, unit_material, np.array([[0.2, -0.4, 0.6]]))[0]
        expected = np.zeros((3, 3))
        expected[0, 2] = expected[2, 0] = 0.4 * c / 2.0
        expected[1, 2] = expected[2, 1] = 0.2 * c / 2.0
        np.testing.assert_allclose(E, expected, atol=1e-15)

    def test_symmetry(self, small_state, unit_material, rng):
        pts = np.column_stack([rng.uniform(-1, 1, (8, 2)), rng.uniform(0, 1, 8)])
        for E in (limit_strain_plate(small_state, unit_material, pts),
                  limit_strain_rod(small_state, unit_material, pts)):
            np.testing.assert_array_equal(E, np.swapaxes(E, 1, 2))

    def test_reduced_energies_match_limit_energies(self, small_state, unit_material):
        # the optimal warpings make the 3D integrals equal to the 2D/1D energies
        assert reduced_plate_energy(small_state, unit_material, order=6) == pytest.approx(
            plate_energy(small_state, unit_material, order=6), rel=1e-10)
        assert reduced_rod_energy(small_state, unit_material) == pytest.approx(
            rod_energy(small_state, unit_material), rel=1e-10)
