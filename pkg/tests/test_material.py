"""Tests for material constants and energy densities.

Properties checked:

1. Engineering and Lamé constants convert consistently
2. Q matches a term-by-term trace oracle
3. The St Venant-Kirchhoff density is frame indifferent and flags det F <= 0
4. dist(F, SO(3)) agrees with a sampled-rotation oracle
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from mechanics.errors import MaterialError
from mechanics.material import (
    NONPHYSICAL,
    LimitCoefficients,
    MaterialParams,
    dist_SO3,
    green_energy,
    lame_from_engineering,
    quadratic_form_Q,
    svk_density,
    svk_density_field,
)


# =============================================================================
# Constants
# =============================================================================

class TestMaterialParams:

    def test_zero_poisson_gives_zero_lambda(self):
        m = lame_from_engineering(1.0, 0.0)
        assert m.lam == pytest.approx(0.0, abs=1e-15)
        assert m.mu == pytest.approx(0.5)

    def test_engineering_round_trip(self):
        m = lame_from_engineering(2.6, 0.3)
        assert m.lam == pytest.approx(1.5, rel=1e-12)
        assert m.mu == pytest.approx(1.0, rel=1e-12)
        assert m.young == pytest.approx(2.6, rel=1e-12)
        assert m.poisson == pytest.approx(0.3, rel=1e-12)

    def test_incompressible_limit_rejected(self):
        with pytest.raises(MaterialError):
            lame_from_engineering(1.0, 0.5)

    def test_nonpositive_mu_rejected(self):
        with pytest.raises(MaterialError):
            MaterialParams.from_lame(1.0, 0.0)

    def test_inconsistent_record_rejected(self):
        with pytest.raises(MaterialError):
            MaterialParams(lam=1.0, mu=1.0, young=3.0, poisson=0.25)

    def test_limit_coefficients(self, unit_material):
        consistent = LimitCoefficients.consistent()
        printed = LimitCoefficients.as_printed()
        assert consistent.rod_torsion(unit_material) == pytest.approx(np.pi / 4.0)
        assert printed.rod_torsion(unit_material) == pytest.approx(np.pi / 8.0)
        assert printed.couple_factor == pytest.approx(np.pi / 2.0)
        with pytest.raises(MaterialError):
            LimitCoefficients.named("rounded")


# =============================================================================
# Quadratic Form
# =============================================================================

class TestQuadraticForm:

    def test_zero_strain(self, unit_material):
        assert quadratic_form_Q(np.zeros((3, 3)), unit_material) == 0.0

    def test_identity_strain(self, unit_material):
        assert quadratic_form_Q(np.eye(3), unit_material) == pytest.approx(1.875, abs=1e-15)

    def test_matches_loop_oracle(self, rng):
        m = MaterialParams.from_lame(0.7, 1.3)
        A = rng.standard_normal((3, 3))
        E = 0.5 * (A + A.T)
        trace = sum(E[i, i] for i in range(3))
        trace_sq = sum(E[i, j] * E[j, i] for i in range(3) for j in range(3))
        expected = m.lam / 8.0 * trace ** 2 + m.mu / 4.0 * trace_sq
        assert quadratic_form_Q(E, m) == pytest.approx(expected, rel=1e-14)

    def test_green_energy_is_Q_of_twice_the_strain(self, rng, unit_material):
        A = rng.standard_normal((3, 3))
        E = 0.5 * (A + A.T)
        assert green_energy(E, unit_material) == pytest.approx(quadratic_form_Q(2.0 * E, unit_material))

    def test_batched_shape(self, rng, unit_material):
        E = rng.standard_normal((5, 4, 3, 3))
        assert quadratic_form_Q(E, unit_material).shape == (5, 4)


# =============================================================================
# St Venant-Kirchhoff Density
# =============================================================================

class TestSVKDensity:

    def test_identity(self, unit_material):
        assert svk_density(np.eye(3), unit_material) == 0.0

    def test_rotation_is_free(self, unit_material):
        R = Rotation.from_rotvec([0.3, -1.1, 0.7]).as_matrix()
        assert svk_density(R, unit_material) == pytest.approx(0.0, abs=1e-12)

    def test_uniaxial_stretch(self, unit_material):
        e = 0.1
        F = np.diag([1.0 + e, 1.0, 1.0])
        assert svk_density(F, unit_material) == pytest.approx(0.0165375, rel=1e-12)

    def test_reflection_is_nonphysical(self, unit_material):
        assert svk_density(np.diag([-1.0, 1.0, 1.0]), unit_material) is NONPHYSICAL
        assert not NONPHYSICAL

    def test_field_masks_nonphysical_points(self, unit_material):
        F = np.stack([np.eye(3), np.diag([-1.0, 1.0, 1.0]), np.diag([1.1, 1.0, 1.0])])
        density, bad = svk_density_field(F, unit_material)
        np.testing.assert_array_equal(bad, [False, True, False])
        assert density[1] == 0.0
        assert density[2] == pytest.approx(0.0165375, rel=1e-12)


# =============================================================================
# Distance to SO(3)
# =============================================================================

class TestDistSO3:

    def test_identity(self):
        assert dist_SO3(np.eye(3)) == pytest.approx(0.0, abs=1e-15)

    def test_scaled_identity(self):
        assert dist_SO3(2.0 * np.eye(3)) == pytest.approx(np.sqrt(3.0), rel=1e-14)

    def test_rotation_has_zero_distance(self):
        R = Rotation.from_rotvec([1.0, 2.0, -0.5]).as_matrix()
        assert dist_SO3(R) == pytest.approx(0.0, abs=1e-12)

    def test_sampled_rotation_oracle(self, rng):
        F = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
        assert np.linalg.det(F) > 0.0
        exact = dist_SO3(F)
        # start the sampling around the polar factor so the oracle is informative
        U, _, Vt = np.linalg.svd(F)
        polar = Rotation.from_matrix(U @ Vt)
        samples = polar * Rotation.from_rotvec(0.05 * rng.standard_normal((10_000, 3)))
        distances = np.linalg.norm(F - samples.as_matrix(), axis=(1, 2))
        assert distances.min() >= exact - 1e-12
        assert distances.min() <= 1.02 * exact
