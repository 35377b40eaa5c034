"""Tests for the sparse energy / gradient / Hessian assembly.

Properties checked:

1. The assembled energy equals the pointwise limit energy
2. Zero state: zero energy, zero gradient without loads, Hessian = linear stiffness
3. Hessian matches finite differences of the gradient and is symmetric
4. Repeated assemblies are bit-identical
"""

import numpy as np
import pytest

from mechanics.assembly import EnergyModel, assemble_energy_gradient_hessian, linearized_stiffness
from mechanics.errors import DofMapError
from mechanics.forces import ForceData
from mechanics.limit_model import LimitState, total_energy


class TestEnergy:

    def test_matches_limit_energy(self, dofmap, unit_material, demo_forces, random_state):
        state = random_state(dofmap, 0.1)
        model = EnergyModel(dofmap, demo_forces, unit_material)
        assert model.energy(state.values) == pytest.approx(
            total_energy(state, demo_forces, unit_material), rel=1e-12)

    def test_matches_with_printed_coefficients(self, dofmap, unit_material, demo_forces, printed, random_state):
        state = random_state(dofmap, 0.1)
        model = EnergyModel(dofmap, demo_forces, unit_material, printed)
        assert model.energy(state.values) == pytest.approx(
            total_energy(state, demo_forces, unit_material, printed), rel=1e-12)

    def test_compressive_axial_load(self, dofmap, unit_material, random_state):
        # the recovered W3 term enters through the geometric matrices
        fd = ForceData.from_config({"f_r": ["0", "0", "-2 + x3"]})
        state = random_state(dofmap, 0.2)
        assert EnergyModel(dofmap, fd, unit_material).energy(state.values) == pytest.approx(
            total_energy(state, fd, unit_material), rel=1e-12)

    def test_evaluate_agrees_with_energy(self, dofmap, unit_material, demo_forces, random_state):
        state = random_state(dofmap)
        model = EnergyModel(dofmap, demo_forces, unit_material)
        e, _, H = model.evaluate(state.values, hessian=False)
        assert H is None
        assert e == model.energy(state.values)

    def test_wrong_vector_length(self, dofmap, unit_material, zero_forces):
        with pytest.raises(DofMapError):
            EnergyModel(dofmap, zero_forces, unit_material).evaluate(np.zeros(dofmap.n_dofs + 1))


class TestZeroState:

    def test_energy_and_gradient(self, dofmap, unit_material, zero_forces):
        e, g, H = assemble_energy_gradient_hessian(LimitState.zeros(dofmap), zero_forces, unit_material)
        assert e == 0.0
        np.testing.assert_array_equal(g, 0.0)
        assert H.shape == (dofmap.n_free, dofmap.n_free)

    def test_hessian_is_linear_stiffness(self, dofmap, unit_material, zero_forces):
        _, _, H = assemble_energy_gradient_hessian(LimitState.zeros(dofmap), zero_forces, unit_material)
        K = linearized_stiffness(dofmap, unit_material)
        assert abs(H - K).max() == pytest.approx(0.0, abs=1e-14)

    def test_linear_stiffness_is_positive_definite(self, dofmap, unit_material):
        K = linearized_stiffness(dofmap, unit_material).toarray()
        assert np.linalg.eigvalsh(K).min() > 0.0

    def test_linear_stiffness_carries_membrane_block(self, dofmap, unit_material):
        K = linearized_stiffness(dofmap, unit_material)
        position = np.full(dofmap.n_dofs, -1)
        position[dofmap.free] = np.arange(dofmap.n_free)
        rows = position[np.unique(dofmap.membrane_dofs)]
        rows = rows[rows >= 0]
        assert len(rows) > 0
        assert np.all(K.diagonal()[rows] > 0.0)


class TestHessian:

    def test_symmetric(self, dofmap, unit_material, demo_forces, random_state):
        _, _, H = assemble_energy_gradient_hessian(random_state(dofmap, 0.1), demo_forces, unit_material)
        assert abs(H - H.T).max() <= 1e-12 * abs(H).max()

    def test_finite_differences_of_gradient(self, dofmap, unit_material, demo_forces, random_state, rng):
        state = random_state(dofmap, 0.1)
        model = EnergyModel(dofmap, demo_forces, unit_material)
        free = dofmap.free
        x = state.values
        _, _, H = model.evaluate(x)
        H = H[free][:, free].toarray()
        step = 1e-6
        for k in rng.choice(dofmap.n_free, size=10, replace=False):
            e = np.zeros_like(x)
            e[free[k]] = step
            column = (model.gradient(x + e) - model.gradient(x - e))[free] / (2 * step)
            np.testing.assert_allclose(column, H[:, k], atol=1e-6 * np.abs(H).max())

    def test_repeatable(self, dofmap, unit_material, demo_forces, random_state):
        state = random_state(dofmap, 0.1)
        first = assemble_energy_gradient_hessian(state, demo_forces, unit_material)
        second = assemble_energy_gradient_hessian(state, demo_forces, unit_material)
        assert first[0] == second[0]
        np.testing.assert_array_equal(first[1], second[1])
        np.testing.assert_array_equal(first[2].toarray(), second[2].toarray())
