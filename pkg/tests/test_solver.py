"""Tests for the damped Newton solver, load continuation and multi-start.

Properties checked:

1. Zero forces converge at the zero state without iterating
2. Small loads reproduce the linearized solution
3. A plate-only load leaves the rod bending and twist at zero
4. Continuation and a direct solve agree; multi-start is thread-count independent
5. Options and sweep arguments are validated
"""

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import spsolve

from mechanics.assembly import linearized_stiffness
from mechanics.errors import SolverError
from mechanics.forces import ForceData
from mechanics.limit_model import LimitState, gradient, rod_energy
from mechanics.solver import (
    SolveOptions,
    Status,
    continuation_sweep,
    hessian_inertia,
    minimize,
    minimize_multistart,
)

OPTS = SolveOptions(gradient_tolerance=1e-9)


# =============================================================================
# Minimize
# =============================================================================

class TestMinimize:

    def test_zero_forces(self, dofmap, unit_material, zero_forces):
        report = minimize(LimitState.zeros(dofmap), zero_forces, unit_material)
        assert report.converged
        assert report.iterations == 0
        assert report.energy == 0.0
        assert report.verdict == "certified minimal"
        np.testing.assert_array_equal(report.state.values, 0.0)

    def test_demo_forces_converge(self, dofmap, unit_material, demo_forces):
        report = minimize(LimitState.zeros(dofmap), demo_forces, unit_material, OPTS)
        assert report.status == Status.CONVERGED
        assert report.gradient_norm <= 1e-9
        assert report.energy < 0.0
        assert report.state.satisfies_constraints()
        # energies never increase along the iteration
        assert all(b <= a + 1e-12 for a, b in zip(report.energies, report.energies[1:]))

    def test_small_load_matches_linearization(self, dofmap, unit_material):
        t = 1e-3
        fd = ForceData.from_config({"f_p": ["0", "0", str(t)], "f_r": [str(t), "0", "0"]})
        report = minimize(LimitState.zeros(dofmap), fd, unit_material, SolveOptions(gradient_tolerance=1e-13))
        b = -gradient(LimitState.zeros(dofmap), fd, unit_material)
        x = spsolve(sparse.csc_matrix(linearized_stiffness(dofmap, unit_material)), b)
        assert report.energy == pytest.approx(-0.5 * float(b @ x), rel=1e-4)
        np.testing.assert_allclose(report.state.free_values, x, atol=1e-4 * np.max(np.abs(x)))

    def test_plate_only_load_leaves_rod_straight(self, dofmap, unit_material):
        fd = ForceData.from_config({"f_p": ["0", "0", "0.2"]})
        report = minimize(LimitState.zeros(dofmap), fd, unit_material, OPTS)
        assert report.converged
        assert rod_energy(report.state, unit_material) == pytest.approx(0.0, abs=1e-20)
        assert report.state.origin_value > 0.0

    def test_max_iterations_zero(self, dofmap, unit_material, demo_forces):
        report = minimize(LimitState.zeros(dofmap), demo_forces, unit_material, SolveOptions(max_iterations=0))
        assert report.status == Status.MAX_ITER
        assert report.verdict == "not converged"
        assert report.iterations == 0

    def test_inadmissible_forces_still_solved(self, dofmap, unit_material):
        fd = ForceData.from_config({"f_r": ["0", "0", "-1"]})
        report = minimize(LimitState.zeros(dofmap), fd, unit_material, OPTS)
        assert report.admissibility == "inadmissible"

    def test_report_dict(self, dofmap, unit_material, zero_forces):
        out = minimize(LimitState.zeros(dofmap), zero_forces, unit_material).to_dict()
        assert out["status"] == "converged"
        assert out["energies"] == [0.0]
        assert "state" not in out


# =============================================================================
# Continuation & Multi-Start
# =============================================================================

class TestContinuation:

    def test_matches_direct_solve(self, dofmap, unit_material, demo_forces):
        reports = continuation_sweep(demo_forces, [0.5, 1.0], dofmap, unit_material, OPTS)
        direct = minimize(LimitState.zeros(dofmap), demo_forces, unit_material, OPTS)
        assert [r.load_scale for r in reports] == [0.5, 1.0]
        assert all(r.converged and not r.cold_restart for r in reports)
        assert reports[-1].energy == pytest.approx(direct.energy, rel=1e-10)
        assert reports[0].energy > reports[1].energy

    @pytest.mark.parametrize("scales", [[], [1.0, 0.5], [0.5, 0.5]])
    def test_rejects_bad_scales(self, dofmap, unit_material, demo_forces, scales):
        with pytest.raises(SolverError):
            continuation_sweep(demo_forces, scales, dofmap, unit_material)


class TestMultistart:

    def test_independent_of_thread_count(self, dofmap, unit_material, demo_forces):
        s0 = LimitState.zeros(dofmap)
        best1, reports1 = minimize_multistart(s0, demo_forces, unit_material, OPTS, starts=3, seed=7, threads=1)
        best2, reports2 = minimize_multistart(s0, demo_forces, unit_material, OPTS, starts=3, seed=7, threads=3)
        assert len(reports1) == 4
        assert [r.energy for r in reports1] == [r.energy for r in reports2]
        assert best1.energy == best2.energy
        assert best1.energy == min(r.energy for r in reports1 if r.converged)


# =============================================================================
# Options & Inertia
# =============================================================================

@pytest.mark.parametrize("kwargs", [
    {"gradient_tolerance": 0.0},
    {"max_iterations": -1},
    {"armijo": 0.75},
    {"backtracking": 1.0},
    {"shift_growth": 1.0},
    {"min_step": 0.0},
])
def test_invalid_options(kwargs):
    with pytest.raises(SolverError):
        SolveOptions(**kwargs)


def test_hessian_inertia():
    count, smallest = hessian_inertia(sparse.diags([2.0, -1.0, 3.0, -0.5]).tocsr())
    assert count == 2
    assert smallest == -1.0
    assert hessian_inertia(sparse.csr_matrix((0, 0)))[0] == 0
