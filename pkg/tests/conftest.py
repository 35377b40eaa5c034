"""
Shared fixtures: small meshes, unit material, force data and seeded states.

Meshes are kept small so the suite runs in seconds; tests that refine
meshes or sweep thicknesses are marked slow.
"""

import numpy as np
import pytest

from mechanics.fem import build_dof_map
from mechanics.forces import ForceData
from mechanics.geometry import PlateDomain, RodDomain, build_plate_mesh, build_rod_mesh
from mechanics.limit_model import LimitState
from mechanics.material import LimitCoefficients, MaterialParams


# =============================================================================
# Material & Coefficients
# =============================================================================

@pytest.fixture
def unit_material() -> MaterialParams:
    """lambda = mu = 1 (E = 5/2, nu = 1/4)."""
    return MaterialParams.from_lame(1.0, 1.0)


@pytest.fixture
def printed() -> LimitCoefficients:
    return LimitCoefficients.as_printed()


# =============================================================================
# Meshes
# =============================================================================

@pytest.fixture
def plate_mesh():
    """4x4 elements on [-2, 2]^2, all edges clamped."""
    return build_plate_mesh(PlateDomain(2.0, 2.0), 4)


@pytest.fixture
def rod_mesh():
    """Four elements on [0, 1]."""
    return build_rod_mesh(RodDomain(1.0), 4)


@pytest.fixture
def dofmap(plate_mesh, rod_mesh):
    return build_dof_map(plate_mesh, rod_mesh)


@pytest.fixture
def fine_dofmap():
    """8x8 plate, 8-element rod: the mesh of the demo run file."""
    plate = build_plate_mesh(PlateDomain(2.0, 2.0), 8)
    rod = build_rod_mesh(RodDomain(1.0), 8)
    return build_dof_map(plate, rod)


@pytest.fixture
def free_plate_dofmap():
    """Only the left edge clamped, so interior-field oracles are not cut by constraints."""
    plate = build_plate_mesh(PlateDomain(2.0, 2.0, ("left",)), 4)
    return build_dof_map(plate, build_rod_mesh(RodDomain(1.0), 4))


# =============================================================================
# Forces & States
# =============================================================================

@pytest.fixture
def zero_forces() -> ForceData:
    return ForceData.zero()


@pytest.fixture
def demo_forces() -> ForceData:
    return ForceData.from_config({
        "f_p": ["0", "0", "0.5"],
        "f_r": ["0.5", "0", "0.05"],
        "g1": ["0", "0.01", "0"],
    })


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def _random_state(dm, rng, amplitude: float = 1e-2) -> LimitState:
    """Random values on the free DOFs, zero on the constrained ones."""
    return LimitState.from_free(dm, amplitude * rng.standard_normal(dm.n_free))


@pytest.fixture
def random_state(rng):
    """Factory: random_state(dm, amplitude=1e-2)."""
    return lambda dm, amplitude=1e-2: _random_state(dm, rng, amplitude)


@pytest.fixture
def small_state(dofmap, rng) -> LimitState:
    return _random_state(dofmap, rng)
