"""
Junction - Plate-Rod Limit Model Solver
Limit Model: admissible states, energies, load and limit strains

Every function here takes a "fields" object: anything exposing plate and
rod jets plus quadrature rules (LimitState, or the smoothed state of the
recovery arm). Energies are evaluated pointwise from the jets; the
element-level assembly in mechanics.assembly reproduces them exactly and
adds derivatives.
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from mechanics.errors import DofMapError
from mechanics.fem import DofMap, PlateJet, RodJet, plate_jet, project_fields, rod_jet
from mechanics.forces import ForceData
from mechanics.geometry import PlateMesh, RodMesh, disc_rule, gauss_legendre
from mechanics.material import LimitCoefficients, MaterialParams, green_energy
from services.logger import get_logger

logger = get_logger(__name__)


class LimitFields(Protocol):
    """Interface shared by finite element states and smoothed states."""
    plate_mesh: PlateMesh
    rod_mesh: RodMesh

    def plate_jet(self, points: np.ndarray) -> PlateJet: ...
    def rod_jet(self, x3: np.ndarray) -> RodJet: ...
    def plate_quadrature(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]: ...
    def rod_quadrature(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]: ...

    @property
    def rod_breakpoints(self) -> np.ndarray: ...
    @property
    def rod_exact_order(self) -> int: ...
    @property
    def origin_value(self) -> float: ...
    @property
    def origin_gradient(self) -> np.ndarray: ...
    @property
    def origin_displacement(self) -> np.ndarray: ...


# =============================================================================
# LIMIT STATE
# =============================================================================

@dataclass(frozen=True, eq=False)
class LimitState:
    """
    Discrete (U, W1, W2, Q3) on the meshes of a DofMap. W3 is never stored;
    see recover_W3.
    """
    dofmap: DofMap
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        self.dofmap.check_vector(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, dm: DofMap) -> "LimitState":
        return cls(dm, np.zeros(dm.n_dofs))

    @classmethod
    def from_free(cls, dm: DofMap, free_values: np.ndarray) -> "LimitState":
        free_values = np.asarray(free_values, dtype=float)
        if free_values.shape != (dm.n_free,):
            raise DofMapError(f"expected {dm.n_free} free values, got {free_values.shape}")
        values = np.zeros(dm.n_dofs)
        values[dm.free] = free_values
        return cls(dm, values)

    @classmethod
    def from_fields(cls, dm: DofMap, enforce_constraints: bool = True, **fields) -> "LimitState":
        """Nodal interpolation of closed-form fields; see fem.project_fields."""
        return cls(dm, project_fields(dm, enforce_constraints=enforce_constraints, **fields))

    @property
    def free_values(self) -> np.ndarray:
        return self.values[self.dofmap.free]

    def satisfies_constraints(self) -> bool:
        return bool(np.all(self.values[self.dofmap.constrained_mask] == 0.0))

    @property
    def plate_mesh(self) -> PlateMesh:
        return self.dofmap.plate_mesh

    @property
    def rod_mesh(self) -> RodMesh:
        return self.dofmap.rod_mesh

    def plate_jet(self, points: np.ndarray) -> PlateJet:
        return plate_jet(self, points)

    def rod_jet(self, x3: np.ndarray) -> RodJet:
        return rod_jet(self, x3)

    def plate_quadrature(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        xy, w = self.plate_mesh.gauss_points(order)
        return xy.reshape(-1, 2), w.ravel()

    def rod_quadrature(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        x3, w = self.rod_mesh.gauss_points(order)
        return x3.ravel(), w.ravel()

    @property
    def rod_breakpoints(self) -> np.ndarray:
        return self.rod_mesh.nodes

    @property
    def rod_exact_order(self) -> int:
        # W' is quadratic per element, so |W'|^2 is quartic
        return 3

    @property
    def origin_value(self) -> float:
        return float(self.values[self.dofmap.origin_dof])

    @property
    def origin_gradient(self) -> np.ndarray:
        return self.values[self.dofmap.origin_dof + 1:self.dofmap.origin_dof + 3].copy()

    @property
    def origin_displacement(self) -> np.ndarray:
        return self.values[self.dofmap.origin_dof - 2:self.dofmap.origin_dof].copy()


@dataclass(frozen=True)
class MembraneStrain:
    """Z[p, a, b] at the given points."""
    points: np.ndarray
    Z: np.ndarray

    @property
    def z11(self) -> np.ndarray:
        return self.Z[:, 0, 0]

    @property
    def z22(self) -> np.ndarray:
        return self.Z[:, 1, 1]

    @property
    def z12(self) -> np.ndarray:
        return self.Z[:, 0, 1]


# =============================================================================
# STRAINS & CONSTRAINT
# =============================================================================

def membrane_tensor(jet: PlateJet) -> np.ndarray:
    """Z_ab = sym grad U + 1/2 dU3/dx_a dU3/dx_b, shape (P, 2, 2)."""
    sym = 0.5 * (jet.grad_u + np.swapaxes(jet.grad_u, 1, 2))
    return sym + 0.5 * jet.grad_w[:, :, None] * jet.grad_w[:, None, :]


def membrane_strain(fields: LimitFields, points: np.ndarray | None = None) -> MembraneStrain:
    """Membrane strain at the given points (default: plate Gauss points)."""
    if points is None:
        points, _ = fields.plate_quadrature()
    points = np.atleast_2d(points)
    return MembraneStrain(points, membrane_tensor(fields.plate_jet(points)))


def rod_rotation_vector(fields: LimitFields, x3: np.ndarray) -> np.ndarray:
    """Q = (-W2', W1', Q3), shape (P, 3)."""
    jet = fields.rod_jet(np.atleast_1d(x3))
    return np.column_stack([-jet.W[:, 1, 1], jet.W[:, 0, 1], jet.q[:, 0]])


def recover_W3(fields: LimitFields, x3: np.ndarray) -> np.ndarray:
    """
    W3(x3) = U3(O) - 1/2 integral_0^x3 (W1'^2 + W2'^2), by Gauss quadrature on
    each breakpoint interval and on the partial interval ending at x3. Exact
    for the polynomial fields of the state.
    """
    x3 = np.atleast_1d(np.asarray(x3, dtype=float))
    bp = np.asarray(fields.rod_breakpoints, dtype=float)
    s, w = gauss_legendre(fields.rod_exact_order, 0.0, 1.0)

    def slope_sq(points):
        W = fields.rod_jet(points.ravel()).W
        return (W[:, 0, 1] ** 2 + W[:, 1, 1] ** 2).reshape(points.shape)

    h = np.diff(bp)
    full = np.sum(slope_sq(bp[:-1, None] + h[:, None] * s) * w, axis=1) * h
    cumulative = np.concatenate([[0.0], np.cumsum(full)])

    def running(x):
        k = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, len(bp) - 2)
        span = x - bp[k]
        partial = np.sum(slope_sq(bp[k][:, None] + span[:, None] * s) * w, axis=1) * span
        return cumulative[k] + partial

    return fields.origin_value - 0.5 * (running(x3) - running(np.zeros(1))[0])


# =============================================================================
# ENERGIES
# =============================================================================

def _plane_stress(M: np.ndarray, coefficient: float, nu: float) -> np.ndarray:
    """coefficient * [(1 - nu) |M|^2 + nu (tr M)^2] for (P, 2, 2)."""
    return coefficient * ((1.0 - nu) * np.sum(M ** 2, axis=(1, 2)) + nu * np.trace(M, axis1=1, axis2=2) ** 2)


def plate_energy_parts(fields: LimitFields, m: MaterialParams, order: int | None = None) -> tuple[float, float]:
    """(bending, membrane) parts of the plate energy."""
    xy, w = fields.plate_quadrature(order)
    jet = fields.plate_jet(xy)
    bending = float(np.sum(w * _plane_stress(jet.hess_w, m.plate_bending, m.poisson)))
    membrane = float(np.sum(w * _plane_stress(membrane_tensor(jet), m.plate_membrane, m.poisson)))
    return bending, membrane


def plate_energy(fields: LimitFields, m: MaterialParams, order: int | None = None) -> float:
    """Von Kármán plate energy: bending plus membrane."""
    return sum(plate_energy_parts(fields, m, order))


def rod_energy(fields: LimitFields, m: MaterialParams,
               coefficients: LimitCoefficients | None = None, order: int | None = None) -> float:
    """Rod bending plus torsion energy."""
    coefficients = coefficients or LimitCoefficients.consistent()
    x3, w = fields.rod_quadrature(order)
    jet = fields.rod_jet(x3)
    bending = m.rod_bending * np.sum(w * (jet.W[:, 0, 2] ** 2 + jet.W[:, 1, 2] ** 2))
    torsion = coefficients.rod_torsion(m) * np.sum(w * jet.q[:, 1] ** 2)
    return float(bending + torsion)


def load_functional(fields: LimitFields, fd: ForceData,
                    coefficients: LimitCoefficients | None = None,
                    plate_order: int | None = None, rod_order: int | None = None) -> float:
    """
    Work of the limit forces. Nonlinear in the state through the recovered W3.
    """
    coefficients = coefficients or LimitCoefficients.consistent()
    xy, wp = fields.plate_quadrature(plate_order)
    pj = fields.plate_jet(xy)
    fp = fd.plate_force(xy[:, 0], xy[:, 1])
    plate = 2.0 * np.sum(wp * (fp[:, 0] * pj.u[:, 0] + fp[:, 1] * pj.u[:, 1] + fp[:, 2] * pj.w))

    x3, wr = fields.rod_quadrature(rod_order)
    rj = fields.rod_jet(x3)
    fr = fd.rod_force(x3)
    W3 = recover_W3(fields, x3)
    rod = np.pi * np.sum(wr * (fr[:, 0] * rj.W[:, 0, 0] + fr[:, 1] * rj.W[:, 1, 0] + fr[:, 2] * W3))

    g1, g2 = fd.couple(x3)
    couple = coefficients.couple_factor * np.sum(wr * (
        rj.q[:, 0] * (g1[:, 1] - g2[:, 0]) - g1[:, 2] * rj.W[:, 0, 1] - g2[:, 2] * rj.W[:, 1, 1]
    ))
    return float(plate + rod + couple)


def total_energy(fields: LimitFields, fd: ForceData, m: MaterialParams,
                 coefficients: LimitCoefficients | None = None) -> float:
    """J = J_p + J_r - L."""
    return (plate_energy(fields, m) + rod_energy(fields, m, coefficients)
            - load_functional(fields, fd, coefficients))


def gradient(state: LimitState, fd: ForceData, m: MaterialParams,
             coefficients: LimitCoefficients | None = None) -> np.ndarray:
    """Derivative of total_energy with respect to every free DOF."""
    from mechanics.assembly import EnergyModel

    model = EnergyModel(state.dofmap, fd, m, coefficients)
    return model.gradient(state.values)[state.dofmap.free]


# =============================================================================
# OPTIMAL WARPINGS & LIMIT STRAINS
# =============================================================================

def _poisson_factor(m: MaterialParams) -> float:
    return m.poisson / (1.0 - m.poisson)


def optimal_plate_warping(fields: LimitFields, m: MaterialParams, points: np.ndarray) -> np.ndarray:
    """
    Plate warping at (x1, x2, X3): (0, 0, nu/(1-nu) [(X3^2/2 - 1/6) lap U3 - X3 tr Z]).
    """
    points = np.atleast_2d(points)
    jet = fields.plate_jet(points[:, :2])
    X3 = points[:, 2]
    lap = np.trace(jet.hess_w, axis1=1, axis2=2)
    trZ = np.trace(membrane_tensor(jet), axis1=1, axis2=2)
    out = np.zeros((len(points), 3))
    out[:, 2] = _poisson_factor(m) * ((X3 ** 2 / 2.0 - 1.0 / 6.0) * lap - X3 * trZ)
    return out


def optimal_rod_warping(fields: LimitFields, m: MaterialParams, points: np.ndarray) -> np.ndarray:
    """
    Rod warping at (X1, X2, x3): Poisson contraction of the cross-section,
    third component zero.
    """
    points = np.atleast_2d(points)
    return rod_warping_from_jet(fields.rod_jet(points[:, 2]).W, points[:, 0], points[:, 1], m.poisson)


def rod_warping_from_jet(W: np.ndarray, X1: np.ndarray, X2: np.ndarray, nu: float) -> np.ndarray:
    d1, d2 = W[:, 0, 2], W[:, 1, 2]
    out = np.zeros((len(X1), 3))
    out[:, 0] = -nu * ((X2 ** 2 - X1 ** 2) / 2.0 * d1 - X1 * X2 * d2)
    out[:, 1] = -nu * ((X1 ** 2 - X2 ** 2) / 2.0 * d2 - X1 * X2 * d1)
    return out


def limit_strain_plate(fields: LimitFields, m: MaterialParams, points: np.ndarray,
                       warping_factor: np.ndarray | None = None) -> np.ndarray:
    """
    Limit plate strain at (x1, x2, X3), shape (P, 3, 3), with the optimal
    warping scaled pointwise by warping_factor (default 1).
    """
    points = np.atleast_2d(points)
    jet = fields.plate_jet(points[:, :2])
    X3 = points[:, 2]
    Z = membrane_tensor(jet)
    E = np.zeros((len(points), 3, 3))
    E[:, :2, :2] = Z - X3[:, None, None] * jet.hess_w
    eta = 1.0 if warping_factor is None else np.asarray(warping_factor)
    lap = np.trace(jet.hess_w, axis1=1, axis2=2)
    E[:, 2, 2] = eta * _poisson_factor(m) * (X3 * lap - np.trace(Z, axis1=1, axis2=2))
    return E


def limit_strain_rod(fields: LimitFields, m: MaterialParams, points: np.ndarray) -> np.ndarray:
    """Limit rod strain at (X1, X2, x3) with the optimal warping, shape (P, 3, 3)."""
    points = np.atleast_2d(points)
    jet = fields.rod_jet(points[:, 2])
    X1, X2 = points[:, 0], points[:, 1]
    axial = -X1 * jet.W[:, 0, 2] - X2 * jet.W[:, 1, 2]
    twist = jet.q[:, 1]
    E = np.zeros((len(points), 3, 3))
    E[:, 0, 0] = E[:, 1, 1] = -m.poisson * axial
    E[:, 2, 2] = axial
    E[:, 0, 2] = E[:, 2, 0] = -0.5 * X2 * twist
    E[:, 1, 2] = E[:, 2, 1] = 0.5 * X1 * twist
    return E


def reduced_plate_energy(fields: LimitFields, m: MaterialParams, order: int | None = None,
                         thickness_order: int = 3, warping_factor=None) -> float:
    """
    Integral of the 3D density Q(2 E_p) over omega x ]-1, 1[.

    warping_factor: callable (P, 2) -> (P,) scaling the warping, or None.
    """
    xy, w = fields.plate_quadrature(order)
    X3, w3 = gauss_legendre(thickness_order)
    total = 0.0
    eta = None if warping_factor is None else warping_factor(xy)
    for X, wk in zip(X3, w3):
        pts = np.column_stack([xy, np.full(len(xy), X)])
        E = limit_strain_plate(fields, m, pts, eta)
        total += wk * float(np.sum(w * green_energy(E, m)))
    return total


def reduced_rod_energy(fields: LimitFields, m: MaterialParams, order: int | None = None,
                       disc_order: int = 3) -> float:
    """Integral of the 3D density Q(2 E_r) over D(O, 1) x ]0, L[."""
    x3, w = fields.rod_quadrature(order)
    disc, wd = disc_rule(disc_order)
    total = 0.0
    for X, wk in zip(disc, wd):
        pts = np.column_stack([np.full(len(x3), X[0]), np.full(len(x3), X[1]), x3])
        total += wk * float(np.sum(w * green_energy(limit_strain_rod(fields, m, pts), m)))
    return total
