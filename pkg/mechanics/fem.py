"""
Junction - Plate-Rod Limit Model Solver
Finite Element Spaces, DOF Layout & Interpolation

Element families:
    U1, U2  bilinear rectangles
    U3      Bogner-Fox-Schmit bicubic rectangles (w, w_x, w_y, w_xy per node)
    W1, W2  Hermite cubics (W, W' per node)
    Q3      linear

Global layout: 6 DOFs per plate node [U1, U2, U3, U3_x, U3_y, U3_xy], then
5 DOFs per rod node [W1, W1', W2, W2', Q3].
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mechanics.errors import DofMapError, DomainError
from mechanics.geometry import PlateMesh, RodMesh
from services.logger import get_logger

logger = get_logger(__name__)

PLATE_NODE_DOFS = 6
ROD_NODE_DOFS = 5

# local node corners of a rectangle, counter-clockwise from lower-left
_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
# BFS derivative pattern per node: (d/dx order, d/dy order) for w, w_x, w_y, w_xy
_BFS_PATTERN = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])


# =============================================================================
# 1D BASES
# =============================================================================

def hermite_basis(s: np.ndarray, h, d: int = 0) -> np.ndarray:
    """
    Cubic Hermite basis on an element of length h, local coordinate s in [0, 1].

    Columns: value at left node, slope at left node, value at right node,
    slope at right node. Returns the d-th derivative with respect to x.
    """
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    if d == 0:
        N = [1 - 3 * s**2 + 2 * s**3, s - 2 * s**2 + s**3, 3 * s**2 - 2 * s**3, -s**2 + s**3]
    elif d == 1:
        N = [-6 * s + 6 * s**2, 1 - 4 * s + 3 * s**2, 6 * s - 6 * s**2, -2 * s + 3 * s**2]
    elif d == 2:
        N = [-6 + 12 * s, -4 + 6 * s, 6 - 12 * s, -2 + 6 * s]
    elif d == 3:
        one = np.ones_like(s)
        N = [12 * one, 6 * one, -12 * one, 6 * one]
    else:
        return np.zeros(s.shape + (4,))
    N = np.stack(np.broadcast_arrays(*N), axis=-1)
    scale = np.stack(np.broadcast_arrays(np.ones_like(h), h, np.ones_like(h), h), axis=-1)
    return N * scale / h[..., None] ** d if h.ndim else N * scale / float(h) ** d


def linear_basis(s: np.ndarray, h, d: int = 0) -> np.ndarray:
    """Linear basis [1 - s, s] and its x-derivative."""
    s = np.asarray(s, dtype=float)
    if d == 0:
        return np.stack([1 - s, s], axis=-1)
    h = np.asarray(h, dtype=float)
    if d == 1:
        g = np.stack(np.broadcast_arrays(-np.ones_like(s), np.ones_like(s)), axis=-1)
        return g / (h[..., None] if h.ndim else float(h))
    return np.zeros(s.shape + (2,))


# =============================================================================
# 2D BASES
# =============================================================================

def bilinear_basis(st: np.ndarray, hx: float, hy: float, dx: int = 0, dy: int = 0) -> np.ndarray:
    """Bilinear basis (…, 4) and its (dx, dy) partial derivative."""
    Lx = linear_basis(st[..., 0], hx, dx)
    Ly = linear_basis(st[..., 1], hy, dy)
    return Lx[..., _CORNERS[:, 0]] * Ly[..., _CORNERS[:, 1]]


def bfs_basis(st: np.ndarray, hx: float, hy: float, dx: int = 0, dy: int = 0) -> np.ndarray:
    """
    Bogner-Fox-Schmit basis (…, 16), node-major, DOFs (w, w_x, w_y, w_xy) per node,
    differentiated dx times in x1 and dy times in x2.
    """
    Hx = hermite_basis(st[..., 0], hx, dx)
    Hy = hermite_basis(st[..., 1], hy, dy)
    ix = (2 * _CORNERS[:, None, 0] + _BFS_PATTERN[None, :, 0]).ravel()
    iy = (2 * _CORNERS[:, None, 1] + _BFS_PATTERN[None, :, 1]).ravel()
    return Hx[..., ix] * Hy[..., iy]


# =============================================================================
# DOF MAP
# =============================================================================

@dataclass(frozen=True, eq=False)
class DofMap:
    """Global DOF numbering with the clamped and junction constraints."""
    plate_mesh: PlateMesh
    rod_mesh: RodMesh
    constrained_mask: np.ndarray

    @property
    def n_plate_dofs(self) -> int:
        return PLATE_NODE_DOFS * self.plate_mesh.n_nodes

    @property
    def n_dofs(self) -> int:
        return self.n_plate_dofs + ROD_NODE_DOFS * self.rod_mesh.n_nodes

    @cached_property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained_mask)

    @cached_property
    def constrained(self) -> np.ndarray:
        return np.flatnonzero(self.constrained_mask)

    @property
    def n_free(self) -> int:
        return len(self.free)

    def plate_dof(self, node, k: int):
        return PLATE_NODE_DOFS * np.asarray(node) + k

    def rod_dof(self, node, k: int):
        return self.n_plate_dofs + ROD_NODE_DOFS * np.asarray(node) + k

    @property
    def origin_dof(self) -> int:
        """U3 value DOF at O."""
        return int(self.plate_dof(self.plate_mesh.origin_node, 2))

    @cached_property
    def membrane_dofs(self) -> np.ndarray:
        """(E, 8): U1 at the 4 corners then U2 at the 4 corners."""
        el = self.plate_mesh.elements
        return np.hstack([self.plate_dof(el, 0), self.plate_dof(el, 1)])

    @cached_property
    def bending_dofs(self) -> np.ndarray:
        """(E, 16): BFS DOFs node-major."""
        el = self.plate_mesh.elements
        return (PLATE_NODE_DOFS * el[:, :, None] + 2 + np.arange(4)[None, None, :]).reshape(len(el), 16)

    @cached_property
    def plate_element_dofs(self) -> np.ndarray:
        """(E, 24): membrane DOFs followed by bending DOFs."""
        return np.hstack([self.membrane_dofs, self.bending_dofs])

    @cached_property
    def rod_w1_dofs(self) -> np.ndarray:
        el = self.rod_mesh.elements
        return np.column_stack([self.rod_dof(el[:, 0], 0), self.rod_dof(el[:, 0], 1),
                                self.rod_dof(el[:, 1], 0), self.rod_dof(el[:, 1], 1)])

    @cached_property
    def rod_w2_dofs(self) -> np.ndarray:
        el = self.rod_mesh.elements
        return np.column_stack([self.rod_dof(el[:, 0], 2), self.rod_dof(el[:, 0], 3),
                                self.rod_dof(el[:, 1], 2), self.rod_dof(el[:, 1], 3)])

    @cached_property
    def rod_q3_dofs(self) -> np.ndarray:
        el = self.rod_mesh.elements
        return np.column_stack([self.rod_dof(el[:, 0], 4), self.rod_dof(el[:, 1], 4)])

    def check_vector(self, values: np.ndarray):
        if np.shape(values) != (self.n_dofs,):
            raise DofMapError(f"state has {np.shape(values)} entries, DOF map expects ({self.n_dofs},)")


def build_dof_map(plate: PlateMesh, rod: RodMesh) -> DofMap:
    """
    Number all DOFs and mark the constrained ones.

    Every DOF of a node on a clamped edge is fixed (value, slopes and twist:
    a vanishing slope along an edge forces w_xy = 0 there). All five DOFs of
    the rod node at the junction are fixed. U3 at O stays free.
    """
    origin = plate.origin_node
    if not np.allclose(plate.nodes[origin], 0.0, atol=0.0):
        raise DofMapError("plate mesh has no node at O")
    n_plate = PLATE_NODE_DOFS * plate.n_nodes
    mask = np.zeros(n_plate + ROD_NODE_DOFS * rod.n_nodes, dtype=bool)
    clamped = plate.clamped_nodes
    mask[(PLATE_NODE_DOFS * clamped[:, None] + np.arange(PLATE_NODE_DOFS)).ravel()] = True
    mask[n_plate:n_plate + ROD_NODE_DOFS] = True
    dm = DofMap(plate, rod, mask)
    logger.debug(f"DOFMAP | total={dm.n_dofs} | free={dm.n_free} | constrained={len(dm.constrained)}")
    return dm


# =============================================================================
# INTERPOLATION
# =============================================================================

PLATE_FIELDS = ("u1", "u2", "u3")
ROD_FIELDS = ("w1", "w2", "q3")


def interpolate(state, field: str, points: np.ndarray, dx: int = 0, dy: int = 0) -> np.ndarray:
    """
    Evaluate a field of a state, or one of its derivatives.

    Args:
        state: Object with `dofmap` and `values` (a LimitState).
        field: One of u1, u2, u3 (points (P, 2), derivative orders dx, dy)
               or w1, w2, q3 (points (P,) axial, derivative order dx).

    Raises:
        DomainError: point outside the field's domain.
    """
    dm: DofMap = state.dofmap
    values = np.asarray(state.values)
    if field in PLATE_FIELDS:
        mesh = dm.plate_mesh
        element, st = mesh.locate(points)
        if field == "u3":
            coeff = values[dm.bending_dofs[element]]
            basis = bfs_basis(st, mesh.hx, mesh.hy, dx, dy)
        else:
            block = dm.membrane_dofs[element]
            coeff = values[block[:, :4] if field == "u1" else block[:, 4:]]
            basis = bilinear_basis(st, mesh.hx, mesh.hy, dx, dy)
        return np.sum(coeff * basis, axis=-1)
    if field in ROD_FIELDS:
        if dy:
            raise DomainError(f"rod field {field} has no x2 derivative")
        mesh = dm.rod_mesh
        element, s = mesh.locate(points)
        h = mesh.h[element]
        if field == "q3":
            return np.sum(values[dm.rod_q3_dofs[element]] * linear_basis(s, h, dx), axis=-1)
        dofs = dm.rod_w1_dofs if field == "w1" else dm.rod_w2_dofs
        return np.sum(values[dofs[element]] * hermite_basis(s, h, dx), axis=-1)
    raise DomainError(f"unknown field '{field}'")


# =============================================================================
# JETS
# =============================================================================

@dataclass(frozen=True)
class PlateJet:
    """
    Plate fields and derivatives at P points.

    grad_u[p, a, b] = d U_a / d x_b; hess_u[p, a, b, c] = d2 U_a / d x_b d x_c;
    w and its derivatives up to third order for U3.
    """
    u: np.ndarray        # (P, 2)
    grad_u: np.ndarray   # (P, 2, 2)
    hess_u: np.ndarray   # (P, 2, 2, 2)
    w: np.ndarray        # (P,)
    grad_w: np.ndarray   # (P, 2)
    hess_w: np.ndarray   # (P, 2, 2)
    third_w: np.ndarray  # (P, 2, 2, 2)


@dataclass(frozen=True)
class RodJet:
    """W[p, a, k] = k-th derivative of W_(a+1), k = 0..3; q[p, k] = Q3, Q3'."""
    W: np.ndarray  # (P, 2, 4)
    q: np.ndarray  # (P, 2)


def plate_jet(state, points: np.ndarray) -> PlateJet:
    """Full plate jet of a finite element state."""
    dm: DofMap = state.dofmap
    mesh = dm.plate_mesh
    values = np.asarray(state.values)
    element, st = mesh.locate(points)
    P = len(element)

    mem = values[dm.membrane_dofs[element]]
    c1, c2 = mem[:, :4], mem[:, 4:]
    u = np.zeros((P, 2))
    grad_u = np.zeros((P, 2, 2))
    hess_u = np.zeros((P, 2, 2, 2))
    B = bilinear_basis(st, mesh.hx, mesh.hy)
    Bx = bilinear_basis(st, mesh.hx, mesh.hy, 1, 0)
    By = bilinear_basis(st, mesh.hx, mesh.hy, 0, 1)
    Bxy = bilinear_basis(st, mesh.hx, mesh.hy, 1, 1)
    for a, c in enumerate((c1, c2)):
        u[:, a] = np.sum(c * B, axis=1)
        grad_u[:, a, 0] = np.sum(c * Bx, axis=1)
        grad_u[:, a, 1] = np.sum(c * By, axis=1)
        hess_u[:, a, 0, 1] = hess_u[:, a, 1, 0] = np.sum(c * Bxy, axis=1)

    cw = values[dm.bending_dofs[element]]

    def d(dx, dy):
        return np.sum(cw * bfs_basis(st, mesh.hx, mesh.hy, dx, dy), axis=1)

    w = d(0, 0)
    grad_w = np.stack([d(1, 0), d(0, 1)], axis=-1)
    wxx, wxy, wyy = d(2, 0), d(1, 1), d(0, 2)
    hess_w = np.stack([np.stack([wxx, wxy], -1), np.stack([wxy, wyy], -1)], axis=-2)
    third = np.zeros((P, 2, 2, 2))
    # symmetric third derivative tensor indexed by how many x2 derivatives it carries
    by_count = [d(3, 0), d(2, 1), d(1, 2), d(0, 3)]
    for i in range(2):
        for j in range(2):
            for k in range(2):
                third[:, i, j, k] = by_count[i + j + k]
    return PlateJet(u, grad_u, hess_u, w, grad_w, hess_w, third)


def rod_jet(state, x3: np.ndarray) -> RodJet:
    """Rod jet of a finite element state."""
    dm: DofMap = state.dofmap
    mesh = dm.rod_mesh
    values = np.asarray(state.values)
    element, s = mesh.locate(x3)
    h = mesh.h[element]
    W = np.zeros((len(element), 2, 4))
    for a, dofs in enumerate((dm.rod_w1_dofs, dm.rod_w2_dofs)):
        c = values[dofs[element]]
        for k in range(4):
            W[:, a, k] = np.sum(c * hermite_basis(s, h, k), axis=1)
    cq = values[dm.rod_q3_dofs[element]]
    q = np.column_stack([np.sum(cq * linear_basis(s, h, 0), axis=1),
                         np.sum(cq * linear_basis(s, h, 1), axis=1)])
    return RodJet(W, q)


# =============================================================================
# NODAL PROJECTION
# =============================================================================

def project_fields(dm: DofMap, u1=None, u2=None, u3=None, w1=None, w2=None, q3=None,
                   enforce_constraints: bool = True) -> np.ndarray:
    """
    Nodal interpolation of closed-form fields into a DOF vector.

    Args:
        u1, u2: callables (x1, x2) -> values.
        u3: callable (x1, x2) -> (w, w_x, w_y, w_xy).
        w1, w2: callables x3 -> (W, W').
        q3: callable x3 -> values.
        enforce_constraints: zero the constrained DOFs afterwards.
    """
    values = np.zeros(dm.n_dofs)
    nodes = dm.plate_mesh.nodes
    all_plate = np.arange(dm.plate_mesh.n_nodes)
    x1, x2 = nodes[:, 0], nodes[:, 1]
    if u1 is not None:
        values[dm.plate_dof(all_plate, 0)] = np.broadcast_to(u1(x1, x2), x1.shape)
    if u2 is not None:
        values[dm.plate_dof(all_plate, 1)] = np.broadcast_to(u2(x1, x2), x1.shape)
    if u3 is not None:
        for k, comp in enumerate(u3(x1, x2)):
            values[dm.plate_dof(all_plate, 2 + k)] = np.broadcast_to(comp, x1.shape)

    x3 = dm.rod_mesh.nodes
    all_rod = np.arange(dm.rod_mesh.n_nodes)
    for field, offset in ((w1, 0), (w2, 2)):
        if field is not None:
            W, dW = field(x3)
            values[dm.rod_dof(all_rod, offset)] = np.broadcast_to(W, x3.shape)
            values[dm.rod_dof(all_rod, offset + 1)] = np.broadcast_to(dW, x3.shape)
    if q3 is not None:
        values[dm.rod_dof(all_rod, 4)] = np.broadcast_to(q3(x3), x3.shape)

    if enforce_constraints:
        values[dm.constrained_mask] = 0.0
    return values
