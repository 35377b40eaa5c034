"""
Junction - Plate-Rod Limit Model Solver
Geometry, Meshes & Thin-Domain Quadrature

The plate mid-surface is the rectangle [-a1, a1] x [-a2, a2] with the
junction point O at the origin; the rod axis is [0, L]. Meshes are
structured so that O is always a node.

Usage:
    from mechanics.geometry import PlateDomain, RodDomain, build_plate_mesh
    plate = build_plate_mesh(PlateDomain(2.0, 2.0), (8, 8))
    rod = build_rod_mesh(RodDomain(1.0), 8)
    quad = thin_quadrature(plate, rod, delta=0.1, order=4)
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from mechanics.errors import DomainError, GeometryError
from services.logger import get_logger

logger = get_logger(__name__)


# =============================================================================
# EDGE CONSTANTS
# =============================================================================

class Edge:
    """Edges of the plate rectangle."""
    LEFT = "left"      # x1 = -a1
    RIGHT = "right"    # x1 = +a1
    BOTTOM = "bottom"  # x2 = -a2
    TOP = "top"        # x2 = +a2

    ALL = ("left", "right", "bottom", "top")


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [a, b]."""
    if order < 1:
        raise GeometryError(f"Gauss order must be >= 1, got {order}")
    xi, wi = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (xi + 1.0), half * wi


def disc_rule(order: int, n_angles: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Polar tensor rule on the unit disc.

    Radial Gauss-Legendre on [0, 1] against the weight r, uniform angles.
    Exact for polynomials in (X1, X2) of total degree <= 2*order - 2; the
    weights sum to pi up to round-off. n_angles defaults to 2*order + 2.

    Returns:
        (points (D, 2), weights (D,))
    """
    r, wr = gauss_legendre(order, 0.0, 1.0)
    n_angles = n_angles or 2 * order + 2
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    points = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    weights = np.outer(wr * r, np.full(n_angles, 2.0 * np.pi / n_angles)).ravel()
    return points, weights


# =============================================================================
# DOMAINS
# =============================================================================

@dataclass(frozen=True)
class PlateDomain:
    """Plate mid-surface rectangle with its clamped edges."""
    a1: float = 2.0
    a2: float = 2.0
    clamped: tuple[str, ...] = Edge.ALL

    def __post_init__(self):
        if not (self.a1 > 1.0 and self.a2 > 1.0):
            raise GeometryError(
                f"unit disc must lie inside the plate: need a1 > 1 and a2 > 1, got ({self.a1}, {self.a2})"
            )
        if not self.clamped:
            raise GeometryError("at least one clamped edge is required")
        unknown = [e for e in self.clamped if e not in Edge.ALL]
        if unknown:
            raise GeometryError(f"unknown clamped edges: {unknown}")
        object.__setattr__(self, "clamped", tuple(e for e in Edge.ALL if e in self.clamped))

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        points = np.atleast_2d(points)
        return (np.abs(points[:, 0]) <= self.a1 + tol) & (np.abs(points[:, 1]) <= self.a2 + tol)

    def distance_to_edge(self, edge: str, points: np.ndarray) -> np.ndarray:
        if edge == Edge.LEFT:
            return points[..., 0] + self.a1
        if edge == Edge.RIGHT:
            return self.a1 - points[..., 0]
        if edge == Edge.BOTTOM:
            return points[..., 1] + self.a2
        return self.a2 - points[..., 1]


@dataclass(frozen=True)
class RodDomain:
    """Rod axis [0, L]; delta is the 3D half-thickness used by the recovery arm."""
    length: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if not self.length > 0.0:
            raise GeometryError(f"rod length must be positive, got {self.length}")
        if not 0.0 < self.delta < 1.0:
            raise GeometryError(f"delta must lie in (0, 1), got {self.delta}")


# =============================================================================
# MESHES
# =============================================================================

@dataclass(frozen=True, eq=False)
class PlateMesh:
    """
    Structured rectangular mesh of the plate.

    Node (i, j) has index j*(nx+1) + i; element (i, j) has index j*nx + i and
    lists its corners counter-clockwise from the lower-left one.
    """
    domain: PlateDomain
    nx: int
    ny: int
    order: int = 4

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(-self.domain.a1, self.domain.a1, self.nx + 1)

    @cached_property
    def y(self) -> np.ndarray:
        return np.linspace(-self.domain.a2, self.domain.a2, self.ny + 1)

    @property
    def hx(self) -> float:
        return 2.0 * self.domain.a1 / self.nx

    @property
    def hy(self) -> float:
        return 2.0 * self.domain.a2 / self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @cached_property
    def nodes(self) -> np.ndarray:
        xx, yy = np.meshgrid(self.x, self.y, indexing="xy")
        nodes = np.column_stack([xx.ravel(), yy.ravel()])
        # exact grid values at the centre line so that O is exactly (0, 0)
        nodes[:, 0][np.isclose(nodes[:, 0], 0.0, atol=1e-14)] = 0.0
        nodes[:, 1][np.isclose(nodes[:, 1], 0.0, atol=1e-14)] = 0.0
        return nodes

    @cached_property
    def elements(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="xy")
        i, j = i.ravel(), j.ravel()
        n0 = j * (self.nx + 1) + i
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @property
    def origin_node(self) -> int:
        return (self.ny // 2) * (self.nx + 1) + self.nx // 2

    def edge_nodes(self, edge: str) -> np.ndarray:
        grid = np.arange(self.n_nodes).reshape(self.ny + 1, self.nx + 1)
        return {
            Edge.LEFT: grid[:, 0],
            Edge.RIGHT: grid[:, -1],
            Edge.BOTTOM: grid[0, :],
            Edge.TOP: grid[-1, :],
        }[edge]

    @cached_property
    def clamped_nodes(self) -> np.ndarray:
        return np.unique(np.concatenate([self.edge_nodes(e) for e in self.domain.clamped]))

    def gauss_points(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Tensor Gauss points over every element.

        Returns:
            (points (E, G, 2), weights (E, G)); points ordered element-major.
        """
        st, w = self.reference_rule(order)
        origin = self.nodes[self.elements[:, 0]]
        points = origin[:, None, :] + st[None, :, :] * np.array([self.hx, self.hy])
        weights = np.broadcast_to(w * self.hx * self.hy, (self.n_elements, len(w)))
        return points, np.array(weights)

    def reference_rule(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Gauss rule on the reference square [0, 1]^2: (st (G, 2), weights (G,))."""
        s, ws = gauss_legendre(order or self.order, 0.0, 1.0)
        ss, tt = np.meshgrid(s, s, indexing="ij")
        st = np.column_stack([ss.ravel(), tt.ravel()])
        return st, np.outer(ws, ws).ravel()

    def locate(self, points: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """
        Element index and local coordinates in [0, 1]^2 of each point.

        Raises:
            DomainError: if any point lies outside the plate.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.domain.contains(points, tol)
        if not np.all(inside):
            bad = points[~inside][0]
            raise DomainError(f"point ({bad[0]:.6g}, {bad[1]:.6g}) lies outside the plate")
        fx = (points[:, 0] + self.domain.a1) / self.hx
        fy = (points[:, 1] + self.domain.a2) / self.hy
        i = np.clip(np.floor(fx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(fy).astype(int), 0, self.ny - 1)
        local = np.column_stack([fx - i, fy - j])
        return j * self.nx + i, local


@dataclass(frozen=True, eq=False)
class RodMesh:
    """Partition of the rod axis [0, L]."""
    domain: RodDomain
    nodes: np.ndarray
    order: int = 3

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
            raise GeometryError("rod nodes must be strictly increasing with at least two entries")
        if nodes[0] != 0.0 or nodes[-1] != self.domain.length:
            raise GeometryError("rod mesh must start at 0 and end at L")
        object.__setattr__(self, "nodes", nodes)

    @property
    def length(self) -> float:
        return self.domain.length

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def elements(self) -> np.ndarray:
        k = np.arange(self.n_elements)
        return np.column_stack([k, k + 1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    def gauss_points(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points per element: (x3 (E, G), weights (E, G))."""
        s, w = gauss_legendre(order or self.order, 0.0, 1.0)
        x3 = self.nodes[:-1, None] + self.h[:, None] * s[None, :]
        return x3, self.h[:, None] * w[None, :]

    def locate(self, x3: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """Element index and local coordinate in [0, 1] of each axial point."""
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        if np.any(x3 < -tol) or np.any(x3 > self.length + tol):
            bad = x3[(x3 < -tol) | (x3 > self.length + tol)][0]
            raise DomainError(f"x3 = {bad:.6g} lies outside the rod [0, {self.length:g}]")
        k = np.clip(np.searchsorted(self.nodes, x3, side="right") - 1, 0, self.n_elements - 1)
        return k, (x3 - self.nodes[k]) / self.h[k]


def build_plate_mesh(domain: PlateDomain, resolution: int | tuple[int, int], order: int = 4) -> PlateMesh:
    """
    Build a structured mesh of the plate with a node at O.

    Args:
        domain: Plate rectangle and clamped edges.
        resolution: Element counts (nx, ny), or one count for both axes.
        order: Gauss order per direction on plate elements.

    Raises:
        GeometryError: for counts below 2 or odd counts (no node at O).
    """
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else tuple(resolution)
    if nx < 2 or ny < 2:
        raise GeometryError(f"plate resolution must be >= 2 per axis, got {nx}x{ny}")
    if nx % 2 or ny % 2:
        raise GeometryError(f"plate resolution {nx}x{ny} places no node at O; use even counts")
    mesh = PlateMesh(domain, int(nx), int(ny), order)
    logger.debug(f"MESH plate | elements={nx}x{ny} | nodes={mesh.n_nodes} | clamped={domain.clamped}")
    return mesh


def build_rod_mesh(domain: RodDomain, n_elems: int, order: int = 3) -> RodMesh:
    """Uniform partition of [0, L] into n_elems segments."""
    if n_elems < 1:
        raise GeometryError(f"rod mesh needs at least one element, got {n_elems}")
    nodes = np.linspace(0.0, domain.length, n_elems + 1)
    nodes[-1] = domain.length
    return RodMesh(domain, nodes, order)


# =============================================================================
# THIN-DOMAIN QUADRATURE
# =============================================================================

@dataclass(frozen=True, eq=False)
class ThinQuadrature:
    """
    Quadrature over the rescaled plate Omega = omega x ]-1, 1[ and the
    rescaled rod B = D(O, 1) x ]0, L[.

    Plate points are (x1, x2, X3); rod points are (X1, X2, x3). Rod axial
    points in ]0, delta[ carry zero weight: the junction cylinder belongs to
    the plate integral.
    """
    delta: float
    order: int
    plate_xy: np.ndarray          # (P, 2)
    plate_xy_weights: np.ndarray  # (P,)
    thickness: np.ndarray         # (K,) X3 in ]-1, 1[
    thickness_weights: np.ndarray
    axial: np.ndarray             # (A,) x3 in ]0, L[
    axial_weights: np.ndarray     # zero where x3 < delta
    disc: np.ndarray              # (D, 2) X in the unit disc
    disc_weights: np.ndarray
    rod_active: np.ndarray = field(repr=False)  # (A,) bool, x3 > delta

    @property
    def plate_points(self) -> np.ndarray:
        """Flattened (P*K, 3) points ordered (xy-major, X3-minor)."""
        P, K = len(self.plate_xy), len(self.thickness)
        xy = np.repeat(self.plate_xy, K, axis=0)
        return np.column_stack([xy, np.tile(self.thickness, P)])

    @property
    def plate_weights(self) -> np.ndarray:
        return np.outer(self.plate_xy_weights, self.thickness_weights).ravel()

    @property
    def rod_points(self) -> np.ndarray:
        """Flattened (A*D, 3) points ordered (axial-major, disc-minor)."""
        A, D = len(self.axial), len(self.disc)
        X = np.tile(self.disc, (A, 1))
        return np.column_stack([X, np.repeat(self.axial, D)])

    @property
    def rod_weights(self) -> np.ndarray:
        return np.outer(self.axial_weights, self.disc_weights).ravel()

    def integrate_plate(self, values: np.ndarray) -> float:
        """Integrate (P, K) or flattened values over Omega."""
        return float(np.sum(np.reshape(values, (len(self.plate_xy), -1)) * np.outer(
            self.plate_xy_weights, self.thickness_weights)))

    def integrate_rod(self, values: np.ndarray) -> float:
        """Integrate (A, D) or flattened values over B minus the junction image."""
        return float(np.sum(np.reshape(values, (len(self.axial), -1)) * np.outer(
            self.axial_weights, self.disc_weights)))


def axial_rule(breakpoints: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule over consecutive breakpoints."""
    s, w = gauss_legendre(order, 0.0, 1.0)
    h = np.diff(breakpoints)
    points = breakpoints[:-1, None] + h[:, None] * s[None, :]
    return points.ravel(), (h[:, None] * w[None, :]).ravel()


def thin_quadrature(plate: PlateMesh, rod: RodMesh, delta: float, order: int,
                    breakpoints: tuple[float, ...] = ()) -> ThinQuadrature:
    """
    Build the rescaled quadrature for the 3D energy.

    Args:
        plate: Plate mesh; in-plane points are its element Gauss points.
        rod: Rod mesh; axial points are composite Gauss over its nodes plus delta.
        delta: Half-thickness.
        order: Gauss order in every direction.
        breakpoints: Extra axial breakpoints (e.g. plateau ends of a smoothed state).
    """
    if not delta > 0.0:
        raise GeometryError(f"delta must be positive, got {delta}")
    if order < 2:
        raise GeometryError(f"quadrature order must be >= 2, got {order}")
    if delta >= rod.length:
        raise GeometryError(f"delta={delta} leaves no rod outside the junction (L={rod.length})")

    xy, wxy = plate.gauss_points(order)
    X3, w3 = gauss_legendre(order)

    cuts = np.concatenate([rod.nodes, [delta], np.asarray(breakpoints, dtype=float)])
    cuts = np.unique(cuts[(cuts >= 0.0) & (cuts <= rod.length)])
    axial, w_axial = axial_rule(cuts, order)
    active = axial > delta
    w_axial = np.where(active, w_axial, 0.0)

    disc, w_disc = disc_rule(order)
    logger.debug(
        f"QUADRATURE thin | delta={delta:g} | order={order} | plate_pts={xy.shape[0] * xy.shape[1] * len(X3)} "
        f"| rod_pts={int(active.sum()) * len(disc)}"
    )
    return ThinQuadrature(
        delta=delta, order=order,
        plate_xy=xy.reshape(-1, 2), plate_xy_weights=wxy.ravel(),
        thickness=X3, thickness_weights=w3,
        axial=axial, axial_weights=w_axial,
        disc=disc, disc_weights=w_disc,
        rod_active=active,
    )
