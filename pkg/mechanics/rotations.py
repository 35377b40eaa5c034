"""
Junction - Plate-Rod Limit Model Solver
Rotation Fields on the Rod Axis

Solves dR/dx3 = A_F R with a piecewise-constant generator: on each substep
the generator is replaced by its Gauss average and the step is the exact
exponential. Node rotations are kept as scipy Rotation quaternions, so
every stored frame is a unit quaternion and orthogonal to round-off.

Usage:
    field = integrate_rotation(generator, breakpoints=[-0.25, 0.0, 0.5, 1.0])
    R, dR = field.matrices(x3), field.derivatives(x3)
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.transform import Rotation

from mechanics.errors import DomainError, GeometryError
from mechanics.geometry import gauss_legendre
from services.logger import get_logger

logger = get_logger(__name__)

E3 = np.array([0.0, 0.0, 1.0])


def antisym(F: np.ndarray) -> np.ndarray:
    """
    Antisymmetric matrix A_F with A_F x = F x x (cross product).
    Accepts (3,) or (..., 3).
    """
    F = np.asarray(F, dtype=float)
    A = np.zeros(F.shape[:-1] + (3, 3))
    A[..., 0, 1] = -F[..., 2]
    A[..., 0, 2] = F[..., 1]
    A[..., 1, 0] = F[..., 2]
    A[..., 1, 2] = -F[..., 0]
    A[..., 2, 0] = -F[..., 1]
    A[..., 2, 1] = F[..., 0]
    return A


def axial_vector(A: np.ndarray) -> np.ndarray:
    """Inverse of antisym on the antisymmetric part of A."""
    A = np.asarray(A, dtype=float)
    return 0.5 * np.stack([
        A[..., 2, 1] - A[..., 1, 2],
        A[..., 0, 2] - A[..., 2, 0],
        A[..., 1, 0] - A[..., 0, 1],
    ], axis=-1)


def exp_antisym(a: np.ndarray) -> np.ndarray:
    """exp(A_a) as rotation matrices."""
    return Rotation.from_rotvec(np.asarray(a, dtype=float)).as_matrix()


def integral_exp(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    """
    Phi(s, a) = integral_0^s exp(t A_a) dt
              = s I + (1 - cos(theta s))/theta^2 A + (theta s - sin(theta s))/theta^3 A^2.

    a: (3,) or (P, 3); s: scalar or (P,). Returns (3, 3) or (P, 3, 3).
    """
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    a_b, s_b = np.broadcast_arrays(a, s[..., None])
    theta = np.linalg.norm(a_b, axis=-1)
    s_b = s_b[..., 0]
    u = theta * s_b
    small = np.abs(u) < 1e-3
    safe_theta = np.where(theta > 0.0, theta, 1.0)
    u2 = u ** 2
    # series in u keeps both coefficients accurate as theta -> 0
    c1 = np.where(small, s_b ** 2 * (0.5 - u2 / 24.0 + u2 ** 2 / 720.0),
                  (1.0 - np.cos(u)) / safe_theta ** 2)
    c2 = np.where(small, s_b ** 3 * (1.0 / 6.0 - u2 / 120.0 + u2 ** 2 / 5040.0),
                  (u - np.sin(u)) / safe_theta ** 3)
    A = antisym(a_b)
    I = np.broadcast_to(np.eye(3), A.shape)
    return s_b[..., None, None] * I + c1[..., None, None] * A + c2[..., None, None] * (A @ A)


# =============================================================================
# ROTATION FIELD
# =============================================================================

@dataclass(frozen=True, eq=False)
class RotationField:
    """
    R(x3) on [grid[0], grid[-1]] with R(x) = exp((x - x_k) A_{a_k}) R_k on
    substep k. centerline(x) is integral_0^x (R(t) - I) e3 dt in closed form.
    """
    grid: np.ndarray            # (K + 1,) increasing, contains 0
    generators: np.ndarray      # (K, 3)
    nodes: Rotation             # K + 1 node rotations
    cumulative: np.ndarray      # (K + 1, 3) integral_0^{x_k} R e3

    @property
    def x_min(self) -> float:
        return float(self.grid[0])

    @property
    def x_max(self) -> float:
        return float(self.grid[-1])

    def _locate(self, x3: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        if np.any(x3 < self.x_min - tol) or np.any(x3 > self.x_max + tol):
            raise DomainError(f"rotation field defined on [{self.x_min:g}, {self.x_max:g}]")
        k = np.clip(np.searchsorted(self.grid, x3, side="right") - 1, 0, len(self.generators) - 1)
        return k, x3 - self.grid[k]

    def rotations(self, x3: np.ndarray) -> Rotation:
        k, t = self._locate(x3)
        return Rotation.from_rotvec(t[:, None] * self.generators[k]) * self.nodes[k]

    def matrices(self, x3: np.ndarray) -> np.ndarray:
        """R(x3), (P, 3, 3)."""
        return self.rotations(x3).as_matrix()

    def derivatives(self, x3: np.ndarray) -> np.ndarray:
        """dR/dx3 = A_{a_k} R, (P, 3, 3)."""
        k, _ = self._locate(x3)
        return antisym(self.generators[k]) @ self.matrices(x3)

    def centerline(self, x3: np.ndarray) -> np.ndarray:
        """integral_0^x3 (R(t) - I) e3 dt, (P, 3)."""
        k, t = self._locate(x3)
        phi = integral_exp(self.generators[k], t)
        Rk_e3 = self.nodes[k].apply(E3)
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        return self.cumulative[k] + np.einsum("pij,pj->pi", phi, Rk_e3) - x3[:, None] * E3

    def orthogonality_defect(self) -> float:
        """max |||R^T R - I||| over the stored node rotations."""
        R = self.nodes.as_matrix()
        return float(np.max(np.linalg.norm(np.swapaxes(R, 1, 2) @ R - np.eye(3), axis=(1, 2))))


def integrate_rotation(generator: Callable[[np.ndarray], np.ndarray], breakpoints,
                       substeps: int = 16, initial: np.ndarray | None = None,
                       max_step: float | None = None) -> RotationField:
    """
    Integrate dR/dx3 = A_F R from R(0) = initial (default identity) forwards
    and backwards over the breakpoint range.

    Args:
        generator: x3 (P,) -> F (P, 3); should be smooth between breakpoints.
        breakpoints: Points where the generator may lose smoothness; 0 is added.
        substeps: Uniform substeps per breakpoint interval.
        initial: Rotation matrix at x3 = 0.
        max_step: Upper bound on the substep length; intervals longer than
            substeps * max_step get more substeps.
    """
    if substeps < 1:
        raise GeometryError(f"substeps must be >= 1, got {substeps}")
    bp = np.unique(np.concatenate([np.asarray(breakpoints, dtype=float), [0.0]]))
    if max_step is not None and not max_step > 0.0:
        raise GeometryError(f"max_step must be positive, got {max_step}")
    if len(bp) < 2:
        raise GeometryError("rotation field needs a non-empty interval")
    counts = [substeps if max_step is None else max(substeps, int(np.ceil((b - a) / max_step)))
              for a, b in zip(bp[:-1], bp[1:])]
    pieces = [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(bp[:-1], bp[1:], counts)]
    grid = np.concatenate(pieces + [bp[-1:]])

    s, w = gauss_legendre(2, 0.0, 1.0)
    h = np.diff(grid)
    samples = grid[:-1, None] + h[:, None] * s[None, :]
    values = np.asarray(generator(samples.ravel()), dtype=float).reshape(samples.shape + (3,))
    generators = np.einsum("g,kgi->ki", w, values)

    K = len(h)
    zero = int(np.searchsorted(grid, 0.0))
    R0 = Rotation.identity() if initial is None else Rotation.from_matrix(initial)
    node_list: list[Rotation | None] = [None] * (K + 1)
    node_list[zero] = R0
    for k in range(zero, K):
        node_list[k + 1] = Rotation.from_rotvec(h[k] * generators[k]) * node_list[k]
    for k in range(zero - 1, -1, -1):
        node_list[k] = Rotation.from_rotvec(-h[k] * generators[k]) * node_list[k + 1]
    nodes = Rotation.from_quat(np.stack([r.as_quat() for r in node_list]))

    steps = np.einsum("kij,kj->ki", integral_exp(generators, h), nodes[:-1].apply(E3))
    cumulative = np.concatenate([[np.zeros(3)], np.cumsum(steps, axis=0)])
    cumulative -= cumulative[zero]

    field = RotationField(grid=grid, generators=generators, nodes=nodes, cumulative=cumulative)
    logger.debug(f"ROTATION integrated | substeps={K} | range=[{grid[0]:g}, {grid[-1]:g}]")
    return field
