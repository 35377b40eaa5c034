"""
Junction - Plate-Rod Limit Model Solver
Sparse Energy / Gradient / Hessian Assembly

Element contributions are computed in vectorized batches and scattered with
scipy.sparse coo -> csr conversion, which sums duplicates in a fixed order,
so repeated assemblies are bit-identical.

The energy splits into a constant quadratic part (plate bending, rod bending
and torsion, and the geometric stiffness of the recovered-W3 load term), a
linear load part, and the nonlinear plate membrane part.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from mechanics.fem import DofMap, bfs_basis, bilinear_basis, hermite_basis, linear_basis
from mechanics.forces import ForceData
from mechanics.geometry import gauss_legendre
from mechanics.material import LimitCoefficients, MaterialParams
from services.logger import get_logger

logger = get_logger(__name__)


def _plane_stress_matrix(coefficient: float, nu: float) -> np.ndarray:
    """Quadratic form on (M11, M22, M12): coefficient [(1-nu)|M|^2 + nu (tr M)^2]."""
    return coefficient * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 2.0 * (1.0 - nu)]])


def _scatter_matrix(dofs: np.ndarray, blocks: np.ndarray, n: int) -> sparse.csr_matrix:
    rows = np.broadcast_to(dofs[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], blocks.shape).ravel()
    return sparse.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _symmetrize(blocks: np.ndarray) -> np.ndarray:
    return 0.5 * (blocks + np.swapaxes(blocks, -1, -2))


@dataclass(frozen=True)
class LoadTerms:
    """Linear load vector b, total axial load S and geometric element matrices."""
    b: np.ndarray
    S: float
    geometric: np.ndarray  # (Er, 4, 4), acts on W1 and W2 element DOFs


class EnergyModel:
    """
    Total limit energy of a DOF vector with exact first and second derivatives.

    Args:
        dm: DOF map (meshes and constraints).
        fd: Force data.
        m: Material.
        coefficients: Rod torsion / couple-load factors.
    """

    def __init__(self, dm: DofMap, fd: ForceData, m: MaterialParams,
                 coefficients: LimitCoefficients | None = None):
        self.dm = dm
        self.fd = fd
        self.m = m
        self.coefficients = coefficients or LimitCoefficients.consistent()
        self.n = dm.n_dofs

        mesh = dm.plate_mesh
        st, wref = mesh.reference_rule()
        self.weights = wref * mesh.hx * mesh.hy
        hx, hy = mesh.hx, mesh.hy
        self.Bm = bilinear_basis(st, hx, hy)
        self.Bmx = bilinear_basis(st, hx, hy, 1, 0)
        self.Bmy = bilinear_basis(st, hx, hy, 0, 1)
        self.Bb = bfs_basis(st, hx, hy)
        self.Bbx = bfs_basis(st, hx, hy, 1, 0)
        self.Bby = bfs_basis(st, hx, hy, 0, 1)
        self.Mm = _plane_stress_matrix(m.plate_membrane, m.poisson)

        # geometric second derivatives of (Z11, Z22, Z12) in the bending block
        self.Pz = np.stack([
            np.einsum("gi,gj->gij", self.Bbx, self.Bbx),
            np.einsum("gi,gj->gij", self.Bby, self.Bby),
            0.5 * (np.einsum("gi,gj->gij", self.Bbx, self.Bby) + np.einsum("gi,gj->gij", self.Bby, self.Bbx)),
        ])

        self.loads = self._build_loads()
        self.H_const = self._build_constant_hessian()
        logger.debug(
            f"ASSEMBLY ready | dofs={self.n} | plate_elements={mesh.n_elements} "
            f"| rod_elements={dm.rod_mesh.n_elements} | coefficients={self.coefficients.name}"
        )

    # -------------------------------------------------------------------------
    # constant parts
    # -------------------------------------------------------------------------

    def _build_constant_hessian(self) -> sparse.csr_matrix:
        dm, m, mesh = self.dm, self.m, self.dm.plate_mesh
        st, _ = mesh.reference_rule()
        Jk = np.stack([
            bfs_basis(st, mesh.hx, mesh.hy, 2, 0),
            bfs_basis(st, mesh.hx, mesh.hy, 0, 2),
            bfs_basis(st, mesh.hx, mesh.hy, 1, 1),
        ], axis=1)  # (G, 3, 16)
        Mb = _plane_stress_matrix(m.plate_bending, m.poisson)
        Kb = 2.0 * np.einsum("g,gki,kl,glj->ij", self.weights, Jk, Mb, Jk)
        Kb = _symmetrize(np.broadcast_to(Kb, (mesh.n_elements, 16, 16)))
        H = _scatter_matrix(dm.bending_dofs, Kb, self.n)

        rod = dm.rod_mesh
        s, w = gauss_legendre(rod.order, 0.0, 1.0)
        h = rod.h[:, None]
        H2 = hermite_basis(s[None, :], h, 2)       # (E, G, 4)
        Lq = linear_basis(s[None, :], h, 1)        # (E, G, 2)
        wr = h * w[None, :]
        Kr = _symmetrize(2.0 * m.rod_bending * np.einsum("eg,egi,egj->eij", wr, H2, H2))
        Kt = _symmetrize(2.0 * self.coefficients.rod_torsion(m) * np.einsum("eg,egi,egj->eij", wr, Lq, Lq))
        Kg = _symmetrize(np.pi * self.loads.geometric)
        H = H + _scatter_matrix(dm.rod_w1_dofs, Kr + Kg, self.n)
        H = H + _scatter_matrix(dm.rod_w2_dofs, Kr + Kg, self.n)
        H = H + _scatter_matrix(dm.rod_q3_dofs, Kt, self.n)
        return H.tocsr()

    def _build_loads(self) -> LoadTerms:
        dm, fd = self.dm, self.fd
        b = np.zeros(self.n)

        pts, _ = dm.plate_mesh.gauss_points()
        fp = fd.plate_force(pts[..., 0].ravel(), pts[..., 1].ravel()).reshape(pts.shape[:2] + (3,))
        W = self.weights
        mem = dm.membrane_dofs
        np.add.at(b, mem[:, :4], 2.0 * np.einsum("g,eg,gi->ei", W, fp[..., 0], self.Bm))
        np.add.at(b, mem[:, 4:], 2.0 * np.einsum("g,eg,gi->ei", W, fp[..., 1], self.Bm))
        np.add.at(b, dm.bending_dofs, 2.0 * np.einsum("g,eg,gi->ei", W, fp[..., 2], self.Bb))

        rod = dm.rod_mesh
        s, w = gauss_legendre(rod.order, 0.0, 1.0)
        h = rod.h[:, None]
        x3 = rod.nodes[:-1, None] + h * s[None, :]
        wr = h * w[None, :]
        fr = fd.rod_force(x3.ravel()).reshape(x3.shape + (3,))
        g1, g2 = (g.reshape(x3.shape + (3,)) for g in fd.couple(x3.ravel()))
        H0 = hermite_basis(s[None, :], h, 0)
        H1 = hermite_basis(s[None, :], h, 1)
        L0 = linear_basis(s[None, :], h, 0) * np.ones_like(h)[..., None]
        cg = self.coefficients.couple_factor
        np.add.at(b, dm.rod_w1_dofs, np.einsum("eg,egi->ei", wr * (np.pi * fr[..., 0]), H0)
                  - cg * np.einsum("eg,egi->ei", wr * g1[..., 2], H1))
        np.add.at(b, dm.rod_w2_dofs, np.einsum("eg,egi->ei", wr * (np.pi * fr[..., 1]), H0)
                  - cg * np.einsum("eg,egi->ei", wr * g2[..., 2], H1))
        np.add.at(b, dm.rod_q3_dofs, cg * np.einsum("eg,egi->ei", wr * (g1[..., 1] - g2[..., 0]), L0))

        weighted = (wr * fr[..., 2]).ravel()
        S = float(np.sum(weighted))
        geometric = self._geometric_matrices(x3.ravel(), weighted)
        return LoadTerms(b=b, S=S, geometric=geometric)

    def _geometric_matrices(self, xq: np.ndarray, cq: np.ndarray) -> np.ndarray:
        """
        Element matrices G_e with sum_q c_q int_0^{x_q} |W'|^2 = sum_e W_e^T G_e W_e.

        Each sub-interval between consecutive nodes / load points carries the
        load weight still ahead of it.
        """
        rod = self.dm.rod_mesh
        t = np.unique(np.concatenate([rod.nodes, xq]))
        c_at_t = np.zeros(len(t))
        np.add.at(c_at_t, np.searchsorted(t, xq), cq)
        # interval j carries every load point at or beyond t_{j+1}
        ahead = np.cumsum(c_at_t[::-1])[::-1][1:]

        s, w = gauss_legendre(self.dm.rod_mesh.order, 0.0, 1.0)
        left, span = t[:-1], np.diff(t)
        element = np.clip(np.searchsorted(rod.nodes, left, side="right") - 1, 0, rod.n_elements - 1)
        h = rod.h[element][:, None]
        local = (left[:, None] + span[:, None] * s[None, :] - rod.nodes[element][:, None]) / h
        H1 = hermite_basis(local, h, 1)
        blocks = np.einsum("j,g,jgi,jgk->jik", ahead * span, w, H1, H1)
        geometric = np.zeros((rod.n_elements, 4, 4))
        np.add.at(geometric, element, blocks)
        return geometric

    # -------------------------------------------------------------------------
    # membrane part
    # -------------------------------------------------------------------------

    def _membrane_fields(self, x: np.ndarray):
        dm = self.dm
        mem = x[dm.membrane_dofs]
        a1, a2 = mem[:, :4], mem[:, 4:]
        wd = x[dm.bending_dofs]
        U1x, U1y = a1 @ self.Bmx.T, a1 @ self.Bmy.T
        U2x, U2y = a2 @ self.Bmx.T, a2 @ self.Bmy.T
        wx, wy = wd @ self.Bbx.T, wd @ self.Bby.T
        z = np.stack([
            U1x + 0.5 * wx ** 2,
            U2y + 0.5 * wy ** 2,
            0.5 * (U1y + U2x) + 0.5 * wx * wy,
        ], axis=-1)  # (E, G, 3)
        return z, wx, wy

    def _membrane_energy(self, z: np.ndarray) -> float:
        return float(np.einsum("g,egk,kl,egl->", self.weights, z, self.Mm, z))

    def _membrane_jacobian(self, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
        E, G = wx.shape
        J = np.zeros((E, G, 3, 24))
        J[:, :, 0, 0:4] = self.Bmx
        J[:, :, 0, 8:] = wx[..., None] * self.Bbx
        J[:, :, 1, 4:8] = self.Bmy
        J[:, :, 1, 8:] = wy[..., None] * self.Bby
        J[:, :, 2, 0:4] = 0.5 * self.Bmy
        J[:, :, 2, 4:8] = 0.5 * self.Bmx
        J[:, :, 2, 8:] = 0.5 * (wy[..., None] * self.Bbx + wx[..., None] * self.Bby)
        return J

    # -------------------------------------------------------------------------
    # public interface
    # -------------------------------------------------------------------------

    def _quadratic_and_linear(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        Hx = self.H_const @ x
        energy = 0.5 * float(x @ Hx) - float(self.loads.b @ x) - np.pi * self.loads.S * x[self.dm.origin_dof]
        grad = Hx - self.loads.b
        grad[self.dm.origin_dof] -= np.pi * self.loads.S
        return energy, grad

    def energy(self, x: np.ndarray) -> float:
        z, _, _ = self._membrane_fields(x)
        e, _ = self._quadratic_and_linear(x)
        return e + self._membrane_energy(z)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x, hessian=False)[1]

    def evaluate(self, x: np.ndarray, hessian: bool = True):
        """
        Returns:
            (energy, full gradient (n,), full Hessian csr or None)
        """
        x = np.asarray(x, dtype=float)
        self.dm.check_vector(x)
        z, wx, wy = self._membrane_fields(x)
        e, grad = self._quadratic_and_linear(x)
        e += self._membrane_energy(z)

        J = self._membrane_jacobian(wx, wy)
        Mz = z @ self.Mm
        dofs = self.dm.plate_element_dofs
        g_el = 2.0 * np.einsum("g,egki,egk->ei", self.weights, J, Mz)
        grad = grad + np.bincount(dofs.ravel(), weights=g_el.ravel(), minlength=self.n)

        if not hessian:
            return e, grad, None

        K = 2.0 * np.einsum("g,egki,kl,eglj->eij", self.weights, J, self.Mm, J, optimize=True)
        K[:, 8:, 8:] += 2.0 * np.einsum("g,egk,kgij->eij", self.weights, Mz, self.Pz, optimize=True)
        H = self.H_const + _scatter_matrix(dofs, _symmetrize(K), self.n)
        return e, grad, H.tocsr()


def assemble_energy_gradient_hessian(state, fd: ForceData, m: MaterialParams, dm: DofMap | None = None,
                                     coefficients: LimitCoefficients | None = None):
    """
    Energy, gradient and Hessian restricted to the free DOFs.

    Returns:
        (energy, gradient (n_free,), Hessian csr (n_free, n_free))
    """
    dm = dm or state.dofmap
    model = EnergyModel(dm, fd, m, coefficients)
    e, g, H = model.evaluate(state.values)
    free = dm.free
    return e, g[free], H[free][:, free].tocsr()


def linearized_stiffness(dm: DofMap, m: MaterialParams,
                         coefficients: LimitCoefficients | None = None) -> sparse.csr_matrix:
    """Hessian at the zero state without loads, on the free DOFs.

    Includes the in-plane membrane block, which lives only in the
    state-dependent part of the Hessian.
    """
    model = EnergyModel(dm, ForceData.zero(), m, coefficients)
    _, _, H = model.evaluate(np.zeros(dm.n_dofs))
    free = dm.free
    return H[free][:, free].tocsr()
