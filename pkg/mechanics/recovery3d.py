"""
Junction - Plate-Rod Limit Model Solver
3D Recovery Deformations & Rescaled Energies

A limit state is first flattened near the junction (smooth_state), then
lifted to an explicit 3D deformation of the thin structure (build_recovery)
whose rescaled energy is evaluated by quadrature (rescaled_energy). A sweep
over decreasing thicknesses shows the rescaled energies approaching the
limit energy (delta_sweep).

Usage:
    ss = smooth_state(report.state, n=4, fd=fd, m=m)
    table = delta_sweep(ss, fd, m, deltas=[0.2, 0.1, 0.05])
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from mechanics.decomposition import PlateSampleGrid, RodSampleGrid, SampledField3D
from mechanics.errors import RecoveryError
from mechanics.fem import PlateJet, RodJet
from mechanics.forces import ForceData, eval_f_delta
from mechanics.geometry import Edge, PlateMesh, RodMesh, axial_rule, thin_quadrature
from mechanics.limit_model import (
    LimitState,
    load_functional,
    membrane_tensor,
    reduced_plate_energy,
    reduced_rod_energy,
    total_energy,
)
from mechanics.material import NONPHYSICAL, LimitCoefficients, MaterialParams, dist_SO3, green_energy
from mechanics.rotations import E3, RotationField, antisym, exp_antisym, integral_exp, integrate_rotation
from services.logger import get_logger, log_sweep_row

logger = get_logger(__name__)

FRAMES = ("rate", "initial")
# rotation substeps are at most this fraction of delta
ROTATION_STEP_FRACTION = 0.125


# =============================================================================
# SMOOTH CUT-OFF
# =============================================================================

def smoothstep(u: np.ndarray, d: int = 0) -> np.ndarray:
    """Quintic C2 step S(u) = 10u^3 - 15u^4 + 6u^5 on [0, 1], 0 below, 1 above; d-th derivative."""
    u = np.asarray(u, dtype=float)
    c = np.clip(u, 0.0, 1.0)
    inside = (u > 0.0) & (u < 1.0)
    if d == 0:
        return 10 * c**3 - 15 * c**4 + 6 * c**5
    if d == 1:
        value = 30 * c**2 - 60 * c**3 + 30 * c**4
    elif d == 2:
        value = 60 * c - 180 * c**2 + 120 * c**3
    elif d == 3:
        value = 60 - 360 * c + 360 * c**2
    else:
        raise ValueError(f"derivative order {d} not supported")
    return np.where(inside, value, 0.0)


@dataclass(frozen=True)
class RadialCutoff:
    """
    chi(x) = S((n^2 |x|^2 - 1) / 3): 0 on D(O, 1/n), 1 outside D(O, 2/n).
    Derivatives up to third order in (x1, x2).
    """
    n: float

    def jet(self, xy: np.ndarray):
        xy = np.atleast_2d(xy)
        k = 2.0 * self.n ** 2 / 3.0
        u = (self.n ** 2 * np.sum(xy ** 2, axis=1) - 1.0) / 3.0
        S0, S1, S2, S3 = (smoothstep(u, d) for d in range(4))
        I = np.eye(2)
        xx = np.einsum("pi,pj->pij", xy, xy)
        grad = (S1 * k)[:, None] * xy
        hess = (S2 * k ** 2)[:, None, None] * xx + (S1 * k)[:, None, None] * I
        sym = (np.einsum("ij,pl->pijl", I, xy) + np.einsum("il,pj->pijl", I, xy)
               + np.einsum("jl,pi->pijl", I, xy))
        third = ((S3 * k ** 3)[:, None, None, None] * np.einsum("pi,pj,pl->pijl", xy, xy, xy)
                 + (S2 * k ** 2)[:, None, None, None] * sym)
        return S0, grad, hess, third


def rod_cutoff(x3: np.ndarray, n: float, d: int = 0) -> np.ndarray:
    """chi_r(x3) = S(n x3 - 1): 0 for x3 <= 1/n, 1 for x3 >= 2/n."""
    return n ** d * smoothstep(n * np.asarray(x3, dtype=float) - 1.0, d)


# =============================================================================
# SMOOTHED STATE
# =============================================================================

@dataclass(frozen=True, eq=False)
class SmoothedLimitState:
    """
    Limit state flattened near the junction:
        U_a  -> U_a(O) + chi (U_a - U_a(O))           (grad U_a = 0 on D(O, 1/n))
        U_3  -> A + chi (U_3 - A), A affine at O       (D^2 U_3 = 0 on D(O, 1/n))
        W_a, Q_3 -> chi_r W_a, chi_r Q_3               (zero on [-1/n, 1/n])
    Values and first derivatives at O are unchanged.
    """
    state: LimitState
    n: int
    plate_order: int = 8
    energy_change: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise RecoveryError(f"plateau parameter n must be >= 2, got {self.n}")
        domain = self.plate_mesh.domain
        if not 2.0 / self.n < min(domain.a1, domain.a2):
            raise RecoveryError(f"n={self.n}: transition disc D(O, 2/n) must lie inside the plate")
        if 2.0 / self.n > self.rod_mesh.length:
            raise RecoveryError(f"n={self.n}: rod transition [1/n, 2/n] must lie inside [0, L]")

    @property
    def plate_mesh(self) -> PlateMesh:
        return self.state.plate_mesh

    @property
    def rod_mesh(self) -> RodMesh:
        return self.state.rod_mesh

    @property
    def cutoff(self) -> RadialCutoff:
        return RadialCutoff(float(self.n))

    @property
    def origin_value(self) -> float:
        return self.state.origin_value

    @property
    def origin_gradient(self) -> np.ndarray:
        return self.state.origin_gradient

    @property
    def origin_displacement(self) -> np.ndarray:
        return self.state.origin_displacement

    @property
    def rod_breakpoints(self) -> np.ndarray:
        extra = np.array([-1.0 / self.n, 1.0 / self.n, 2.0 / self.n])
        return np.unique(np.concatenate([self.rod_mesh.nodes, extra]))

    @property
    def rod_exact_order(self) -> int:
        # cutoff (quintic) times Hermite cubic slopes, squared
        return 9

    def plate_quadrature(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        xy, w = self.plate_mesh.gauss_points(order or self.plate_order)
        return xy.reshape(-1, 2), w.ravel()

    def rod_quadrature(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        bp = self.rod_breakpoints
        return axial_rule(bp[bp >= 0.0], order or self.rod_exact_order)

    def plate_jet(self, points: np.ndarray) -> PlateJet:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        base = self.state.plate_jet(points)
        chi, dchi, d2chi, d3chi = self.cutoff.jet(points)

        U0 = self.origin_displacement
        D = base.u - U0
        u = U0 + chi[:, None] * D
        grad_u = np.einsum("pa,pb->pab", D, dchi) + chi[:, None, None] * base.grad_u
        hess_u = (np.einsum("pa,pbc->pabc", D, d2chi)
                  + np.einsum("pab,pc->pabc", base.grad_u, dchi)
                  + np.einsum("pac,pb->pabc", base.grad_u, dchi)
                  + chi[:, None, None, None] * base.hess_u)

        g = self.origin_gradient
        A = self.origin_value + points @ g
        Dw = base.w - A
        dD = base.grad_w - g
        w = A + chi * Dw
        grad_w = g + dchi * Dw[:, None] + chi[:, None] * dD
        hess_w = (d2chi * Dw[:, None, None] + np.einsum("pi,pj->pij", dchi, dD)
                  + np.einsum("pj,pi->pij", dchi, dD) + chi[:, None, None] * base.hess_w)
        third_w = (d3chi * Dw[:, None, None, None]
                   + np.einsum("pij,pl->pijl", d2chi, dD)
                   + np.einsum("pil,pj->pijl", d2chi, dD)
                   + np.einsum("pjl,pi->pijl", d2chi, dD)
                   + np.einsum("pi,pjl->pijl", dchi, base.hess_w)
                   + np.einsum("pj,pil->pijl", dchi, base.hess_w)
                   + np.einsum("pl,pij->pijl", dchi, base.hess_w)
                   + chi[:, None, None, None] * base.third_w)
        return PlateJet(u, grad_u, hess_u, w, grad_w, hess_w, third_w)

    def rod_jet(self, x3: np.ndarray) -> RodJet:
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        # the cut-off vanishes below 1/n, so the rod is only sampled on [0, L]
        base = self.state.rod_jet(np.clip(x3, 0.0, self.rod_mesh.length))
        c = [rod_cutoff(x3, self.n, d) for d in range(4)]
        Wb = base.W
        W = np.zeros_like(Wb)
        W[:, :, 0] = c[0][:, None] * Wb[:, :, 0]
        W[:, :, 1] = c[1][:, None] * Wb[:, :, 0] + c[0][:, None] * Wb[:, :, 1]
        W[:, :, 2] = (c[2][:, None] * Wb[:, :, 0] + 2 * c[1][:, None] * Wb[:, :, 1]
                      + c[0][:, None] * Wb[:, :, 2])
        W[:, :, 3] = (c[3][:, None] * Wb[:, :, 0] + 3 * c[2][:, None] * Wb[:, :, 1]
                      + 3 * c[1][:, None] * Wb[:, :, 2] + c[0][:, None] * Wb[:, :, 3])
        q = np.column_stack([c[0] * base.q[:, 0], c[1] * base.q[:, 0] + c[0] * base.q[:, 1]])
        return RodJet(W, q)


def smooth_state(s: LimitState, n: int, fd: ForceData | None = None, m: MaterialParams | None = None,
                 coefficients: LimitCoefficients | None = None) -> SmoothedLimitState:
    """
    Flatten a limit state near the junction with plateau parameter n.

    When fd and m are given the change |J(smoothed) - J(s)| is computed,
    logged and stored on the result.

    Raises:
        RecoveryError: n < 2 or the transition regions do not fit the domains.
    """
    ss = SmoothedLimitState(s, int(n))
    if fd is None or m is None:
        return ss
    change = abs(total_energy(ss, fd, m, coefficients) - total_energy(s, fd, m, coefficients))
    logger.info(f"SMOOTH n={n} | energy_change={change:.3e}")
    return SmoothedLimitState(s, int(n), ss.plate_order, change)


# =============================================================================
# RECOVERY FIELD
# =============================================================================

@dataclass(frozen=True)
class Kinematics:
    """Displacement u, gradient F = grad v, Green-St Venant tensor E and det F at physical points."""
    u: np.ndarray       # (P, 3)
    F: np.ndarray       # (P, 3, 3)
    E: np.ndarray       # (P, 3, 3)

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.F)


def _rod_warping(W: np.ndarray, X1: np.ndarray, X2: np.ndarray, nu: float):
    """Poisson warping of the cross-section and its (X1, X2, x3) derivatives."""
    d1, d2 = W[:, 0, 2], W[:, 1, 2]
    t1, t2 = W[:, 0, 3], W[:, 1, 3]
    zero = np.zeros_like(X1)

    def value(a, b):
        return np.column_stack([
            -nu * ((X2 ** 2 - X1 ** 2) / 2.0 * a - X1 * X2 * b),
            -nu * ((X1 ** 2 - X2 ** 2) / 2.0 * b - X1 * X2 * a),
            zero,
        ])

    dX1 = np.column_stack([-nu * (-X1 * d1 - X2 * d2), -nu * (X1 * d2 - X2 * d1), zero])
    dX2 = np.column_stack([-nu * (X2 * d1 - X1 * d2), -nu * (-X2 * d2 - X1 * d1), zero])
    return value(d1, d2), dX1, dX2, value(t1, t2)


@dataclass(frozen=True, eq=False)
class RecoveryField:
    """
    Explicit 3D deformation of the thin structure built from a smoothed
    limit state, evaluable pointwise with analytic gradients.

    Plate (|x3| < delta):
        u_a = delta^2 (U_a - X3 d_a U3),  u_3 = delta U3 + delta^3 ubar_3,  X3 = x3 / delta
    Rod (x3 > delta, |x_a| < delta):
        u = W_delta(x3) + (R - I) xhat + delta^(5/2) vbar(x / delta, x3) + vtilde
    """
    ss: SmoothedLimitState
    delta: float
    m: MaterialParams
    rotation: RotationField
    frame: str = "rate"
    boundary_layer: float = 0.05

    @property
    def n(self) -> int:
        return self.ss.n

    @property
    def junction_rotation_vector(self) -> np.ndarray:
        g = self.ss.origin_gradient
        return np.array([g[1], -g[0], 0.0])

    @property
    def centerline_origin(self) -> np.ndarray:
        U0 = self.ss.origin_displacement
        d = self.delta
        return np.array([d ** 2 * U0[0], d ** 2 * U0[1], d * self.ss.origin_value])

    # -------------------------------------------------------------------------
    # plate
    # -------------------------------------------------------------------------

    def plate_warping_factor(self, xy: np.ndarray, with_gradient: bool = False):
        """eta = chi(x) * product over clamped edges of S(d_e / boundary_layer)."""
        xy = np.atleast_2d(xy)
        chi, dchi, _, _ = self.ss.cutoff.jet(xy)
        eta = chi.copy()
        grad = dchi.copy()
        domain = self.ss.plate_mesh.domain
        normals = {Edge.LEFT: (1.0, 0.0), Edge.RIGHT: (-1.0, 0.0), Edge.BOTTOM: (0.0, 1.0), Edge.TOP: (0.0, -1.0)}
        for edge in domain.clamped:
            t = domain.distance_to_edge(edge, xy) / self.boundary_layer
            s0, s1 = smoothstep(t), smoothstep(t, 1) / self.boundary_layer
            grad = grad * s0[:, None] + eta[:, None] * s1[:, None] * np.array(normals[edge])
            eta = eta * s0
        return (eta, grad) if with_gradient else eta

    def plate_kinematics(self, x: np.ndarray) -> Kinematics:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.delta
        X3 = x[:, 2] / d
        jet = self.ss.plate_jet(x[:, :2])
        k = self.m.poisson / (1.0 - self.m.poisson)
        eta, deta = self.plate_warping_factor(x[:, :2], with_gradient=True)

        lap = np.trace(jet.hess_w, axis1=1, axis2=2)
        trZ = np.trace(membrane_tensor(jet), axis1=1, axis2=2)
        dlap = np.einsum("pggb->pb", jet.third_w)
        dtrZ = (jet.hess_u[:, 0, 0, :] + jet.hess_u[:, 1, 1, :]
                + np.einsum("pg,pgb->pb", jet.grad_w, jet.hess_w))
        shape = X3 ** 2 / 2.0 - 1.0 / 6.0
        bracket = shape * lap - X3 * trZ
        ubar = eta * k * bracket
        dubar = (deta * (k * bracket)[:, None]
                 + (eta * k)[:, None] * (shape[:, None] * dlap - X3[:, None] * dtrZ))
        dubar_dX3 = eta * k * (X3 * lap - trZ)
        # cancels the 1/2 |grad U3|^2 the plate rotation leaves in E_33
        slope_sq = np.sum(jet.grad_w ** 2, axis=1)
        ubar = ubar - 0.5 * X3 * slope_sq
        dubar = dubar - X3[:, None] * np.einsum("pab,pb->pa", jet.hess_w, jet.grad_w)
        dubar_dX3 = dubar_dX3 - 0.5 * slope_sq

        P = len(x)
        u = np.zeros((P, 3))
        u[:, :2] = d ** 2 * (jet.u - X3[:, None] * jet.grad_w)
        u[:, 2] = d * jet.w + d ** 3 * ubar
        G = np.zeros((P, 3, 3))
        G[:, :2, :2] = d ** 2 * (jet.grad_u - X3[:, None, None] * jet.hess_w)
        G[:, :2, 2] = -d * jet.grad_w
        G[:, 2, :2] = d * jet.grad_w + d ** 3 * dubar
        G[:, 2, 2] = d ** 2 * dubar_dX3
        E = 0.5 * (G + np.swapaxes(G, 1, 2) + np.einsum("pki,pkj->pij", G, G))
        return Kinematics(u, np.eye(3) + G, E)

    # -------------------------------------------------------------------------
    # rod
    # -------------------------------------------------------------------------

    def _reference_frame(self, x3: np.ndarray):
        """(Rbar, dRbar/dx3, Wbar) of the matching correction."""
        a = self.delta * self.junction_rotation_vector
        W0 = self.centerline_origin
        if self.frame == "rate":
            Rbar = exp_antisym(x3[:, None] * a)
            dRbar = antisym(a) @ Rbar
            Wbar = integral_exp(np.broadcast_to(a, (len(x3), 3)), x3) @ E3 - x3[:, None] * E3 + W0
        else:
            Rbar = np.broadcast_to(exp_antisym(a), (len(x3), 3, 3))
            dRbar = np.zeros((len(x3), 3, 3))
            Wbar = x3[:, None] * (Rbar[:, :, 2] - E3) + W0
        return Rbar, dRbar, Wbar

    def corrector(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """vtilde and its gradient at physical rod points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.delta
        g = self.ss.origin_gradient
        U0 = self.ss.origin_displacement
        x3 = x[:, 2]
        xhat = np.column_stack([x[:, 0], x[:, 1], np.zeros(len(x))])
        Rbar, dRbar, Wbar = self._reference_frame(x3)

        c = np.column_stack([
            d ** 2 * U0[0] - d * x3 * g[0],
            d ** 2 * U0[1] - d * x3 * g[1],
            d * self.ss.origin_value + d * (x[:, 0] * g[0] + x[:, 1] * g[1]) - 0.5 * d ** 2 * (g @ g) * x3,
        ])
        grad_c = np.zeros((len(x), 3, 3))
        grad_c[:, 0, 2] = -d * g[0]
        grad_c[:, 1, 2] = -d * g[1]
        grad_c[:, 2, 0] = d * g[0]
        grad_c[:, 2, 1] = d * g[1]
        grad_c[:, 2, 2] = -0.5 * d ** 2 * (g @ g)

        RmI = Rbar - np.eye(3)
        value = c - Wbar - np.einsum("pij,pj->pi", RmI, xhat)
        grad = grad_c.copy()
        grad[:, :, 0] -= RmI[:, :, 0]
        grad[:, :, 1] -= RmI[:, :, 1]
        grad[:, :, 2] -= RmI[:, :, 2] + np.einsum("pij,pj->pi", dRbar, xhat)
        return value, grad

    def rod_kinematics(self, x: np.ndarray) -> Kinematics:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.delta
        x3 = x[:, 2]
        X1, X2 = x[:, 0] / d, x[:, 1] / d
        xhat = np.column_stack([x[:, 0], x[:, 1], np.zeros(len(x))])

        R = self.rotation.matrices(x3)
        dR = self.rotation.derivatives(x3)
        Wd = self.rotation.centerline(x3) + self.centerline_origin
        vbar, dX1, dX2, d3 = _rod_warping(self.ss.rod_jet(x3).W, X1, X2, self.m.poisson)
        vt, grad_vt = self.corrector(x)

        u = Wd + np.einsum("pij,pj->pi", R - np.eye(3), xhat) + d ** 2.5 * vbar + vt
        # grad v = R + K keeps the small part separate from the rotation
        K = grad_vt.copy()
        K[:, :, 0] += d ** 1.5 * dX1
        K[:, :, 1] += d ** 1.5 * dX2
        K[:, :, 2] += np.einsum("pij,pj->pi", dR, xhat) + d ** 2.5 * d3
        RtK = np.einsum("pki,pkj->pij", R, K)
        E = 0.5 * (RtK + np.swapaxes(RtK, 1, 2) + np.einsum("pki,pkj->pij", K, K))
        return Kinematics(u, R + K, E)

    # -------------------------------------------------------------------------
    # sampling
    # -------------------------------------------------------------------------

    def evaluate(self, x: np.ndarray, region: str) -> Kinematics:
        if region == "plate":
            return self.plate_kinematics(x)
        if region == "rod":
            return self.rod_kinematics(x)
        raise RecoveryError(f"unknown region '{region}' (expected plate or rod)")

    def sample(self, grid: PlateSampleGrid | RodSampleGrid, field: str = "displacement") -> SampledField3D:
        """Sample on a decomposition grid with analytic gradients."""
        region = "plate" if isinstance(grid, PlateSampleGrid) else "rod"
        kin = self.evaluate(grid.points, region)
        if field == "displacement":
            return SampledField3D(grid, kin.u, field, kin.F - np.eye(3))
        return SampledField3D(grid, grid.points + kin.u, field, kin.F)

    def interface_mismatch(self, points: np.ndarray) -> float:
        """max |u_plate - u_rod| at points of the junction cylinder."""
        a = self.plate_kinematics(points).u
        b = self.rod_kinematics(points).u
        return float(np.max(np.abs(a - b))) if len(points) else 0.0

    def junction_points(self, count: int = 20, seed: int = 0) -> np.ndarray:
        """Random points on the lateral surface and top face of the junction cylinder."""
        rng = np.random.default_rng(seed)
        d = self.delta
        theta = rng.uniform(0.0, 2.0 * np.pi, count)
        lateral = np.column_stack([d * np.cos(theta), d * np.sin(theta), rng.uniform(-d, d, count)])
        r = d * np.sqrt(rng.uniform(0.0, 1.0, count))
        phi = rng.uniform(0.0, 2.0 * np.pi, count)
        top = np.column_stack([r * np.cos(phi), r * np.sin(phi), np.full(count, d)])
        return np.vstack([lateral, top])


def integrate_recovery_rotation(ss: SmoothedLimitState, delta: float, frame: str = "rate",
                                substeps: int = 16) -> RotationField:
    """
    Junction rotation field on [-1/n, L]:
        rate:    R(0) = I,            generator delta^(1/2) Q' + delta R_O
        initial: R(0) = exp(delta A_RO), generator delta^(1/2) Q'
    with Q = (-W2', W1', Q3) of the smoothed state and R_O = (d2 U3, -d1 U3, 0)(O).

    The generator is held constant on each substep, so dR/dx3 is exact only
    up to the substep length. Substeps are capped at delta times
    ROTATION_STEP_FRACTION so the rescaled rod strain converges as delta -> 0.

    Raises:
        RecoveryError: delta > 1/n or unknown frame.
    """
    _check_delta(delta, ss.n)
    if frame not in FRAMES:
        raise RecoveryError(f"frame must be one of {FRAMES}, got '{frame}'")
    g = ss.origin_gradient
    ro = np.array([g[1], -g[0], 0.0])
    shift = delta * ro if frame == "rate" else np.zeros(3)

    def generator(x3):
        jet = ss.rod_jet(x3)
        dQ = np.column_stack([-jet.W[:, 1, 2], jet.W[:, 0, 2], jet.q[:, 1]])
        return np.sqrt(delta) * dQ + shift

    n = ss.n
    breakpoints = np.concatenate([[-1.0 / n, 0.0, 1.0 / n, 2.0 / n], ss.rod_mesh.nodes])
    initial = None if frame == "rate" else exp_antisym(delta * ro)
    return integrate_rotation(generator, breakpoints, substeps, initial, ROTATION_STEP_FRACTION * delta)


def _check_delta(delta: float, n: int):
    if not delta > 0.0:
        raise RecoveryError(f"delta must be positive, got {delta}")
    if delta > 1.0 / n:
        raise RecoveryError(f"delta={delta:g} exceeds 1/n={1.0 / n:g}; the junction formulas need delta <= 1/n")


def build_recovery(ss: SmoothedLimitState, delta: float, m: MaterialParams, n: int | None = None,
                   frame: str = "rate", boundary_layer: float = 0.05, substeps: int = 16) -> RecoveryField:
    """
    Build the 3D recovery deformation at thickness delta.

    Raises:
        RecoveryError: delta > 1/n, n differs from the smoothing parameter, or bad options.
    """
    if n is not None and n != ss.n:
        raise RecoveryError(f"state was smoothed with n={ss.n}, got n={n}")
    if not boundary_layer > 0.0:
        raise RecoveryError(f"boundary_layer must be positive, got {boundary_layer}")
    rotation = integrate_recovery_rotation(ss, delta, frame, substeps)
    if delta >= ss.rod_mesh.length:
        raise RecoveryError(f"delta={delta:g} must be smaller than the rod length")
    return RecoveryField(ss, float(delta), m, rotation, frame, boundary_layer)


# =============================================================================
# RESCALED ENERGY
# =============================================================================

@dataclass
class RecoveryEnergy:
    """Rescaled energies J_delta(v) / delta^5 split into parts."""
    delta: float
    plate_elastic: float
    rod_elastic: float
    load: float
    min_det: float
    corrector_norm: float
    failing_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @property
    def nonphysical(self) -> bool:
        return len(self.failing_points) > 0

    @property
    def elastic(self):
        return NONPHYSICAL if self.nonphysical else self.plate_elastic + self.rod_elastic

    @property
    def total(self):
        return NONPHYSICAL if self.nonphysical else self.elastic - self.load


def rescaled_energy(rf: RecoveryField, fd: ForceData, m: MaterialParams | None = None,
                    order: int = 6) -> RecoveryEnergy:
    """
    Elastic and load parts of the rescaled 3D energy by thin-domain quadrature.

    Points with det grad v <= 0 make the energy NONPHYSICAL; their physical
    coordinates are kept in failing_points.
    """
    m = m or rf.m
    d = rf.delta
    quad = thin_quadrature(rf.ss.plate_mesh, rf.ss.rod_mesh, d, order, breakpoints=tuple(rf.ss.rod_breakpoints))

    plate_pts = quad.plate_points * np.array([1.0, 1.0, d])
    pk = rf.plate_kinematics(plate_pts)
    active = np.repeat(quad.rod_active, len(quad.disc))
    rod_pts = (quad.rod_points * np.array([d, d, 1.0]))[active]
    rod_w = quad.rod_weights[active]
    rk = rf.rod_kinematics(rod_pts)

    det_p, det_r = pk.det, rk.det
    failing = np.vstack([plate_pts[det_p <= 0.0], rod_pts[det_r <= 0.0]])
    plate_elastic = float(np.sum(quad.plate_weights * green_energy(pk.E, m))) / d ** 4
    rod_elastic = float(np.sum(rod_w * green_energy(rk.E, m))) / d ** 3

    f_plate = eval_f_delta(fd, plate_pts, d, "plate")
    load = float(np.sum(quad.plate_weights * np.sum(f_plate * pk.u, axis=1))) / d ** 4
    if len(rod_pts):
        f_rod = eval_f_delta(fd, rod_pts, d, "rod")
        load += float(np.sum(rod_w * np.sum(f_rod * rk.u, axis=1))) / d ** 3

    _, grad_vt = rf.corrector(rod_pts)
    corrector = float(np.max(np.linalg.norm(grad_vt, axis=(1, 2)))) if len(rod_pts) else 0.0
    min_det = float(min(det_p.min(), det_r.min() if len(det_r) else np.inf))
    result = RecoveryEnergy(d, plate_elastic, rod_elastic, load, min_det, corrector, failing)
    if result.nonphysical:
        logger.warning(f"RECOVERY delta={d:g} | NONPHYSICAL at {len(failing)} points | min_det={min_det:.3e}")
    return result


def rescaled_strain_error(rf: RecoveryField, region: str = "rod", order: int = 4) -> float:
    """
    max |E_3D / scale - E_limit| / max |E_limit| at quadrature points, with
    scale delta^2 on the plate and delta^(3/2) on the rod.
    """
    from mechanics.limit_model import limit_strain_plate, limit_strain_rod

    d = rf.delta
    quad = thin_quadrature(rf.ss.plate_mesh, rf.ss.rod_mesh, d, order, breakpoints=tuple(rf.ss.rod_breakpoints))
    if region == "plate":
        pts = quad.plate_points
        E3d = rf.plate_kinematics(pts * np.array([1.0, 1.0, d])).E / d ** 2
        limit = limit_strain_plate(rf.ss, rf.m, pts, rf.plate_warping_factor(pts[:, :2]))
    else:
        active = np.repeat(quad.rod_active, len(quad.disc))
        pts = quad.rod_points[active]
        E3d = rf.rod_kinematics(pts * np.array([d, d, 1.0])).E / d ** 1.5
        limit = limit_strain_rod(rf.ss, rf.m, pts)
    scale = max(float(np.max(np.abs(limit))), np.finfo(float).tiny)
    return float(np.max(np.abs(E3d - limit))) / scale


def recovery_limit(ss: SmoothedLimitState, rf: RecoveryField, fd: ForceData, m: MaterialParams,
                   coefficients: LimitCoefficients | None = None) -> float:
    """delta -> 0 value of the construction: reduced energies with the cut-off warpings minus the load."""
    plate = reduced_plate_energy(ss, m, warping_factor=rf.plate_warping_factor)
    rod = reduced_rod_energy(ss, m)
    return plate + rod - load_functional(ss, fd, coefficients)


def _diagnostic_ratios(rf: RecoveryField, order: int = 4) -> tuple[float, float]:
    """(Gs(u, plate) / delta^(5/2), dist(grad v, SO(3)) on the rod / delta^(5/2)) by quadrature."""
    d = rf.delta
    quad = thin_quadrature(rf.ss.plate_mesh, rf.ss.rod_mesh, d, order, breakpoints=tuple(rf.ss.rod_breakpoints))
    pk = rf.plate_kinematics(quad.plate_points * np.array([1.0, 1.0, d]))
    G = pk.F - np.eye(3)
    sym = G + np.swapaxes(G, 1, 2)
    gs = np.sqrt(d * np.sum(quad.plate_weights * np.sum(sym ** 2, axis=(1, 2))))
    active = np.repeat(quad.rod_active, len(quad.disc))
    rk = rf.rod_kinematics((quad.rod_points * np.array([d, d, 1.0]))[active])
    dist = np.sqrt(d ** 2 * np.sum(quad.rod_weights[active] * dist_SO3(rk.F) ** 2))
    return float(gs / d ** 2.5), float(dist / d ** 2.5)


SWEEP_COLUMNS = [
    "delta", "n", "elastic", "load", "total", "limit_energy", "gap",
    "recovery_limit", "recovery_gap", "corrector_norm", "min_det", "gs_ratio", "dist_ratio", "status",
]


def delta_sweep(ss: SmoothedLimitState | LimitState, fd: ForceData, m: MaterialParams, deltas, n: int | None = None,
                coefficients: LimitCoefficients | None = None, order: int = 6, frame: str = "rate",
                boundary_layer: float = 0.05, substeps: int = 16,
                resolution_check: bool = False) -> pd.DataFrame:
    """
    One rescaled-energy row per thickness.

    A plain LimitState is smoothed first with plateau parameter n.

    gap = |total - J(smoothed)| is the empirical limsup error. With
    resolution_check the total is recomputed at twice the quadrature order
    and the relative change is reported in `resolution_change`.

    Raises:
        RecoveryError: deltas not strictly decreasing or some delta > 1/n.
    """
    deltas = [float(d) for d in deltas]
    if not isinstance(ss, SmoothedLimitState):
        if n is None:
            raise RecoveryError("a plain limit state needs the plateau parameter n")
        ss = smooth_state(ss, n, fd, m, coefficients)
    n = n or ss.n
    if not deltas:
        raise RecoveryError("delta list is empty")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise RecoveryError(f"delta values must be strictly decreasing, got {deltas}")
    for d in deltas:
        _check_delta(d, n)

    limit = total_energy(ss, fd, m, coefficients)
    rows = []
    for d in deltas:
        rf = build_recovery(ss, d, m, n, frame, boundary_layer, substeps)
        energy = rescaled_energy(rf, fd, m, order)
        rec_limit = recovery_limit(ss, rf, fd, m, coefficients)
        gs, dist = _diagnostic_ratios(rf)
        if energy.nonphysical:
            total, elastic, status = np.inf, np.inf, "nonphysical"
        else:
            total, elastic, status = energy.total, energy.elastic, "ok"
        row = {
            "delta": d, "n": n, "elastic": elastic, "load": energy.load, "total": total,
            "limit_energy": limit, "gap": abs(total - limit),
            "recovery_limit": rec_limit, "recovery_gap": abs(total - rec_limit),
            "corrector_norm": energy.corrector_norm, "min_det": energy.min_det,
            "gs_ratio": gs, "dist_ratio": dist, "status": status,
        }
        if resolution_check:
            fine = rescaled_energy(rf, fd, m, 2 * order)
            row["resolution_change"] = (abs(fine.total - total) / max(abs(total), np.finfo(float).tiny)
                                        if status == "ok" and not fine.nonphysical else np.inf)
        rows.append(row)
        log_sweep_row(logger, d, total, row["gap"], status)
    columns = SWEEP_COLUMNS + (["resolution_change"] if resolution_check else [])
    return pd.DataFrame(rows, columns=columns)
