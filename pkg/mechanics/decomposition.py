"""
Junction - Plate-Rod Limit Model Solver
Thin-Structure Decompositions & Diagnostic Seminorms

Splits sampled 3D fields into elementary parts plus warpings:
    plate  u = U(x1, x2) + x3 R x e3 + warping
    rod    v = W(x3) + x3 e3 + Q(x3)(x1 e1 + x2 e2) + warping

Sampled-field files are CSV with one header comment line:
    # kind=plate delta=0.1 shape=9,9,3 bounds=2,2 field=displacement
    # kind=rod delta=0.1 shape=12,3,8 length=1 field=deformation
followed by the column line x1,x2,x3,u1,u2,u3 and one row per sample,
ordered like the shape (last index fastest). Transverse samples sit at the
Gauss nodes of the given count (thickness) or on the polar disc rule
(radial Gauss, uniform angles).
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.spatial.transform import Rotation

from mechanics.errors import DecompositionError, SampledFieldError
from mechanics.geometry import disc_rule, gauss_legendre
from mechanics.material import dist_SO3
from services.logger import get_logger, log_decomposition

logger = get_logger(__name__)

COLUMNS = ["x1", "x2", "x3", "u1", "u2", "u3"]
FIELD_KINDS = ("displacement", "deformation")
E3 = np.array([0.0, 0.0, 1.0])


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    if len(x) < 2:
        raise DecompositionError("a sample axis needs at least two points")
    h = np.diff(x)
    w = np.zeros(len(x))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


# =============================================================================
# SAMPLE GRIDS
# =============================================================================

@dataclass(frozen=True, eq=False)
class PlateSampleGrid:
    """Tensor grid on omega x ]-delta, delta[: given in-plane axes, Gauss nodes across the thickness."""
    delta: float
    x1: np.ndarray
    x2: np.ndarray
    n_thickness: int = 3

    @classmethod
    def uniform(cls, a1: float, a2: float, delta: float, n1: int, n2: int, n3: int = 3) -> "PlateSampleGrid":
        return cls(delta, np.linspace(-a1, a1, n1), np.linspace(-a2, a2, n2), n3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.x1), len(self.x2), self.n_thickness

    @property
    def thickness_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical x3 nodes and weights on ]-delta, delta[."""
        return gauss_legendre(self.n_thickness, -self.delta, self.delta)

    @property
    def points(self) -> np.ndarray:
        x3, _ = self.thickness_rule
        g1, g2, g3 = np.meshgrid(self.x1, self.x2, x3, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel(), g3.ravel()])

    @property
    def weights(self) -> np.ndarray:
        _, w3 = self.thickness_rule
        return np.einsum("i,j,k->ijk", _trapezoid_weights(self.x1), _trapezoid_weights(self.x2), w3).ravel()

    def header(self) -> dict:
        return {"kind": "plate", "delta": self.delta, "shape": self.shape,
                "bounds": (float(np.max(np.abs(self.x1))), float(np.max(np.abs(self.x2))))}


@dataclass(frozen=True, eq=False)
class RodSampleGrid:
    """Sections of D(O, delta) x ]-delta, L[ at the given axial stations, polar disc rule per section."""
    delta: float
    axial: np.ndarray
    n_radial: int = 3
    n_angular: int = 8

    @classmethod
    def standard(cls, length: float, delta: float, n_axial: int, n_radial: int = 3,
                 n_angular: int = 8) -> "RodSampleGrid":
        axial = np.concatenate([[-delta], np.linspace(0.0, length, n_axial - 1)])
        return cls(delta, axial, n_radial, n_angular)

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.axial), self.n_radial, self.n_angular

    @property
    def section_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical cross-section points (D, 2) and weights (D,)."""
        X, w = disc_rule(self.n_radial, self.n_angular)
        return self.delta * X, self.delta ** 2 * w

    @property
    def points(self) -> np.ndarray:
        X, _ = self.section_rule
        D = len(X)
        return np.column_stack([np.tile(X, (len(self.axial), 1)), np.repeat(self.axial, D)])

    @property
    def weights(self) -> np.ndarray:
        _, w = self.section_rule
        return np.outer(_trapezoid_weights(self.axial), w).ravel()

    def header(self) -> dict:
        return {"kind": "rod", "delta": self.delta, "shape": self.shape,
                "length": float(self.axial[-1])}


# =============================================================================
# SAMPLED FIELD
# =============================================================================

@dataclass(frozen=True, eq=False)
class SampledField3D:
    """
    A 3-component field sampled on a plate or rod grid. `field` says whether
    values are a displacement u or a deformation v = x + u. Gradients, when
    known in closed form, are of the stored field.
    """
    grid: PlateSampleGrid | RodSampleGrid
    values: np.ndarray
    field: str = "displacement"
    gradients: np.ndarray | None = None

    def __post_init__(self):
        if self.field not in FIELD_KINDS:
            raise DecompositionError(f"field must be one of {FIELD_KINDS}, got '{self.field}'")
        n = int(np.prod(self.grid.shape))
        if np.shape(self.values) != (n, 3):
            raise DecompositionError(f"expected values of shape ({n}, 3), got {np.shape(self.values)}")
        if self.gradients is not None and np.shape(self.gradients) != (n, 3, 3):
            raise DecompositionError(f"expected gradients of shape ({n}, 3, 3)")

    @property
    def kind(self) -> str:
        return "plate" if isinstance(self.grid, PlateSampleGrid) else "rod"

    @property
    def delta(self) -> float:
        return self.grid.delta

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def displacement(self) -> np.ndarray:
        return self.values if self.field == "displacement" else self.values - self.points

    def deformation(self) -> np.ndarray:
        return self.values if self.field == "deformation" else self.values + self.points

    def displacement_gradient(self) -> np.ndarray:
        """grad u at every sample, from the closed form or finite differences on plate grids."""
        if self.gradients is not None:
            G = np.asarray(self.gradients, dtype=float)
            return G if self.field == "displacement" else G - np.eye(3)
        if self.kind != "plate":
            raise DecompositionError("rod samples need closed-form gradients (polar grids are not differentiable)")
        x3, _ = self.grid.thickness_rule
        u = self.displacement().reshape(self.grid.shape + (3,))
        G = np.zeros(self.grid.shape + (3, 3))
        for j, axis in enumerate((self.grid.x1, self.grid.x2, x3)):
            G[..., j] = np.gradient(u, axis, axis=j, edge_order=2 if len(axis) > 2 else 1)
        return G.reshape(-1, 3, 3)


def sample_field(grid: PlateSampleGrid | RodSampleGrid, function: Callable, field: str = "displacement") -> SampledField3D:
    """
    Sample a closed-form field. `function(points)` returns values (N, 3) or
    (values, gradients).
    """
    out = function(grid.points)
    values, gradients = out if isinstance(out, tuple) else (out, None)
    return SampledField3D(grid, np.asarray(values, dtype=float), field,
                          None if gradients is None else np.asarray(gradients, dtype=float))


# =============================================================================
# SEMINORMS
# =============================================================================

def seminorm_Gs(u: SampledField3D) -> float:
    """L2 norm of grad u + grad u^T over the sampled domain."""
    G = u.displacement_gradient()
    S = G + np.swapaxes(G, 1, 2)
    return float(np.sqrt(np.sum(u.weights * np.sum(S ** 2, axis=(1, 2)))))


def seminorm_dist(v: SampledField3D) -> float:
    """L2 norm of dist(grad v, SO(3)) over the sampled domain."""
    F = v.displacement_gradient() + np.eye(3)
    return float(np.sqrt(np.sum(v.weights * dist_SO3(F) ** 2)))


# =============================================================================
# PLATE DECOMPOSITION
# =============================================================================

@dataclass(frozen=True, eq=False)
class DecomposedPlate:
    """u = U + x3 (R2, -R1, 0) + warping on the sample grid."""
    grid: PlateSampleGrid
    U: np.ndarray            # (n1, n2, 3)
    R1: np.ndarray           # (n1, n2)
    R2: np.ndarray           # (n1, n2)
    warping: np.ndarray      # (n1, n2, n3, 3)
    mean_residual: float     # max |integral warping dx3|
    moment_residual: float   # max |integral x3 warping_a dx3|
    reconstruction_error: float

    def reconstruct(self) -> np.ndarray:
        x3, _ = self.grid.thickness_rule
        rot = np.stack([self.R2, -self.R1, np.zeros_like(self.R1)], axis=-1)
        return (self.U[:, :, None, :] + x3[None, None, :, None] * rot[:, :, None, :] + self.warping).reshape(-1, 3)

    def to_frame(self) -> pd.DataFrame:
        g1, g2 = np.meshgrid(self.grid.x1, self.grid.x2, indexing="ij")
        return pd.DataFrame({
            "x1": g1.ravel(), "x2": g2.ravel(),
            "U1": self.U[..., 0].ravel(), "U2": self.U[..., 1].ravel(), "U3": self.U[..., 2].ravel(),
            "R1": self.R1.ravel(), "R2": self.R2.ravel(),
            "warping_rms": np.sqrt(np.mean(np.sum(self.warping ** 2, axis=-1), axis=-1)).ravel(),
        })


def decompose_plate(u: SampledField3D) -> DecomposedPlate:
    """
    Through-thickness mean and first moments of a plate displacement.

    Raises:
        DecompositionError: field is not on a plate grid.
    """
    if u.kind != "plate":
        raise DecompositionError("decompose_plate needs a plate sample grid")
    grid: PlateSampleGrid = u.grid
    x3, w3 = grid.thickness_rule
    vals = u.displacement().reshape(grid.shape + (3,))

    U = np.einsum("k,ijkc->ijc", w3, vals) / np.sum(w3)
    second = np.sum(w3 * x3 ** 2)
    R2 = np.einsum("k,ijk->ij", w3 * x3, vals[..., 0]) / second
    R1 = -np.einsum("k,ijk->ij", w3 * x3, vals[..., 1]) / second
    rot = np.stack([R2, -R1, np.zeros_like(R1)], axis=-1)
    warping = vals - U[:, :, None, :] - x3[None, None, :, None] * rot[:, :, None, :]

    mean_res = float(np.max(np.abs(np.einsum("k,ijkc->ijc", w3, warping))))
    moment_res = float(np.max(np.abs(np.einsum("k,ijkc->ijc", w3 * x3, warping[..., :2]))))
    result = DecomposedPlate(grid, U, R1, R2, warping, mean_res, moment_res, 0.0)
    error = float(np.max(np.abs(result.reconstruct() - vals.reshape(-1, 3))))
    result = DecomposedPlate(grid, U, R1, R2, warping, mean_res, moment_res, error)
    log_decomposition(logger, "plate", grid.delta, max(mean_res, moment_res))
    return result


# =============================================================================
# ROD DECOMPOSITION
# =============================================================================

@dataclass(frozen=True, eq=False)
class DecomposedRod:
    """v = W + x3 e3 + Q (x1 e1 + x2 e2) + warping, per axial section."""
    grid: RodSampleGrid
    W: np.ndarray            # (A, 3)
    Q: np.ndarray            # (A, 3, 3)
    warping: np.ndarray      # (A, D, 3)
    residual: float          # max over sections of the rms warping
    reconstruction_error: float
    degenerate_sections: tuple[int, ...] = field(default=())

    @property
    def axial(self) -> np.ndarray:
        return self.grid.axial

    def reconstruct(self) -> np.ndarray:
        X, _ = self.grid.section_rule
        xhat = np.column_stack([X, np.zeros(len(X))])
        base = self.W + self.axial[:, None] * E3
        return (base[:, None, :] + np.einsum("aij,dj->adi", self.Q, xhat) + self.warping).reshape(-1, 3)

    def to_frame(self) -> pd.DataFrame:
        main, stretch = split_centerline(self)
        rotvec = Rotation.from_matrix(self.Q).as_rotvec()
        return pd.DataFrame({
            "x3": self.axial,
            "W1": self.W[:, 0], "W2": self.W[:, 1], "W3": self.W[:, 2],
            "Q_rotvec1": rotvec[:, 0], "Q_rotvec2": rotvec[:, 1], "Q_rotvec3": rotvec[:, 2],
            "Wm1": main[:, 0], "Wm2": main[:, 1], "Wm3": main[:, 2],
            "Ws1": stretch[:, 0], "Ws2": stretch[:, 1], "Ws3": stretch[:, 2],
            "identity_residual": centerline_identity_residual(self.Q),
            "warping_rms": np.sqrt(np.mean(np.sum(self.warping ** 2, axis=-1), axis=-1)),
        })


def decompose_rod(v: SampledField3D) -> DecomposedRod:
    """
    Cross-section mean, best-fit section rotation (orthogonal Procrustes on
    the first moments) and warping of a rod deformation.

    Sections whose moment matrix has rank < 2 reuse the previous section's
    rotation (identity for the first) and are listed in degenerate_sections.
    """
    if v.kind != "rod":
        raise DecompositionError("decompose_rod needs a rod sample grid")
    grid: RodSampleGrid = v.grid
    X, w = grid.section_rule
    A, D = len(grid.axial), len(X)
    vals = v.deformation().reshape(A, D, 3)

    mean = np.einsum("d,adc->ac", w, vals) / np.sum(w)
    W = mean - grid.axial[:, None] * E3
    centered = vals - mean[:, None, :]
    M = np.einsum("d,dk,adc->akc", w, X, centered) / np.sum(w[:, None] * X ** 2, axis=0)[None, :, None]

    Q = np.zeros((A, 3, 3))
    previous = np.eye(3)
    degenerate = []
    basis = np.eye(3)[:2]
    for a in range(A):
        s = np.linalg.svd(M[a], compute_uv=False)
        if s[0] == 0.0 or s[-1] <= 1e-10 * s[0]:
            degenerate.append(a)
            Q[a] = previous
            continue
        rotation = Rotation.align_vectors(M[a], basis)[0]
        Q[a] = previous = rotation.as_matrix()
    if degenerate:
        logger.warning(f"DECOMPOSE rod | degenerate sections={degenerate} | using previous rotation")

    xhat = np.column_stack([X, np.zeros(D)])
    warping = centered - np.einsum("aij,dj->adi", Q, xhat)
    rms = np.sqrt(np.einsum("d,adc->a", w, warping ** 2) / np.sum(w))
    result = DecomposedRod(grid, W, Q, warping, float(np.max(rms)), 0.0, tuple(degenerate))
    error = float(np.max(np.abs(result.reconstruct() - vals.reshape(-1, 3))))
    result = DecomposedRod(grid, W, Q, warping, float(np.max(rms)), error, tuple(degenerate))
    log_decomposition(logger, "rod", grid.delta, result.residual)
    return result


def split_centerline(d: DecomposedRod) -> tuple[np.ndarray, np.ndarray]:
    """
    Main part Wm(x3) = W(0) + integral_0^x3 (Q - I) e3 and stretching part
    Ws = W - Wm, at the axial stations.
    """
    axial = d.axial
    slope = d.Q[:, :, 2] - E3
    running = cumulative_trapezoid(slope, axial, axis=0, initial=0.0)
    at_zero = np.array([np.interp(0.0, axial, running[:, c]) for c in range(3)])
    W0 = np.array([np.interp(0.0, axial, d.W[:, c]) for c in range(3)])
    main = W0 + running - at_zero
    return main, d.W - main


def centerline_identity_residual(Q: np.ndarray) -> np.ndarray:
    """(Q - I) e3 . e3 + 1/2 |(Q - I) e3|^2, zero for every rotation."""
    c = np.asarray(Q)[..., :, 2] - E3
    return c[..., 2] + 0.5 * np.sum(c ** 2, axis=-1)


# =============================================================================
# FILE FORMAT
# =============================================================================

_HEADER_KEYS = {"kind", "delta", "shape", "field"}


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise SampledFieldError("missing '# kind=... delta=... shape=...' header", row=1)
    entries = dict(item.split("=", 1) for item in line[1:].split() if "=" in item)
    missing = _HEADER_KEYS - set(entries)
    if missing:
        raise SampledFieldError(f"header lacks {sorted(missing)}", row=1)
    try:
        header = {
            "kind": entries["kind"],
            "delta": float(entries["delta"]),
            "shape": tuple(int(s) for s in entries["shape"].split(",")),
            "field": entries["field"],
        }
        if "bounds" in entries:
            header["bounds"] = tuple(float(s) for s in entries["bounds"].split(","))
        if "length" in entries:
            header["length"] = float(entries["length"])
    except ValueError as e:
        raise SampledFieldError(f"bad header value: {e}", row=1) from e
    if header["kind"] not in ("plate", "rod") or len(header["shape"]) != 3 or header["field"] not in FIELD_KINDS:
        raise SampledFieldError("header needs kind=plate|rod, a 3-entry shape and field=displacement|deformation", row=1)
    if not header["delta"] > 0.0:
        raise SampledFieldError("delta must be positive", row=1)
    return header


def _first_bad_row(mask: np.ndarray) -> int:
    # data rows start on file line 3
    return int(np.argmax(mask)) + 3


def read_sampled_field(path: Path | str, kind: str | None = None) -> SampledField3D:
    """
    Load a sampled-field file.

    Raises:
        SampledFieldError: malformed header or rows, with the file line number.
    """
    path = Path(path)
    try:
        with open(path) as f:
            header = _parse_header(f.readline().strip())
    except OSError as e:
        raise SampledFieldError(f"cannot read {path}: {e}") from e
    if kind is not None and header["kind"] != kind:
        raise SampledFieldError(f"file holds a {header['kind']} field, expected {kind}", row=1)

    try:
        frame = pd.read_csv(path, skiprows=1, skip_blank_lines=False, float_precision="round_trip")
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise SampledFieldError(str(e), row=int(match.group(1)) + 1 if match else None) from e
    if list(frame.columns) != COLUMNS:
        raise SampledFieldError(f"expected columns {','.join(COLUMNS)}", row=2)

    # clean columns arrive as float64 and pass through unchanged
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        raise SampledFieldError("non-numeric or missing value", row=_first_bad_row(bad))
    data = numeric.to_numpy(dtype=float)
    n = int(np.prod(header["shape"]))
    if len(data) < n:
        raise SampledFieldError(f"expected {n} samples, file ends after {len(data)}", row=len(data) + 3)
    if len(data) > n:
        raise SampledFieldError(f"expected {n} samples, found more", row=n + 3)

    points, values = data[:, :3], data[:, 3:]
    delta = header["delta"]
    n1, n2, n3 = header["shape"]
    if header["kind"] == "plate":
        grid = PlateSampleGrid(delta, points[::n2 * n3, 0].copy(), points[:n2 * n3:n3, 1].copy(), n3)
        axes = (grid.x1, grid.x2)
    else:
        grid = RodSampleGrid(delta, points[::n2 * n3, 2].copy(), n2, n3)
        axes = (grid.axial,)
    for axis in axes:
        if np.any(np.diff(axis) <= 0.0):
            raise SampledFieldError("sample axis is not strictly increasing")
    expected = grid.points
    tol = 1e-9 * max(1.0, float(np.max(np.abs(expected))))
    mismatch = np.any(np.abs(points - expected) > tol, axis=1)
    if mismatch.any():
        raise SampledFieldError("sample point does not lie on the grid implied by the header",
                                row=_first_bad_row(mismatch))
    logger.info(f"FIELD loaded | kind={header['kind']} | shape={header['shape']} | path={path}")
    return SampledField3D(grid, values, header["field"])


def write_sampled_field(sampled: SampledField3D, path: Path | str):
    """Write a sampled field in the format read_sampled_field expects."""
    h = sampled.grid.header()
    parts = [f"kind={h['kind']}", f"delta={float(h['delta'])!r}", "shape=" + ",".join(str(s) for s in h["shape"])]
    if "bounds" in h:
        parts.append("bounds=" + ",".join(repr(float(b)) for b in h["bounds"]))
    if "length" in h:
        parts.append(f"length={float(h['length'])!r}")
    parts.append(f"field={sampled.field}")
    frame = pd.DataFrame(np.column_stack([sampled.points, sampled.values]), columns=COLUMNS)
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write("# " + " ".join(parts) + "\n")
        frame.to_csv(f, index=False)
