"""
Junction - Plate-Rod Limit Model Solver
Force Data, Scaled 3D Loads & Admissibility

Limit force data (f_p on the plate, f_r, g1, g2 on the rod) given as
expressions or sampled tables, the thickness-scaled 3D force field, the
axial antiderivative F_r3 and the smallness checks on the data.

Usage:
    fd = ForceData.from_config({"f_p": ["0", "0", "0.5"], "f_r": ["0.5", "0", "0.05"]})
    report = check_admissibility(fd, AdmissibilityThresholds.defaults(m, L), plate, rod)
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from mechanics.errors import DomainError, ForceDataError
from mechanics.expressions import Expression, compile_expression
from mechanics.geometry import PlateMesh, RodMesh, gauss_legendre
from mechanics.material import MaterialParams
from services.logger import get_logger

logger = get_logger(__name__)

PLATE_VARIABLES = ("x1", "x2")
ROD_VARIABLES = ("x3",)


class VectorField(Protocol):
    """3-component field evaluated on coordinate arrays; returns (P, 3)."""

    def __call__(self, *coords: np.ndarray) -> np.ndarray: ...


# =============================================================================
# FIELD SOURCES
# =============================================================================

@dataclass(frozen=True)
class ExpressionField:
    """Closed-form field, one expression per component."""
    components: tuple[Expression, Expression, Expression]

    @classmethod
    def parse(cls, sources, variables: tuple[str, ...]) -> "ExpressionField":
        if isinstance(sources, (str, int, float)) or len(sources) != 3:
            raise ForceDataError(f"a vector field needs exactly 3 component expressions, got {sources!r}")
        return cls(tuple(compile_expression(s, variables) for s in sources))

    @classmethod
    def zero(cls, variables: tuple[str, ...]) -> "ExpressionField":
        return cls.parse(("0", "0", "0"), variables)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        variables = self.components[0].variables
        named = {v: np.atleast_1d(np.asarray(c, dtype=float)) for v, c in zip(variables, coords)}
        return np.stack([c(**named) for c in self.components], axis=-1)

    def describe(self) -> list[str]:
        return [c.source for c in self.components]


@dataclass(frozen=True, eq=False)
class RodTableField:
    """Sampled rod field (columns x3, c1, c2, c3) with linear interpolation."""
    x3: np.ndarray
    values: np.ndarray
    source: str = ""

    is_zero = False

    def __call__(self, x3: np.ndarray) -> np.ndarray:
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        tol = 1e-12 * max(1.0, abs(self.x3[-1]))
        if np.any(x3 < self.x3[0] - tol) or np.any(x3 > self.x3[-1] + tol):
            raise DomainError(f"table {self.source or '<rod table>'} does not cover x3 in [{x3.min():g}, {x3.max():g}]")
        return np.stack([np.interp(x3, self.x3, self.values[:, k]) for k in range(3)], axis=-1)

    def describe(self) -> dict:
        return {"table": self.source}


@dataclass(frozen=True, eq=False)
class PlateTableField:
    """Sampled plate field on a tensor grid (columns x1, x2, c1, c2, c3), bilinear interpolation."""
    interpolator: RegularGridInterpolator
    source: str = ""

    is_zero = False

    def __call__(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        pts = np.column_stack([np.ravel(x1), np.ravel(x2)])
        try:
            return self.interpolator(pts)
        except ValueError as e:
            raise DomainError(f"table {self.source or '<plate table>'}: {e}") from e

    def describe(self) -> dict:
        return {"table": self.source}


def read_rod_table(path: Path) -> RodTableField:
    df = _read_table(path, ["x3", "c1", "c2", "c3"])
    df = df.sort_values("x3")
    x3 = df["x3"].to_numpy()
    if np.any(np.diff(x3) <= 0):
        raise ForceDataError(f"{path}: x3 column must be strictly increasing")
    return RodTableField(x3, df[["c1", "c2", "c3"]].to_numpy(), str(path))


def read_plate_table(path: Path) -> PlateTableField:
    df = _read_table(path, ["x1", "x2", "c1", "c2", "c3"])
    x1 = np.unique(df["x1"].to_numpy())
    x2 = np.unique(df["x2"].to_numpy())
    if len(df) != len(x1) * len(x2):
        raise ForceDataError(f"{path}: rows do not form a full x1 x x2 grid ({len(df)} != {len(x1)}*{len(x2)})")
    df = df.sort_values(["x1", "x2"])
    values = df[["c1", "c2", "c3"]].to_numpy().reshape(len(x1), len(x2), 3)
    return PlateTableField(RegularGridInterpolator((x1, x2), values, method="linear"), str(path))


def _read_table(path: Path, columns: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ForceDataError(f"force table not found: {path}")
    df = pd.read_csv(path, comment="#", float_precision="round_trip")
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ForceDataError(f"{path}: missing columns {missing}")
    df = df[columns].apply(pd.to_numeric, errors="coerce")
    if df.isna().any().any():
        row = int(df.isna().any(axis=1).to_numpy().argmax()) + 1
        raise ForceDataError(f"{path}: non-numeric entry in data row {row}")
    return df


# =============================================================================
# FORCE DATA
# =============================================================================

@dataclass(frozen=True)
class ForceData:
    """
    Limit force data: plate body force f_p, rod force f_r and the rod
    moment-generating fields g1, g2. `scale` multiplies every field.
    """
    f_p: VectorField = field(default_factory=lambda: ExpressionField.zero(PLATE_VARIABLES))
    f_r: VectorField = field(default_factory=lambda: ExpressionField.zero(ROD_VARIABLES))
    g1: VectorField = field(default_factory=lambda: ExpressionField.zero(ROD_VARIABLES))
    g2: VectorField = field(default_factory=lambda: ExpressionField.zero(ROD_VARIABLES))
    scale: float = 1.0

    @classmethod
    def zero(cls) -> "ForceData":
        return cls()

    @classmethod
    def from_config(cls, block: dict, base_dir: Path | None = None) -> "ForceData":
        """
        Build from a config block: each of f_p, f_r, g1, g2 is either a list of
        three expressions or {"table": "path.csv"}; absent entries are zero.
        """
        base_dir = Path(base_dir or ".")
        unknown = set(block) - {"f_p", "f_r", "g1", "g2", "scale"}
        if unknown:
            raise ForceDataError(f"unknown force entries: {sorted(unknown)}")

        def build(name, variables, table_reader):
            spec = block.get(name)
            if spec is None:
                return ExpressionField.zero(variables)
            if isinstance(spec, dict):
                if "table" not in spec:
                    raise ForceDataError(f"{name}: table entry needs a 'table' path")
                return table_reader(base_dir / spec["table"])
            return ExpressionField.parse(spec, variables)

        return cls(
            f_p=build("f_p", PLATE_VARIABLES, read_plate_table),
            f_r=build("f_r", ROD_VARIABLES, read_rod_table),
            g1=build("g1", ROD_VARIABLES, read_rod_table),
            g2=build("g2", ROD_VARIABLES, read_rod_table),
            scale=float(block.get("scale", 1.0)),
        )

    def scaled(self, t: float) -> "ForceData":
        return replace(self, scale=self.scale * t)

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0 or all(
            getattr(f, "is_zero", False) for f in (self.f_p, self.f_r, self.g1, self.g2)
        )

    def plate_force(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return self.scale * self.f_p(x1, x2)

    def rod_force(self, x3: np.ndarray) -> np.ndarray:
        return self.scale * self.f_r(x3)

    def couple(self, x3: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.scale * self.g1(x3), self.scale * self.g2(x3)

    def describe(self) -> dict:
        return {
            name: getattr(getattr(self, name), "describe", lambda: "custom")()
            for name in ("f_p", "f_r", "g1", "g2")
        } | {"scale": self.scale}


def eval_f_delta(fd: ForceData, x: np.ndarray, delta: float, region: str) -> np.ndarray:
    """
    Scaled 3D force at physical points x (3,) or (P, 3).

    plate: (delta^2 f_p1, delta^2 f_p2, delta^3 f_p3)
    rod:   delta^(5/2) [f_r1 e1 + f_r2 e2 + delta^(-1/2) f_r3 e3 + (x_a / delta^2) g_a], x3 > delta

    Raises:
        DomainError: rod branch evaluated at x3 <= delta.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if region == "plate":
        f = fd.plate_force(x[:, 0], x[:, 1])
        out = f * np.array([delta ** 2, delta ** 2, delta ** 3])
    elif region == "rod":
        if np.any(x[:, 2] <= delta):
            raise DomainError(f"rod forces are defined only for x3 > delta={delta:g}")
        f = fd.rod_force(x[:, 2]) * np.array([delta ** 2.5, delta ** 2.5, delta ** 2])
        g1, g2 = fd.couple(x[:, 2])
        out = f + np.sqrt(delta) * (x[:, :1] * g1 + x[:, 1:2] * g2)
    else:
        raise ForceDataError(f"unknown region '{region}' (expected plate or rod)")
    return out[0] if single else out


def antiderivative_Fr3(fd: ForceData, x3: np.ndarray, rod: RodMesh, order: int | None = None) -> np.ndarray:
    """
    F_r3(x3) = integral of f_r3 over [x3, L], composite Gauss on the rod mesh.
    F_r3(L) = 0 exactly.
    """
    x3 = np.atleast_1d(np.asarray(x3, dtype=float))
    order = order or rod.order
    s, w = gauss_legendre(order, 0.0, 1.0)

    nodes = rod.nodes
    pts = nodes[:-1, None] + rod.h[:, None] * s
    per_element = np.sum(fd.rod_force(pts.ravel())[:, 2].reshape(pts.shape) * w, axis=1) * rod.h
    tail = np.concatenate([np.cumsum(per_element[::-1])[::-1], [0.0]])

    k, _ = rod.locate(x3)
    right = nodes[k + 1]
    span = right - x3
    partial_pts = x3[:, None] + span[:, None] * s
    partial = np.sum(fd.rod_force(partial_pts.ravel())[:, 2].reshape(partial_pts.shape) * w, axis=1) * span
    return partial + tail[k + 1]


# =============================================================================
# ADMISSIBILITY
# =============================================================================

class Verdict:
    ADMISSIBLE = "admissible"
    INADMISSIBLE = "inadmissible"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class AdmissibilityThresholds:
    """
    Smallness bounds. threshold_p bounds sqrt(2 integral_omega |f_p|^2), the L2
    norm of the x3-independent f_p over omega x ]-1, 1[; threshold_r bounds the
    L2 norm of f_r3 over ]0, L[.
    """
    threshold_p: float
    threshold_r: float

    def __post_init__(self):
        if not (self.threshold_p > 0.0 and self.threshold_r > 0.0):
            raise ForceDataError("admissibility thresholds must be positive")

    @classmethod
    def defaults(cls, m: MaterialParams, length: float) -> "AdmissibilityThresholds":
        return cls(threshold_p=0.1 * m.mu, threshold_r=0.1 * m.mu / length)


@dataclass(frozen=True)
class AdmissibilityReport:
    case1_holds: bool
    fr3_norm: float
    fp_norm: float
    min_Fr3: float
    threshold_p: float
    threshold_r: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "case1_holds": self.case1_holds,
            "fr3_norm": self.fr3_norm,
            "fp_norm": self.fp_norm,
            "min_Fr3": self.min_Fr3,
            "threshold_p": self.threshold_p,
            "threshold_r": self.threshold_r,
            "verdict": self.verdict,
        }


def check_admissibility(fd: ForceData, thresholds: AdmissibilityThresholds,
                        plate: PlateMesh, rod: RodMesh) -> AdmissibilityReport:
    """
    Compare the data against the smallness conditions.

    fp_norm = sqrt(2 integral_omega |f_p|^2) is the L2 norm of f_p over
    omega x ]-1, 1[, so a constant f_p of size c on [-2, 2]^2 gives
    c sqrt(32). Case 1 is F_r3 >= 0 sampled at rod nodes and Gauss points.
    """
    xy, wxy = plate.gauss_points()
    fp = fd.plate_force(xy[..., 0].ravel(), xy[..., 1].ravel())
    fp_norm = float(np.sqrt(2.0 * np.sum(wxy.ravel() * np.sum(fp ** 2, axis=1))))

    x3, w3 = rod.gauss_points()
    fr3 = fd.rod_force(x3.ravel())[:, 2]
    fr3_norm = float(np.sqrt(np.sum(w3.ravel() * fr3 ** 2)))

    samples = np.concatenate([rod.nodes[:-1], x3.ravel()])
    F = antiderivative_Fr3(fd, samples, rod)
    scale = max(float(np.max(np.abs(F))), np.finfo(float).tiny)
    min_F = float(np.min(F))

    marginal = False
    if min_F >= -1e-12 * scale:
        case1 = True
    else:
        case1 = False
        marginal = min_F >= -1e-8 * scale

    if not (np.isfinite(fp_norm) and np.isfinite(fr3_norm) and np.isfinite(min_F)):
        verdict = Verdict.INDETERMINATE
    elif fp_norm > thresholds.threshold_p:
        verdict = Verdict.INADMISSIBLE
    elif case1 or fr3_norm <= thresholds.threshold_r:
        verdict = Verdict.ADMISSIBLE
    elif marginal:
        verdict = Verdict.INDETERMINATE
    else:
        verdict = Verdict.INADMISSIBLE

    return AdmissibilityReport(
        case1_holds=case1, fr3_norm=fr3_norm, fp_norm=fp_norm, min_Fr3=min_F,
        threshold_p=thresholds.threshold_p, threshold_r=thresholds.threshold_r, verdict=verdict,
    )
