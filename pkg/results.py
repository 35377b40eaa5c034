"""
Junction - Plate-Rod Limit Model Solver
Result Bundle Writers

A bundle directory holds:
    result.json               summary, histories, admissibility, config echo, version
    state.npz                 full DOF vector plus mesh sizes (reloadable by `sweep`)
    sweep.csv / sweep.json    one row per thickness
    decomposition_<kind>.csv  component fields of a decomposed sample
    timings.json              wall-clock seconds per phase

Wall-clock data lives only in timings.json so that result.json is
byte-identical across identical runs.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from mechanics import __version__
from mechanics.errors import DofMapError
from mechanics.fem import DofMap
from mechanics.limit_model import LimitState
from services.logger import get_logger

logger = get_logger(__name__)


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(payload: dict) -> str:
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


# =============================================================================
# STATE FILES
# =============================================================================

def save_state(path: Path, state: LimitState):
    dm = state.dofmap
    np.savez(
        path,
        values=state.values,
        plate_resolution=np.array([dm.plate_mesh.nx, dm.plate_mesh.ny]),
        rod_elements=np.array(dm.rod_mesh.n_elements),
        version=np.array(__version__),
    )


def load_state(path: Path, dm: DofMap) -> LimitState:
    """
    Reload a saved state onto a DOF map built from the same mesh sizes.

    Raises:
        DofMapError: mesh sizes or vector length differ.
    """
    with np.load(path) as data:
        values = np.array(data["values"], dtype=float)
        nx, ny = (int(v) for v in data["plate_resolution"])
        rod_elements = int(data["rod_elements"])
    if (nx, ny, rod_elements) != (dm.plate_mesh.nx, dm.plate_mesh.ny, dm.rod_mesh.n_elements):
        raise DofMapError(
            f"{path}: saved on plate {nx}x{ny} / rod {rod_elements}, config meshes are "
            f"{dm.plate_mesh.nx}x{dm.plate_mesh.ny} / {dm.rod_mesh.n_elements}"
        )
    dm.check_vector(values)
    return LimitState(dm, values)


# =============================================================================
# BUNDLE
# =============================================================================

@dataclass
class ResultBundle:
    """Everything one command produced; `write` lays it out on disk."""
    command: str
    config_echo: dict | None = None
    summary: dict = field(default_factory=dict)
    admissibility: dict | None = None
    solves: list[dict] = field(default_factory=list)
    state: LimitState | None = None
    sweep: pd.DataFrame | None = None
    decompositions: dict[str, pd.DataFrame] = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        payload = {
            "command": self.command,
            "version": self.version,
            "summary": self.summary,
            "config": self.config_echo,
        }
        if self.admissibility is not None:
            payload["admissibility"] = self.admissibility
        if self.solves:
            payload["solves"] = self.solves
        if self.state is not None:
            s = self.state
            payload["state"] = {
                "n_dofs": s.dofmap.n_dofs,
                "n_free": s.dofmap.n_free,
                "origin_value": s.origin_value,
                "origin_gradient": s.origin_gradient,
                "max_abs": float(np.max(np.abs(s.values))) if s.values.size else 0.0,
            }
        if self.sweep is not None:
            payload["sweep"] = self.sweep.to_dict(orient="records")
        if self.residuals:
            payload["residuals"] = self.residuals
        return payload

    def write(self, out_dir: Path | str, formats: tuple[str, ...] = ("csv", "json")) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(dumps(self.to_dict()), encoding="utf-8")
        if self.state is not None:
            save_state(out / "state.npz", self.state)
        if self.sweep is not None:
            if "csv" in formats:
                self.sweep.to_csv(out / "sweep.csv", index=False)
            if "json" in formats:
                (out / "sweep.json").write_text(dumps({"rows": self.sweep.to_dict(orient="records")}),
                                                encoding="utf-8")
        for kind, frame in self.decompositions.items():
            frame.to_csv(out / f"decomposition_{kind}.csv", index=False)
        if self.timings:
            (out / "timings.json").write_text(dumps(self.timings), encoding="utf-8")
        logger.info(f"BUNDLE written | command={self.command} | dir={out}")
        return out
