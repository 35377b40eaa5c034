"""
Junction - Plate-Rod Limit Model Solver
Run Configuration (JSON run file)

One JSON file describes one experiment. Every block except `material` is
optional and filled with defaults; unknown keys are rejected so typos do not
silently fall back to defaults.

Usage:
    rc = load_run_config("configs/demo.json")
    dm = rc.build_dof_map()
    fd = rc.build_forces()
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from mechanics.errors import JunctionError
from mechanics.fem import DofMap, build_dof_map
from mechanics.forces import AdmissibilityThresholds, ForceData
from mechanics.geometry import Edge, PlateDomain, RodDomain, build_plate_mesh, build_rod_mesh
from mechanics.material import LimitCoefficients, MaterialParams
from mechanics.recovery3d import FRAMES
from mechanics.solver import SolveOptions
from services.logger import get_logger

logger = get_logger(__name__)


class ConfigError(JunctionError):
    """Invalid run file. Carries the dotted field path and, for syntax errors, line/column."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None,
                 column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path:
            where.append(path)
        if line is not None:
            where.append(f"line {line}, column {column}")
        super().__init__(f"{' @ '.join(where)}: {message}" if where else message)


# =============================================================================
# FIELD READERS
# =============================================================================

def _block(raw: dict, name: str, required: bool = False) -> dict:
    value = raw.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing required block '{name}'", name)
        return {}
    if not isinstance(value, dict):
        raise ConfigError("block must be an object", name)
    return value


def _check_keys(block: dict, name: str, allowed: set[str]):
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", name)


def _number(block: dict, name: str, key: str, default=None, integer: bool = False):
    value = block.get(key, default)
    path = f"{name}.{key}"
    if value is None:
        raise ConfigError("value is required", path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if integer:
        if int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    return float(value)


def _flag(block: dict, name: str, key: str, default: bool) -> bool:
    value = block.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", f"{name}.{key}")
    return value


def _numbers(block: dict, name: str, key: str, default) -> tuple[float, ...]:
    value = block.get(key, default)
    path = f"{name}.{key}"
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of numbers", path)
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", f"{path}[{i}]")
    return tuple(float(v) for v in value)


# =============================================================================
# BLOCKS
# =============================================================================

@dataclass(frozen=True)
class GeometryConfig:
    a1: float = 2.0
    a2: float = 2.0
    clamped: tuple[str, ...] = Edge.ALL
    rod_length: float = 1.0

    @classmethod
    def parse(cls, block: dict) -> "GeometryConfig":
        _check_keys(block, "geometry", {"a1", "a2", "clamped", "rod_length"})
        clamped = block.get("clamped", list(Edge.ALL))
        if not isinstance(clamped, list) or not clamped:
            raise ConfigError("expected a non-empty list of edges", "geometry.clamped")
        for i, edge in enumerate(clamped):
            if edge not in Edge.ALL:
                raise ConfigError(f"unknown edge {edge!r} (expected one of {list(Edge.ALL)})",
                                  f"geometry.clamped[{i}]")
        return cls(
            a1=_number(block, "geometry", "a1", 2.0),
            a2=_number(block, "geometry", "a2", 2.0),
            clamped=tuple(e for e in Edge.ALL if e in clamped),
            rod_length=_number(block, "geometry", "rod_length", 1.0),
        )


@dataclass(frozen=True)
class MeshConfig:
    plate_nx: int = 8
    plate_ny: int = 8
    rod_elements: int = 8
    plate_order: int = 4
    rod_order: int = 3

    @classmethod
    def parse(cls, block: dict) -> "MeshConfig":
        _check_keys(block, "mesh", {"plate_resolution", "rod_elements", "plate_order", "rod_order"})
        resolution = block.get("plate_resolution", 8)
        if isinstance(resolution, list):
            if len(resolution) != 2:
                raise ConfigError("expected [nx, ny]", "mesh.plate_resolution")
            nx = _number({"nx": resolution[0]}, "mesh.plate_resolution", "nx", integer=True)
            ny = _number({"ny": resolution[1]}, "mesh.plate_resolution", "ny", integer=True)
        else:
            nx = ny = _number(block, "mesh", "plate_resolution", 8, integer=True)
        return cls(
            plate_nx=nx,
            plate_ny=ny,
            rod_elements=_number(block, "mesh", "rod_elements", 8, integer=True),
            plate_order=_number(block, "mesh", "plate_order", 4, integer=True),
            rod_order=_number(block, "mesh", "rod_order", 3, integer=True),
        )


@dataclass(frozen=True)
class MaterialConfig:
    lam: float
    mu: float
    coefficients: str = "consistent"

    @classmethod
    def parse(cls, block: dict) -> "MaterialConfig":
        _check_keys(block, "material", {"lambda", "mu", "young", "poisson", "coefficients"})
        coefficients = block.get("coefficients", "consistent")
        if coefficients not in ("consistent", "as_printed"):
            raise ConfigError(f"expected consistent or as_printed, got {coefficients!r}",
                              "material.coefficients")
        lame = "lambda" in block or "mu" in block
        engineering = "young" in block or "poisson" in block
        if lame == engineering:
            raise ConfigError("give either (lambda, mu) or (young, poisson)", "material")
        try:
            if lame:
                m = MaterialParams.from_lame(_number(block, "material", "lambda"),
                                             _number(block, "material", "mu"))
            else:
                m = MaterialParams.from_engineering(_number(block, "material", "young"),
                                                    _number(block, "material", "poisson"))
        except ConfigError:
            raise
        except JunctionError as e:
            raise ConfigError(str(e), "material") from e
        return cls(m.lam, m.mu, coefficients)

    @property
    def params(self) -> MaterialParams:
        return MaterialParams.from_lame(self.lam, self.mu)


@dataclass(frozen=True)
class ForcesConfig:
    """Raw force block (expressions or table paths) plus admissibility thresholds."""
    fields: dict = field(default_factory=dict)
    threshold_p: float | None = None
    threshold_r: float | None = None

    @classmethod
    def parse(cls, block: dict, base_dir: Path) -> "ForcesConfig":
        _check_keys(block, "forces", {"f_p", "f_r", "g1", "g2", "scale", "admissibility"})
        adm = block.get("admissibility", {})
        if not isinstance(adm, dict):
            raise ConfigError("block must be an object", "forces.admissibility")
        _check_keys(adm, "forces.admissibility", {"threshold_p", "threshold_r"})
        fields = {k: v for k, v in block.items() if k != "admissibility"}
        for name, spec in fields.items():
            if isinstance(spec, dict) and "table" in spec and not (base_dir / spec["table"]).is_file():
                raise ConfigError(f"table file not found: {spec['table']}", f"forces.{name}.table")
        parsed = cls(
            fields=fields,
            threshold_p=_number(adm, "forces.admissibility", "threshold_p") if "threshold_p" in adm else None,
            threshold_r=_number(adm, "forces.admissibility", "threshold_r") if "threshold_r" in adm else None,
        )
        try:
            parsed.build(base_dir)
        except JunctionError as e:
            raise ConfigError(str(e), "forces") from e
        return parsed

    def build(self, base_dir: Path) -> ForceData:
        return ForceData.from_config(self.fields, base_dir)


@dataclass(frozen=True)
class SolverConfig:
    options: SolveOptions = field(default_factory=SolveOptions)
    multistart: int = 0
    amplitude: float = 1e-3
    continuation: tuple[float, ...] = ()

    @classmethod
    def parse(cls, block: dict) -> "SolverConfig":
        option_keys = set(SolveOptions.__dataclass_fields__)
        _check_keys(block, "solver", option_keys | {"multistart", "amplitude", "continuation"})
        values = {}
        for key in option_keys & set(block):
            if key == "check_forces":
                values[key] = _flag(block, "solver", key, True)
            else:
                integer = key in ("max_iterations", "max_shift_attempts")
                values[key] = _number(block, "solver", key, integer=integer)
        try:
            options = SolveOptions(**values)
        except JunctionError as e:
            raise ConfigError(str(e), "solver") from e
        # an empty list means a single direct solve
        continuation = _numbers(block, "solver", "continuation", [1.0]) if block.get("continuation") else ()
        if any(b <= a for a, b in zip(continuation, continuation[1:])):
            raise ConfigError("load scales must be increasing", "solver.continuation")
        multistart = _number(block, "solver", "multistart", 0, integer=True)
        if multistart < 0:
            raise ConfigError("must be >= 0", "solver.multistart")
        return cls(options, multistart, _number(block, "solver", "amplitude", 1e-3), continuation)


@dataclass(frozen=True)
class SweepConfig:
    deltas: tuple[float, ...] = (0.2, 0.1, 0.05)
    n: int = 4
    order: int = 6
    resolution_check: bool = False
    state: str | None = None

    @classmethod
    def parse(cls, block: dict, base_dir: Path) -> "SweepConfig":
        _check_keys(block, "sweep", {"deltas", "n", "order", "resolution_check", "state"})
        deltas = _numbers(block, "sweep", "deltas", [0.2, 0.1, 0.05])
        n = _number(block, "sweep", "n", 4, integer=True)
        if n < 2:
            raise ConfigError("plateau parameter must be >= 2", "sweep.n")
        if any(d <= 0.0 for d in deltas):
            raise ConfigError("thicknesses must be positive", "sweep.deltas")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("thicknesses must be strictly decreasing", "sweep.deltas")
        too_thick = [d for d in deltas if d > 1.0 / n]
        if too_thick:
            raise ConfigError(f"thicknesses {too_thick} exceed 1/n = {1.0 / n:g}", "sweep.deltas")
        state = block.get("state")
        if state is not None and not (base_dir / state).is_file():
            raise ConfigError(f"state file not found: {state}", "sweep.state")
        return cls(
            deltas=deltas, n=n,
            order=_number(block, "sweep", "order", 6, integer=True),
            resolution_check=_flag(block, "sweep", "resolution_check", False),
            state=state,
        )


@dataclass(frozen=True)
class RecoveryConfig:
    junction_frame: str = "rate"
    boundary_layer: float = 0.05
    substeps: int = 16

    @classmethod
    def parse(cls, block: dict) -> "RecoveryConfig":
        _check_keys(block, "recovery", {"junction_frame", "boundary_layer", "substeps"})
        frame = block.get("junction_frame", "rate")
        if frame not in FRAMES:
            raise ConfigError(f"expected one of {list(FRAMES)}, got {frame!r}", "recovery.junction_frame")
        layer = _number(block, "recovery", "boundary_layer", 0.05)
        if not layer > 0.0:
            raise ConfigError("must be positive", "recovery.boundary_layer")
        substeps = _number(block, "recovery", "substeps", 16, integer=True)
        if substeps < 1:
            raise ConfigError("must be >= 1", "recovery.substeps")
        return cls(frame, layer, substeps)


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None
    formats: tuple[str, ...] = ("json", "csv")

    @classmethod
    def parse(cls, block: dict) -> "OutputConfig":
        _check_keys(block, "output", {"directory", "formats"})
        formats = block.get("formats", ["json", "csv"])
        if not isinstance(formats, list) or any(f not in ("json", "csv") for f in formats):
            raise ConfigError("expected a list drawn from ['json', 'csv']", "output.formats")
        directory = block.get("directory")
        if directory is not None and not isinstance(directory, str):
            raise ConfigError("expected a path string", "output.directory")
        return cls(directory, tuple(sorted(set(formats))))


# =============================================================================
# RUN CONFIG
# =============================================================================

@dataclass(frozen=True)
class RunConfig:
    material: MaterialConfig
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    forces: ForcesConfig = field(default_factory=ForcesConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | str = ".") -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("run file must hold a JSON object")
        base_dir = Path(base_dir)
        _check_keys(raw, "run", {"geometry", "mesh", "material", "forces", "solver", "sweep",
                                 "recovery", "output"})
        rc = cls(
            material=MaterialConfig.parse(_block(raw, "material", required=True)),
            geometry=GeometryConfig.parse(_block(raw, "geometry")),
            mesh=MeshConfig.parse(_block(raw, "mesh")),
            forces=ForcesConfig.parse(_block(raw, "forces"), base_dir),
            solver=SolverConfig.parse(_block(raw, "solver")),
            sweep=SweepConfig.parse(_block(raw, "sweep"), base_dir),
            recovery=RecoveryConfig.parse(_block(raw, "recovery")),
            output=OutputConfig.parse(_block(raw, "output")),
            base_dir=base_dir,
        )
        rc._check_cross_block()
        return rc

    def _check_cross_block(self):
        try:
            self.build_dof_map()
        except JunctionError as e:
            raise ConfigError(str(e), "mesh") from e
        n = self.sweep.n
        domain_half = min(self.geometry.a1, self.geometry.a2)
        if not 2.0 / n < domain_half:
            raise ConfigError(f"transition disc of radius 2/n = {2.0 / n:g} leaves the plate", "sweep.n")
        if 2.0 / n > self.geometry.rod_length:
            raise ConfigError(f"rod transition end 2/n = {2.0 / n:g} exceeds rod_length", "sweep.n")

    # -------------------------------------------------------------------------
    # builders
    # -------------------------------------------------------------------------

    def build_dof_map(self) -> DofMap:
        g, mesh = self.geometry, self.mesh
        plate = build_plate_mesh(PlateDomain(g.a1, g.a2, g.clamped), (mesh.plate_nx, mesh.plate_ny),
                                 mesh.plate_order)
        rod = build_rod_mesh(RodDomain(g.rod_length), mesh.rod_elements, mesh.rod_order)
        return build_dof_map(plate, rod)

    def build_forces(self) -> ForceData:
        return self.forces.build(self.base_dir)

    def build_material(self) -> MaterialParams:
        return self.material.params

    def build_coefficients(self) -> LimitCoefficients:
        return LimitCoefficients.named(self.material.coefficients)

    def build_thresholds(self) -> AdmissibilityThresholds:
        defaults = AdmissibilityThresholds.defaults(self.build_material(), self.geometry.rod_length)
        return AdmissibilityThresholds(
            threshold_p=self.forces.threshold_p or defaults.threshold_p,
            threshold_r=self.forces.threshold_r or defaults.threshold_r,
        )

    def resolve(self, relative: str) -> Path:
        return self.base_dir / relative

    # -------------------------------------------------------------------------
    # echo
    # -------------------------------------------------------------------------

    def normalized(self) -> dict:
        """Canonical dict with every default filled in."""
        solver = asdict(self.solver.options) | {
            "multistart": self.solver.multistart,
            "amplitude": self.solver.amplitude,
            "continuation": list(self.solver.continuation),
        }
        forces = dict(self.forces.fields)
        admissibility = {k: v for k, v in (("threshold_p", self.forces.threshold_p),
                                           ("threshold_r", self.forces.threshold_r)) if v is not None}
        if admissibility:
            forces["admissibility"] = admissibility
        return {
            "geometry": {"a1": self.geometry.a1, "a2": self.geometry.a2,
                         "clamped": list(self.geometry.clamped), "rod_length": self.geometry.rod_length},
            "mesh": {"plate_resolution": [self.mesh.plate_nx, self.mesh.plate_ny],
                     "rod_elements": self.mesh.rod_elements, "plate_order": self.mesh.plate_order,
                     "rod_order": self.mesh.rod_order},
            "material": {"lambda": self.material.lam, "mu": self.material.mu,
                         "coefficients": self.material.coefficients},
            "forces": forces,
            "solver": solver,
            "sweep": {"deltas": list(self.sweep.deltas), "n": self.sweep.n, "order": self.sweep.order,
                      "resolution_check": self.sweep.resolution_check, "state": self.sweep.state},
            "recovery": asdict(self.recovery),
            "output": {"directory": self.output.directory, "formats": list(self.output.formats)},
        }

    def echo(self) -> str:
        """Byte-stable text of normalized()."""
        return json.dumps(self.normalized(), sort_keys=True, indent=2)


def parse_run_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    """
    Parse run-file text.

    Raises:
        ConfigError: JSON syntax errors (with line/column) or invalid fields (with dotted path).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno, column=e.colno) from e
    return RunConfig.from_dict(raw, base_dir)


def load_run_config(path: Path | str) -> RunConfig:
    """Read and parse a run file; relative table/state paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read run file: {e.strerror}", str(path)) from e
    rc = parse_run_config(text, path.parent)
    logger.info(f"CONFIG loaded | path={path} | coefficients={rc.material.coefficients}")
    return rc
