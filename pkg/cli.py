"""
Junction - Plate-Rod Limit Model Solver
Command-Line Entry Point

Subcommands:
    solve         admissibility check, then Newton minimization of the limit energy
    sweep         solve (or reload a state), smooth near the junction, delta sweep
    decompose     plate or rod decomposition of a sampled 3D field
    check-forces  admissibility report of the configured force data

Exit codes: 0 success, 2 configuration/input error, 3 solver did not
converge, 4 nonphysical deformation in a sweep row.

Usage:
    python cli.py solve --config configs/demo.json --out results/demo
    python cli.py sweep --config configs/demo.json --threads 4
    python cli.py decompose --field samples/rod.csv --kind rod
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from config import config
from mechanics import __version__
from mechanics.decomposition import (
    centerline_identity_residual,
    decompose_plate,
    decompose_rod,
    read_sampled_field,
    seminorm_dist,
    seminorm_Gs,
)
from mechanics.errors import JunctionError
from mechanics.forces import check_admissibility
from mechanics.geometry import gauss_legendre
from mechanics.limit_model import LimitState, recover_W3
from mechanics.recovery3d import delta_sweep, smooth_state
from mechanics.solver import SolveReport, continuation_sweep, minimize, minimize_multistart
from results import ResultBundle, load_state
from run_config import ConfigError, RunConfig, load_run_config
from services.logger import get_logger, log_admissibility, setup_root_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_NONPHYSICAL = 4


# =============================================================================
# HELPERS
# =============================================================================

class Timer:
    """Accumulates wall-clock seconds per named phase."""

    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


def _output_dir(out: str | None, rc: RunConfig | None, command: str) -> Path:
    if out:
        return Path(out)
    if rc is not None and rc.output.directory:
        return rc.resolve(rc.output.directory)
    return Path(config.OUTPUT_DIR) / command


def _constraint_residual(state: LimitState) -> dict:
    """
    Increments of the recovered W3 over each rod element against an
    independent higher-order quadrature of -1/2 |W'|^2, and the junction value.
    """
    nodes = state.rod_mesh.nodes
    s, w = gauss_legendre(2 * state.rod_exact_order, 0.0, 1.0)
    h = np.diff(nodes)
    pts = nodes[:-1, None] + h[:, None] * s
    W = state.rod_jet(pts.ravel()).W
    slope_sq = (W[:, 0, 1] ** 2 + W[:, 1, 1] ** 2).reshape(pts.shape)
    expected = -0.5 * np.sum(slope_sq * w, axis=1) * h
    W3 = recover_W3(state, nodes)
    return {
        "w3_ode_residual": float(np.max(np.abs(np.diff(W3) - expected))),
        "w3_junction_residual": float(W3[0] - state.origin_value),
    }


def _solve(rc: RunConfig, timer: Timer, threads: int, seed: int) -> tuple[SolveReport, list[SolveReport]]:
    dm = rc.build_dof_map()
    fd, m = rc.build_forces(), rc.build_material()
    coefficients, thresholds = rc.build_coefficients(), rc.build_thresholds()
    opts = rc.solver.options
    if config.SOLVER_MAX_ITERATIONS > 0:
        opts = replace(opts, max_iterations=config.SOLVER_MAX_ITERATIONS)

    s0 = LimitState.zeros(dm)
    if rc.solver.continuation:
        reports = timer.run("solve", continuation_sweep, fd, list(rc.solver.continuation), dm, m, opts,
                            coefficients, None, thresholds)
        return reports[-1], reports
    if rc.solver.multistart > 0:
        return timer.run("solve", minimize_multistart, s0, fd, m, opts, coefficients,
                         rc.solver.multistart, seed, rc.solver.amplitude, threads)
    report = timer.run("solve", minimize, s0, fd, m, opts, coefficients, thresholds=thresholds)
    return report, [report]


def _admissibility(rc: RunConfig) -> dict:
    dm = rc.build_dof_map()
    report = check_admissibility(rc.build_forces(), rc.build_thresholds(), dm.plate_mesh, dm.rod_mesh)
    log_admissibility(logger, report.verdict, report.fp_norm, report.min_Fr3)
    return report.to_dict()


def _archive(command: str, rc: RunConfig | None, summary: dict, out: Path, sweep=None):
    if not config.archive_enabled:
        return
    from database.connection import archive_solve, archive_sweep

    echo = rc.echo() if rc is not None else ""
    try:
        run_id = archive_solve(command, echo, summary, __version__, str(out))
        if sweep is not None:
            archive_sweep(run_id, sweep)
        logger.info(f"ARCHIVED | command={command} | run_id={run_id} | db={config.get_safe_database_url()}")
    except Exception as e:
        # the bundle on disk is the primary record
        logger.error(f"ARCHIVE FAILED | command={command} | {e}")


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_solve(rc: RunConfig, out: Path, threads: int = 1, seed: int = 0) -> tuple[ResultBundle, int]:
    timer = Timer()
    admissibility = timer.run("admissibility", _admissibility, rc)
    best, reports = _solve(rc, timer, threads, seed)
    summary = {k: v for k, v in best.to_dict().items() if k not in ("energies", "gradient_norms", "step_sizes", "shifts")}
    summary.update(_constraint_residual(best.state))
    bundle = ResultBundle(
        command="solve",
        config_echo=rc.normalized(),
        summary=summary,
        admissibility=admissibility,
        solves=[r.to_dict() for r in reports],
        state=best.state,
        timings=timer.timings,
    )
    bundle.write(out, rc.output.formats)
    _archive("solve", rc, summary, out)
    return bundle, EXIT_OK if best.converged else EXIT_NOT_CONVERGED


def cmd_sweep(rc: RunConfig, out: Path, threads: int = 1, seed: int = 0) -> tuple[ResultBundle, int]:
    timer = Timer()
    fd, m, coefficients = rc.build_forces(), rc.build_material(), rc.build_coefficients()
    solves = []
    exit_code = EXIT_OK
    if rc.sweep.state:
        state = load_state(rc.resolve(rc.sweep.state), rc.build_dof_map())
        logger.info(f"SWEEP | state loaded from {rc.sweep.state}")
    else:
        best, reports = _solve(rc, timer, threads, seed)
        state, solves = best.state, [r.to_dict() for r in reports]
        if not best.converged:
            exit_code = EXIT_NOT_CONVERGED

    ss = timer.run("smooth", smooth_state, state, rc.sweep.n, fd, m, coefficients)
    table = timer.run(
        "sweep", delta_sweep, ss, fd, m, list(rc.sweep.deltas), rc.sweep.n, coefficients,
        rc.sweep.order, rc.recovery.junction_frame, rc.recovery.boundary_layer, rc.recovery.substeps,
        rc.sweep.resolution_check,
    )
    nonphysical = bool((table["status"] != "ok").any())
    gaps = table["gap"].to_numpy()
    summary = {
        "status": "nonphysical" if nonphysical else "ok",
        "n": rc.sweep.n,
        "limit_energy": float(table["limit_energy"].iloc[0]),
        "smoothing_energy_change": ss.energy_change,
        "gap_decreasing": bool(np.all(np.diff(gaps) < 0.0)),
        "final_gap": float(gaps[-1]),
    }
    if solves:
        summary["solve_status"] = solves[-1]["status"]
    bundle = ResultBundle(
        command="sweep",
        config_echo=rc.normalized(),
        summary=summary,
        solves=solves,
        state=state,
        sweep=table,
        timings=timer.timings,
    )
    bundle.write(out, rc.output.formats)
    _archive("sweep", rc, summary | {"energy": summary["limit_energy"]}, out, table)
    if nonphysical:
        exit_code = EXIT_NONPHYSICAL
    return bundle, exit_code


def cmd_decompose(field_path: Path, out: Path, kind: str | None = None,
                  rc: RunConfig | None = None) -> tuple[ResultBundle, int]:
    timer = Timer()
    sampled = timer.run("read", read_sampled_field, field_path, kind)
    if sampled.kind == "plate":
        d = timer.run("decompose", decompose_plate, sampled)
        residuals = {
            "mean_residual": d.mean_residual,
            "moment_residual": d.moment_residual,
            "reconstruction_error": d.reconstruction_error,
            "Gs": seminorm_Gs(sampled),
        }
    else:
        d = timer.run("decompose", decompose_rod, sampled)
        residuals = {
            "warping_residual": d.residual,
            "reconstruction_error": d.reconstruction_error,
            "identity_residual": float(np.max(np.abs(centerline_identity_residual(d.Q)))),
            "degenerate_sections": list(d.degenerate_sections),
        }
        if sampled.gradients is not None:
            residuals["dist"] = seminorm_dist(sampled)
    bundle = ResultBundle(
        command="decompose",
        config_echo=rc.normalized() if rc is not None else None,
        summary={"status": "ok", "kind": sampled.kind, "delta": sampled.delta, "field": str(field_path)},
        decompositions={sampled.kind: d.to_frame()},
        residuals=residuals,
        timings=timer.timings,
    )
    bundle.write(out)
    _archive("decompose", rc, {"status": "ok"}, out)
    return bundle, EXIT_OK


def cmd_check_forces(rc: RunConfig, out: Path) -> tuple[ResultBundle, int]:
    report = _admissibility(rc)
    for key, value in report.items():
        print(f"{key:>12}: {value}")
    bundle = ResultBundle(command="check-forces", config_echo=rc.normalized(),
                          summary={"status": report["verdict"]}, admissibility=report)
    bundle.write(out, rc.output.formats)
    return bundle, EXIT_OK


# =============================================================================
# ENTRY POINT
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="junction", description="Plate-rod limit model solver")
    parser.add_argument("--version", action="version", version=f"junction {__version__}")
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("solve", "Minimize the limit energy"),
                            ("sweep", "Solve, smooth and run the delta sweep"),
                            ("check-forces", "Report force admissibility")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run file")
        p.add_argument("--out", default=None, help="Bundle directory")
        if name != "check-forces":
            p.add_argument("--threads", type=int, default=None, help="Worker threads (multi-start)")
            p.add_argument("--seed", type=int, default=0, help="Seed for multi-start perturbations")

    p = sub.add_parser("decompose", help="Decompose a sampled 3D field")
    p.add_argument("--field", required=True, help="Sampled field CSV")
    p.add_argument("--kind", choices=("plate", "rod"), default=None, help="Expected grid kind")
    p.add_argument("--config", default=None, help="Optional run file echoed into the bundle")
    p.add_argument("--out", default=None, help="Bundle directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        setup_root_logger(args.log_level)

    problems = config.validate()
    if problems:
        for problem in problems:
            logger.error(f"CONFIG | {problem}")
        return EXIT_CONFIG

    try:
        rc = load_run_config(args.config) if args.config else None
        out = _output_dir(args.out, rc, args.command)
        if args.command == "decompose":
            _, code = cmd_decompose(Path(args.field), out, args.kind, rc)
        elif args.command == "check-forces":
            _, code = cmd_check_forces(rc, out)
        else:
            threads = args.threads or config.THREADS
            command = cmd_solve if args.command == "solve" else cmd_sweep
            _, code = command(rc, out, threads, args.seed)
    except ConfigError as e:
        logger.error(f"CONFIG ERROR | {e}")
        return EXIT_CONFIG
    except (JunctionError, OSError) as e:
        logger.error(f"INPUT ERROR | {e}")
        return EXIT_CONFIG

    logger.info(f"DONE | command={args.command} | exit={code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
