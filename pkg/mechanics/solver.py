"""
Junction - Plate-Rod Limit Model Solver
Damped Newton Minimization, Load Continuation & Multi-Start

Usage:
    report = minimize(LimitState.zeros(dm), fd, m)
    print(report.status, report.energy, report.verdict)

    reports = continuation_sweep(fd, [0.25, 0.5, 1.0], dm, m)
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

from mechanics.assembly import EnergyModel
from mechanics.errors import SolverError
from mechanics.fem import DofMap
from mechanics.forces import AdmissibilityThresholds, ForceData, Verdict, check_admissibility
from mechanics.limit_model import LimitState
from mechanics.material import LimitCoefficients, MaterialParams
from services.logger import get_logger, log_admissibility, log_newton_step, log_solve_result

logger = get_logger(__name__)


class Status:
    CONVERGED = "converged"
    MAX_ITER = "max-iter"
    LINE_SEARCH_FAILURE = "line-search-failure"


# =============================================================================
# OPTIONS & REPORT
# =============================================================================

@dataclass(frozen=True)
class SolveOptions:
    """
    Newton solver settings.

    shift_initial is relative to max |diag H|; the shift grows by
    shift_growth until the direction is a descent direction.
    """
    gradient_tolerance: float = 1e-10
    max_iterations: int = 200
    armijo: float = 1e-4
    backtracking: float = 0.5
    shift_initial: float = 1e-8
    shift_growth: float = 10.0
    max_shift_attempts: int = 30
    min_step: float = 1e-12
    check_forces: bool = True

    def __post_init__(self):
        if not self.gradient_tolerance > 0.0:
            raise SolverError(f"gradient_tolerance must be positive, got {self.gradient_tolerance}")
        if self.max_iterations < 0:
            raise SolverError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if not 0.0 < self.armijo <= 0.5:
            raise SolverError(f"armijo constant must lie in (0, 1/2], got {self.armijo}")
        if not 0.0 < self.backtracking < 1.0:
            raise SolverError(f"backtracking factor must lie in (0, 1), got {self.backtracking}")
        if not (self.shift_initial > 0.0 and self.shift_growth > 1.0 and self.max_shift_attempts > 0):
            raise SolverError("shift policy needs shift_initial > 0, shift_growth > 1, max_shift_attempts > 0")
        if not 0.0 < self.min_step < 1.0:
            raise SolverError(f"min_step must lie in (0, 1), got {self.min_step}")


@dataclass
class SolveReport:
    """Outcome of one minimization. The state is kept even when not converged."""
    state: LimitState
    energy: float
    energies: list[float] = field(default_factory=list)
    gradient_norms: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    shifts: list[float] = field(default_factory=list)
    negative_eigenvalues: int = 0
    min_eigenvalue: float = float("nan")
    iterations: int = 0
    status: str = Status.CONVERGED
    load_scale: float = 1.0
    cold_restart: bool = False
    admissibility: str | None = None

    @property
    def gradient_norm(self) -> float:
        return self.gradient_norms[-1] if self.gradient_norms else float("nan")

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED

    @property
    def verdict(self) -> str:
        if not self.converged:
            return "not converged"
        if self.negative_eigenvalues == 0:
            return "certified minimal"
        return "stationary, not certified minimal"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "verdict": self.verdict,
            "energy": self.energy,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "negative_eigenvalues": self.negative_eigenvalues,
            "min_eigenvalue": self.min_eigenvalue,
            "load_scale": self.load_scale,
            "cold_restart": self.cold_restart,
            "admissibility": self.admissibility,
            "energies": list(self.energies),
            "gradient_norms": list(self.gradient_norms),
            "step_sizes": list(self.step_sizes),
            "shifts": list(self.shifts),
        }


# =============================================================================
# LINEAR ALGEBRA HELPERS
# =============================================================================

def _shifted_direction(H: sparse.csr_matrix, g: np.ndarray, opts: SolveOptions) -> tuple[np.ndarray, float]:
    """
    Newton direction of H + tau I with the smallest tau in the shift schedule
    that yields a descent direction.

    Raises:
        SolverError: when no shift in the schedule produces descent.
    """
    n = H.shape[0]
    scale = max(float(np.max(np.abs(H.diagonal()))) if n else 1.0, 1.0)
    tau = 0.0
    identity = sparse.identity(n, format="csc")
    for attempt in range(opts.max_shift_attempts + 1):
        try:
            d = -splu((H + tau * identity).tocsc()).solve(g)
        except RuntimeError:
            d = None
        if d is not None and np.all(np.isfinite(d)) and float(g @ d) < 0.0:
            return d, tau
        tau = opts.shift_initial * scale if tau == 0.0 else tau * opts.shift_growth
    raise SolverError("no Hessian shift produced a descent direction")


def hessian_inertia(H: sparse.spmatrix) -> tuple[int, float]:
    """
    (number of negative eigenvalues, smallest eigenvalue) of a symmetric
    reduced Hessian. Eigenvalues below -1e-10 * max |eig| count as negative.
    """
    if H.shape[0] == 0:
        return 0, float("nan")
    eig = linalg.eigvalsh(H.toarray())
    cutoff = 1e-10 * max(float(np.max(np.abs(eig))), np.finfo(float).tiny)
    return int(np.sum(eig < -cutoff)), float(eig[0])


# =============================================================================
# MINIMIZATION
# =============================================================================

def minimize(s0: LimitState, fd: ForceData, m: MaterialParams, opts: SolveOptions | None = None,
             coefficients: LimitCoefficients | None = None, load_scale: float = 1.0,
             thresholds: AdmissibilityThresholds | None = None) -> SolveReport:
    """
    Damped Newton descent on the total limit energy over the free DOFs.

    Args:
        s0: Initial state (its constrained DOFs must be zero).
        fd: Force data, used as given (load_scale is recorded only).
        m: Material.
        opts: Solver options.
        coefficients: Rod torsion / couple-load factors.
        load_scale: Label stored on the report.
        thresholds: Admissibility thresholds for the pre-solve warning.

    Returns:
        SolveReport; a line-search failure keeps the last iterate.
    """
    opts = opts or SolveOptions()
    dm = s0.dofmap
    admissibility = None
    if opts.check_forces:
        thresholds = thresholds or AdmissibilityThresholds.defaults(m, dm.rod_mesh.length)
        adm = check_admissibility(fd, thresholds, dm.plate_mesh, dm.rod_mesh)
        admissibility = adm.verdict
        if adm.verdict != Verdict.ADMISSIBLE:
            log_admissibility(logger, adm.verdict, adm.fp_norm, adm.min_Fr3)

    model = EnergyModel(dm, fd, m, coefficients)
    free = dm.free
    x = np.array(s0.values, dtype=float)
    x[dm.constrained_mask] = 0.0

    energy, g_full, H_full = model.evaluate(x)
    g = g_full[free]
    report = SolveReport(state=s0, energy=energy, load_scale=load_scale, admissibility=admissibility)
    report.energies.append(energy)
    report.gradient_norms.append(float(np.max(np.abs(g))) if g.size else 0.0)
    status = Status.MAX_ITER
    eps_energy = 1e3 * np.finfo(float).eps

    for iteration in range(opts.max_iterations + 1):
        if report.gradient_norms[-1] <= opts.gradient_tolerance:
            status = Status.CONVERGED
            break
        if iteration == opts.max_iterations:
            break

        H = H_full[free][:, free]
        try:
            d, tau = _shifted_direction(H, g, opts)
        except SolverError as e:
            logger.warning(f"NEWTON it={iteration} | {e}")
            status = Status.LINE_SEARCH_FAILURE
            break
        slope = float(g @ d)

        alpha = 1.0
        accepted = False
        trial = x.copy()
        while alpha >= opts.min_step:
            trial[free] = x[free] + alpha * d
            e_trial = model.energy(trial)
            if e_trial <= energy + opts.armijo * alpha * slope:
                accepted = True
                break
            if abs(alpha * slope) <= eps_energy * (1.0 + abs(energy)) and e_trial <= energy + eps_energy * (1.0 + abs(energy)):
                # decrease below round-off: accept when the gradient still shrinks
                _, g_trial, _ = model.evaluate(trial, hessian=False)
                if np.max(np.abs(g_trial[free])) < report.gradient_norms[-1]:
                    accepted = True
                    break
            alpha *= opts.backtracking

        if not accepted:
            status = Status.LINE_SEARCH_FAILURE
            logger.warning(f"NEWTON it={iteration} | line search failed | slope={slope:.3e}")
            break

        x = trial
        energy, g_full, H_full = model.evaluate(x)
        g = g_full[free]
        report.iterations = iteration + 1
        report.energies.append(energy)
        report.gradient_norms.append(float(np.max(np.abs(g))))
        report.step_sizes.append(alpha)
        report.shifts.append(tau)
        log_newton_step(logger, iteration + 1, energy, report.gradient_norms[-1], alpha, tau)

    report.state = LimitState(dm, x)
    report.energy = energy
    report.status = status
    report.negative_eigenvalues, report.min_eigenvalue = hessian_inertia(H_full[free][:, free])
    log_solve_result(logger, status, report.iterations, energy, report.gradient_norm,
                     report.verdict, load_scale)
    return report


def continuation_sweep(fd: ForceData, scales: list[float], dm: DofMap, m: MaterialParams,
                       opts: SolveOptions | None = None, coefficients: LimitCoefficients | None = None,
                       initial: LimitState | None = None,
                       thresholds: AdmissibilityThresholds | None = None) -> list[SolveReport]:
    """
    Solve at forces t * fd for each t in scales, warm-starting every step
    from the previous solution. A failed step is retried from the zero
    state and flagged with cold_restart.

    Raises:
        SolverError: if scales is empty or not increasing.
    """
    scales = [float(t) for t in scales]
    if not scales:
        raise SolverError("continuation needs at least one load scale")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise SolverError(f"load scales must be increasing, got {scales}")

    state = initial or LimitState.zeros(dm)
    reports: list[SolveReport] = []
    for t in scales:
        scaled = fd.scaled(t)
        report = minimize(state, scaled, m, opts, coefficients, load_scale=t, thresholds=thresholds)
        if not report.converged:
            logger.warning(f"CONTINUATION t={t:g} | {report.status} | retrying from zero state")
            retry = minimize(LimitState.zeros(dm), scaled, m, opts, coefficients, load_scale=t,
                             thresholds=thresholds)
            report = replace(retry, cold_restart=True)
        reports.append(report)
        state = report.state
    return reports


def minimize_multistart(s0: LimitState, fd: ForceData, m: MaterialParams, opts: SolveOptions | None = None,
                        coefficients: LimitCoefficients | None = None, starts: int = 4,
                        seed: int = 0, amplitude: float = 1e-3,
                        threads: int = 1) -> tuple[SolveReport, list[SolveReport]]:
    """
    Minimize from s0 and from `starts` random perturbations of it.

    The perturbations are drawn up front from one seeded generator, so the
    result does not depend on the thread count.

    Returns:
        (best converged report, or the first report if none converged; all reports in start order)
    """
    dm = s0.dofmap
    rng = np.random.default_rng(seed)
    initial_states = [s0] + [
        LimitState.from_free(dm, s0.free_values + amplitude * rng.standard_normal(dm.n_free))
        for _ in range(starts)
    ]

    def run(state: LimitState) -> SolveReport:
        return minimize(state, fd, m, opts, coefficients)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run, initial_states))
    else:
        reports = [run(s) for s in initial_states]

    converged = [r for r in reports if r.converged]
    best = min(converged, key=lambda r: r.energy) if converged else reports[0]
    logger.info(
        f"MULTISTART | starts={len(reports)} | converged={len(converged)} | best_energy={best.energy:.12e}"
    )
    return best, reports
