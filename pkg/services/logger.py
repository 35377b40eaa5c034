"""
Junction - Plate-Rod Limit Model Solver
Centralized Logging Configuration

Usage:
    from services.logger import get_logger
    logger = get_logger(__name__)
    logger.info("Starting continuation sweep")
"""

import os
import sys
import logging
from typing import Optional


# =============================================================================
# LOG FORMAT
# =============================================================================
# Logs go to stderr so stdout stays free for command output.
# Format: [LEVEL] [module_name] message

LOG_FORMAT = "[%(levelname)s] [%(name)s] %(message)s"
DETAILED_FORMAT = "%(asctime)s | [%(levelname)s] [%(name)s:%(lineno)d] %(message)s"


def resolve_level(name: Optional[str] = None) -> int:
    """Numeric level for a name, falling back to LOG_LEVEL and then INFO."""
    level = logging.getLevelName((name or os.getenv("LOG_LEVEL", "INFO")).upper())
    return level if isinstance(level, int) else logging.INFO


def setup_root_logger(level: Optional[str] = None):
    """
    Configure the root logger for the application.
    Called once at startup; the CLI calls it again when --log-level is given.
    DEBUG=true switches to the timestamped format.
    """
    log_level = resolve_level(level)
    use_detailed = os.getenv("DEBUG", "false").lower() == "true"

    logging.basicConfig(
        level=log_level,
        format=DETAILED_FORMAT if use_detailed else LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )

    # Reduce noise from third-party libraries
    logging.getLogger("sqlalchemy.engine").setLevel(
        logging.DEBUG if os.getenv("SQL_ECHO", "false").lower() == "true"
        else logging.WARNING
    )

    logging.getLogger().debug(
        f"Logging initialized | level={logging.getLevelName(log_level)} | debug={use_detailed}"
    )


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger instance for a module.

    Args:
        name: Module name (typically __name__). If None, returns root logger.

    Returns:
        Configured logger instance.
    """
    return logging.getLogger(name)


# =============================================================================
# STRUCTURED LOGGING HELPERS
# =============================================================================

def log_newton_step(logger: logging.Logger, iteration: int, energy: float,
                    gradient_norm: float, step: float, shift: float):
    """Log one Newton iteration with consistent format."""
    logger.debug(
        f"NEWTON it={iteration} | energy={energy:.12e} | grad={gradient_norm:.3e} "
        f"| step={step:.3e} | shift={shift:.1e}"
    )


def log_solve_result(logger: logging.Logger, status: str, iterations: int, energy: float,
                     gradient_norm: float, verdict: str, load_scale: float = 1.0):
    """Log the outcome of a minimization."""
    if status == "converged":
        logger.info(
            f"SOLVE OK | t={load_scale:g} | iterations={iterations} | energy={energy:.12e} "
            f"| grad={gradient_norm:.3e} | verdict={verdict}"
        )
    else:
        logger.warning(
            f"SOLVE FAIL | t={load_scale:g} | status={status} | iterations={iterations} "
            f"| energy={energy:.12e} | grad={gradient_norm:.3e}"
        )


def log_admissibility(logger: logging.Logger, verdict: str, fp_norm: float, min_Fr3: float):
    """Log the force admissibility check."""
    level = logging.INFO if verdict == "admissible" else logging.WARNING
    logger.log(level, f"FORCES {verdict.upper()} | fp_norm={fp_norm:.6g} | min_Fr3={min_Fr3:.6g}")


def log_sweep_row(logger: logging.Logger, delta: float, total: float, gap: float, status: str):
    """Log one thickness of a recovery sweep."""
    if status == "ok":
        logger.info(f"SWEEP delta={delta:g} | total={total:.10e} | gap={gap:.3e}")
    else:
        logger.warning(f"SWEEP delta={delta:g} | status={status}")


def log_decomposition(logger: logging.Logger, kind: str, delta: float, residual: float):
    """Log a sampled-field decomposition."""
    logger.info(f"DECOMPOSE OK | kind={kind} | delta={delta:g} | residual={residual:.3e}")


def log_db_operation(logger: logging.Logger, operation: str, table: str, count: int = 1):
    """Log a database operation with consistent format."""
    logger.debug(f"DB {operation} | table={table} | rows={count}")


# =============================================================================
# INITIALIZATION
# =============================================================================

# Auto-setup on import (safe to call multiple times due to force=True)
setup_root_logger()
