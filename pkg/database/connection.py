"""
Junction - Plate-Rod Limit Model Solver
Run Archive Connection & Session Management

The archive is optional: it is only touched when DATABASE_URL is set (or a
URL is passed to init_database). sqlite URLs work without extra drivers.

Usage:
    init_database("sqlite:///runs.db")
    run_id = archive_solve("solve", config_echo, report.to_dict(), __version__)
"""

import hashlib
import math
from contextlib import contextmanager

from sqlalchemy import create_engine, inspect
from sqlalchemy.exc import OperationalError, ProgrammingError, SQLAlchemyError
from sqlalchemy.orm import scoped_session, sessionmaker

from config import config
from database.models import Base, SolveRun, SweepRow
from services.logger import get_logger, log_db_operation

logger = get_logger(__name__)


def normalize_database_url(url: str) -> str:
    """Heroku-style 'postgres://' URLs need 'postgresql://' for SQLAlchemy."""
    if url.startswith("postgres://"):
        url = url.replace("postgres://", "postgresql://", 1)
    return url


engine = None
SessionLocal = None


def init_database(url: str | None = None):
    """
    Initialize the engine and create the archive tables.

    Args:
        url: Database URL; defaults to DATABASE_URL.

    Raises:
        ValueError: no URL configured.
    """
    global engine, SessionLocal

    database_url = normalize_database_url(url or config.DATABASE_URL)
    if not database_url:
        raise ValueError("DATABASE_URL is not set; the run archive is disabled")

    safe_url = database_url.split("@")[-1] if "@" in database_url else database_url
    logger.info(f"Connecting to run archive: {safe_url}")
    if config.SQL_ECHO:
        logger.warning("SQL_ECHO=True - All SQL queries will be logged")

    options = {"echo": config.SQL_ECHO}
    if not database_url.startswith("sqlite"):
        options.update(pool_size=5, max_overflow=10, pool_pre_ping=True)
    engine = create_engine(database_url, **options)

    try:
        Base.metadata.create_all(bind=engine)
        logger.info("Archive tables verified/created successfully")
    except SQLAlchemyError as e:
        logger.error(f"Failed to create tables: {e}")
        raise

    SessionLocal = scoped_session(sessionmaker(autocommit=False, autoflush=False, bind=engine))
    return engine


def get_session():
    """Get a database session; initializes from DATABASE_URL on first use."""
    if SessionLocal is None:
        init_database()
    return SessionLocal()


@contextmanager
def get_db_context():
    """
    Context manager for database sessions: commit on success, rollback and
    log on failure, always close.

    Usage:
        with get_db_context() as db:
            db.query(SolveRun).all()
    """
    session = get_session()
    try:
        yield session
        session.commit()
    except Exception as e:
        session.rollback()
        logger.error(f"Database transaction failed: {e}")
        raise
    finally:
        session.close()


# =============================================================================
# ARCHIVE OPERATIONS
# =============================================================================

def config_hash(config_echo: str) -> str:
    return hashlib.sha256(config_echo.encode("utf-8")).hexdigest()


def _finite(value):
    """None for missing or non-finite numbers (SQL has no infinity)."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def archive_solve(command: str, config_echo: str, summary: dict, version: str,
                  output_dir: str | None = None) -> int:
    """
    Store one run.

    Args:
        command: CLI subcommand.
        config_echo: Normalized config text.
        summary: Keys read when present: status, energy, gradient_norm,
            iterations, verdict, admissibility.
        version: Tool version.
        output_dir: Bundle directory.

    Returns:
        The new run id.
    """
    admissibility = summary.get("admissibility")
    if isinstance(admissibility, dict):
        admissibility = admissibility.get("verdict")
    with get_db_context() as db:
        run = SolveRun(
            command=command,
            config_hash=config_hash(config_echo),
            config_echo=config_echo,
            status=str(summary.get("status", "unknown")),
            energy=_finite(summary.get("energy")),
            gradient_norm=_finite(summary.get("gradient_norm")),
            iterations=int(summary.get("iterations", 0)),
            verdict=summary.get("verdict"),
            admissibility=admissibility,
            version=version,
            output_dir=output_dir,
        )
        db.add(run)
        db.flush()
        run_id = run.id
    log_db_operation(logger, "INSERT", "solve_runs", 1)
    return run_id


def archive_sweep(run_id: int, table) -> int:
    """
    Store the rows of a delta-sweep DataFrame under a run.

    Returns:
        Number of rows stored.
    """
    rows = [
        SweepRow(
            run_id=run_id,
            delta=float(r["delta"]),
            n=int(r["n"]),
            elastic=_finite(r["elastic"]),
            load=_finite(r["load"]),
            total=_finite(r["total"]),
            limit_energy=_finite(r["limit_energy"]),
            gap=_finite(r["gap"]),
            status=str(r["status"]),
        )
        for r in table.to_dict(orient="records")
    ]
    with get_db_context() as db:
        db.add_all(rows)
    log_db_operation(logger, "INSERT", "sweep_rows", len(rows))
    return len(rows)


def check_archive_health() -> dict:
    """
    Check that the archive tables and their columns exist.

    Returns:
        {"healthy": bool, "missing_columns": [...], "error": str | None}
    """
    if engine is None:
        init_database()

    result = {"healthy": True, "missing_columns": [], "error": None}
    try:
        inspector = inspect(engine)
        for table in Base.metadata.sorted_tables:
            present = {c["name"] for c in inspector.get_columns(table.name)} \
                if inspector.has_table(table.name) else set()
            for column in table.columns:
                if column.name not in present:
                    result["missing_columns"].append(f"{table.name}.{column.name}")
        if result["missing_columns"]:
            result["healthy"] = False
            logger.error(f"Archive health check FAILED - missing: {result['missing_columns']}")
        else:
            logger.info("Archive health check PASSED")
    except (OperationalError, ProgrammingError) as e:
        result["healthy"] = False
        result["error"] = str(e)
        logger.error(f"Archive health check ERROR: {e}")
    return result
