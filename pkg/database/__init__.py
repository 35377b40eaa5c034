"""
Junction Run Archive Module
"""

from database.models import Base, Command, SolveRun, SweepRow
from database.connection import (
    archive_solve,
    archive_sweep,
    check_archive_health,
    get_db_context,
    get_session,
    init_database,
)

__all__ = [
    "Base",
    "Command",
    "SolveRun",
    "SweepRow",
    "init_database",
    "get_session",
    "get_db_context",
    "archive_solve",
    "archive_sweep",
    "check_archive_health",
]
