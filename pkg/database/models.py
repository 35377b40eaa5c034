"""
Junction - Plate-Rod Limit Model Solver
Run Archive Models (SQLAlchemy ORM)
"""

from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Index, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


# =============================================================================
# COMMAND CONSTANTS
# =============================================================================

class Command:
    """CLI subcommands that produce archived runs."""
    SOLVE = "solve"
    SWEEP = "sweep"
    DECOMPOSE = "decompose"
    CHECK_FORCES = "check-forces"


# =============================================================================
# SOLVE RUN MODEL
# =============================================================================

class SolveRun(Base):
    """
    One CLI invocation. The config hash identifies the normalized run file,
    so repeated runs of the same experiment group together.
    """
    __tablename__ = 'solve_runs'

    id = Column(Integer, primary_key=True, autoincrement=True)

    command = Column(String(32), nullable=False, default=Command.SOLVE, index=True)
    config_hash = Column(String(64), nullable=False, index=True)  # sha256 of the normalized config
    config_echo = Column(Text, nullable=True)

    # Outcome
    status = Column(String(32), nullable=False)  # converged, max-iter, line-search-failure, ...
    energy = Column(Float, nullable=True)
    gradient_norm = Column(Float, nullable=True)
    iterations = Column(Integer, default=0)
    verdict = Column(String(64), nullable=True)
    admissibility = Column(String(32), nullable=True)

    version = Column(String(16), nullable=False)
    output_dir = Column(Text, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow, index=True)

    sweep_rows = relationship("SweepRow", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        energy = "n/a" if self.energy is None else f"{self.energy:.6e}"
        return f"<SolveRun [{self.command}] #{self.id} | {self.status} | J={energy}>"


# =============================================================================
# SWEEP ROW MODEL
# =============================================================================

class SweepRow(Base):
    """One thickness of a delta sweep. Nonphysical rows store total = NULL."""
    __tablename__ = 'sweep_rows'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('solve_runs.id', ondelete='CASCADE'), nullable=False)

    delta = Column(Float, nullable=False)
    n = Column(Integer, nullable=False)
    elastic = Column(Float, nullable=True)
    load = Column(Float, nullable=True)
    total = Column(Float, nullable=True)
    limit_energy = Column(Float, nullable=True)
    gap = Column(Float, nullable=True)
    status = Column(String(32), nullable=False, default="ok")

    run = relationship("SolveRun", back_populates="sweep_rows")

    __table_args__ = (
        Index('idx_sweep_rows_run', 'run_id', 'delta'),
    )

    def __repr__(self):
        return f"<SweepRow run={self.run_id} | delta={self.delta:g} | gap={self.gap} | {self.status}>"
