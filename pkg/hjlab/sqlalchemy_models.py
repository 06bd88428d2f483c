from sqlalchemy import Column, String, Integer, Text, DateTime, Enum, JSON
from sqlalchemy.sql import func
from .database import Base
import enum


class RunStatus(str, enum.Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    PASSED = "PASSED"
    FAILED = "FAILED"
    ERROR = "ERROR"


class ExperimentRun(Base):
    __tablename__ = 'experiment_runs'

    run_id = Column(String(36), primary_key=True, index=True)
    experiment_id = Column(String(64), nullable=False, index=True)
    status = Column(Enum(RunStatus), default=RunStatus.QUEUED, nullable=False)
    overrides = Column(JSON, nullable=False, default=dict)
    exit_status = Column(Integer, nullable=True)
    artifact_dir = Column(String(1024), nullable=True)
    summary = Column(Text, nullable=True)
    error = Column(Text, nullable=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
    finished_at = Column(DateTime(timezone=True), nullable=True)

    def as_dict(self):
        return {
            'run_id': self.run_id,
            'experiment_id': self.experiment_id,
            'status': self.status.value,
            'overrides': self.overrides or {},
            'exit_status': self.exit_status,
            'artifact_dir': self.artifact_dir,
            'summary': self.summary.splitlines() if self.summary else [],
            'error': self.error,
            'created_at': self.created_at.isoformat() if self.created_at else None,
            'finished_at': self.finished_at.isoformat() if self.finished_at else None,
        }

    def __repr__(self):
        return f"<ExperimentRun(run_id='{self.run_id}', experiment_id='{self.experiment_id}', status='{self.status}')>"
