from celery import shared_task
from datetime import datetime, timezone
import logging

from .database import SessionLocal
from .exceptions import HJLabError
from .experiments import run_experiment
from .sqlalchemy_models import ExperimentRun, RunStatus

logger = logging.getLogger(__name__)


@shared_task(bind=True, max_retries=3, default_retry_delay=60)
def run_experiment_task(self, run_id, experiment_id, overrides=None):
    """Execute a queued run and store its verdicts on the run record."""
    db = SessionLocal()
    try:
        run = db.query(ExperimentRun).filter(ExperimentRun.run_id == run_id).first()
        if not run:
            return f"Run {run_id} not found"
        if run.status in (RunStatus.PASSED, RunStatus.FAILED):
            return f"Run {run_id} already finished"

        run.status = RunStatus.RUNNING
        db.commit()

        try:
            result = run_experiment(experiment_id, overrides=overrides or {})
        except HJLabError as e:
            logger.error(f"Run {run_id} ({experiment_id}) failed: {type(e).__name__}: {e}")
            run.status = RunStatus.ERROR
            run.error = f"{type(e).__name__}: {e}"
        else:
            run.status = RunStatus.PASSED if result.passed else RunStatus.FAILED
            run.exit_status = result.exit_status
            run.artifact_dir = str(result.artifact_dir)
            run.summary = "\n".join(result.summary_lines())
        run.finished_at = datetime.now(timezone.utc)
        db.commit()
        return f"Run {run_id} finished with status {run.status.value}"
    except Exception as e:
        db.rollback()
        if self.request.retries >= self.max_retries:
            return f"Error executing run {run_id}: Max retries exceeded. Last error: {str(e)}"
        raise self.retry(exc=e, countdown=60)
    finally:
        db.close()


@shared_task
def execute_experiment(experiment_id, overrides=None):
    """One registry entry, no run record; used by ``hjlab run-all --parallel``."""
    result = run_experiment(experiment_id, overrides=overrides or {})
    return {
        'experiment_id': result.experiment_id,
        'exit_status': result.exit_status,
        'artifact_dir': str(result.artifact_dir),
        'summary': result.summary_lines(),
    }
