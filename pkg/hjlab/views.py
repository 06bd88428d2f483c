from rest_framework import status
from rest_framework.decorators import api_view
from rest_framework.response import Response
from datetime import datetime
from django.http import JsonResponse
import traceback
import logging
import uuid

from .database import SessionLocal
from .exceptions import UnknownExperimentError
from .experiments import get_experiment, list_experiments as registry_entries
from .serializers import RunRequestSerializer
from .sqlalchemy_models import ExperimentRun, RunStatus
from .tasks import run_experiment_task

logger = logging.getLogger(__name__)


def _error_response(context, e):
    error_details = {
        'error': str(e),
        'error_type': type(e).__name__,
        'traceback': traceback.format_exc(),
    }
    logger.error(f"{context} error: {error_details}")
    return Response(error_details, status=status.HTTP_500_INTERNAL_SERVER_ERROR)


@api_view(['GET'])
def health_check(request):
    return JsonResponse({
        'status': 'HEALTHY',
        'current_time': datetime.utcnow().isoformat() + 'Z',
    })


@api_view(['GET'])
def list_experiments(request):
    tag = request.query_params.get('tag')
    return Response([
        {'id': spec.id, 'description': spec.description, 'tags': list(spec.tags)}
        for spec in registry_entries(tag=tag)
    ])


@api_view(['POST'])
def create_run(request, experiment_id):
    try:
        get_experiment(experiment_id)
    except UnknownExperimentError:
        return Response({'error': f'Unknown experiment {experiment_id}'}, status=status.HTTP_404_NOT_FOUND)

    serializer = RunRequestSerializer(data=request.data)
    if not serializer.is_valid():
        return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)
    overrides = serializer.validated_data['overrides']

    run_id = str(uuid.uuid4())
    db = SessionLocal()
    try:
        db.add(ExperimentRun(
            run_id=run_id,
            experiment_id=experiment_id,
            status=RunStatus.QUEUED,
            overrides=overrides,
        ))
        db.commit()

        run_experiment_task.delay(run_id, experiment_id, overrides)

        return Response(
            {'run_id': run_id, 'status': RunStatus.QUEUED.value},
            status=status.HTTP_202_ACCEPTED,
        )
    except Exception as e:
        db.rollback()
        return _error_response('Create run', e)
    finally:
        db.close()


@api_view(['GET'])
def get_run(request, run_id):
    db = SessionLocal()
    try:
        run = db.query(ExperimentRun).filter(ExperimentRun.run_id == run_id).first()
        if not run:
            return Response({'error': 'Run not found'}, status=status.HTTP_404_NOT_FOUND)
        return Response(run.as_dict())
    except Exception as e:
        return _error_response('Get run', e)
    finally:
        db.close()
