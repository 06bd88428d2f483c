from unittest.mock import MagicMock, patch

from rest_framework import status
from rest_framework.test import APISimpleTestCase

from hjlab.sqlalchemy_models import ExperimentRun, RunStatus


class HealthCheckTests(APISimpleTestCase):
    def test_healthy(self):
        response = self.client.get('/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['status'], 'HEALTHY')
        self.assertTrue(data['current_time'].endswith('Z'))


class ExperimentListTests(APISimpleTestCase):
    def test_lists_the_registry(self):
        response = self.client.get('/v1/experiments')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        ids = [entry['id'] for entry in response.json()]
        self.assertEqual(len(ids), 8)
        self.assertIn('ex-5-2', ids)

    def test_tag_filter(self):
        response = self.client.get('/v1/experiments', {'tag': 'nonconvergence'})
        self.assertEqual([entry['id'] for entry in response.json()], ['ex-5-4', 'ex-5-5'])


@patch('hjlab.views.run_experiment_task')
@patch('hjlab.views.SessionLocal')
class CreateRunTests(APISimpleTestCase):
    def test_unknown_experiment(self, session_local, task):
        response = self.client.post('/v1/experiments/ex-9-9/runs', {}, format='json')
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        session_local.assert_not_called()
        task.delay.assert_not_called()

    def test_invalid_override(self, session_local, task):
        response = self.client.post('/v1/experiments/ex-5-2/runs', {'overrides': {'cfl': 1.5}}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('overrides', response.json())
        task.delay.assert_not_called()

    def test_unknown_override_key(self, session_local, task):
        response = self.client.post('/v1/experiments/ex-5-2/runs', {'overrides': {'speed': 2}}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    def test_run_is_queued(self, session_local, task):
        db = session_local.return_value
        response = self.client.post('/v1/experiments/ex-5-2/runs', {'overrides': {'dx': 0.02}}, format='json')
        self.assertEqual(response.status_code, status.HTTP_202_ACCEPTED)
        data = response.json()
        self.assertEqual(data['status'], 'QUEUED')

        record = db.add.call_args[0][0]
        self.assertIsInstance(record, ExperimentRun)
        self.assertEqual(record.run_id, data['run_id'])
        self.assertEqual(record.status, RunStatus.QUEUED)
        db.commit.assert_called_once()
        db.close.assert_called_once()
        task.delay.assert_called_once_with(data['run_id'], 'ex-5-2', {'dx': 0.02})

    def test_database_failure(self, session_local, task):
        db = session_local.return_value
        db.commit.side_effect = RuntimeError('database is down')
        with self.assertLogs('hjlab.views', 'ERROR'):
            response = self.client.post('/v1/experiments/ex-5-2/runs', {}, format='json')
        self.assertEqual(response.status_code, status.HTTP_500_INTERNAL_SERVER_ERROR)
        self.assertEqual(response.json()['error_type'], 'RuntimeError')
        db.rollback.assert_called_once()
        task.delay.assert_not_called()


@patch('hjlab.views.SessionLocal')
class GetRunTests(APISimpleTestCase):
    def query_returns(self, session_local, run):
        query = MagicMock()
        query.filter.return_value.first.return_value = run
        session_local.return_value.query.return_value = query

    def test_missing_run(self, session_local):
        self.query_returns(session_local, None)
        response = self.client.get('/v1/runs/nope')
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)

    def test_finished_run(self, session_local):
        run = ExperimentRun(
            run_id='r-1',
            experiment_id='ex-5-2',
            status=RunStatus.PASSED,
            overrides={},
            exit_status=0,
            summary='summary: exact_error PASS\nsummary: sandwich PASS',
        )
        self.query_returns(session_local, run)
        response = self.client.get('/v1/runs/r-1')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.json()
        self.assertEqual(data['status'], 'PASSED')
        self.assertEqual(data['summary'], ['summary: exact_error PASS', 'summary: sandwich PASS'])
        self.assertIsNone(data['finished_at'])
