import json
import os
import shutil
import tempfile
from io import StringIO
from unittest import mock
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase
import numpy as np
from rest_framework.exceptions import ValidationError

from rmfnn_app.models import ExperimentRun, TrialResult
from rmfnn_app.utils.constants import RunStatus, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO, PREDICTIONS_FILE, REPORT_FILE, \
    MANIFEST_FILE, CONVERGENCE_FILE
from rmfnn_app.utils.exceptions import TrainingDiverged
from rmfnn_app.utils.ArtifactWriter import ArtifactWriter
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner
from rmfnn_app.utils.FidelityManager import FidelityManager
from rmfnn_app.utils.ForwardModels import domain_for
from rmfnn_app.utils.SurrogateBuilder import SurrogateBuilder
from rmfnn_app.utils.UQManager import UQManager


class CommandsTestCase(TestCase):
    """
    Test cases for the management commands.
    """

    def setUp(self):
        self.out = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.out, ignore_errors=True)

    def call(self, *args):
        stdout = StringIO()
        call_command(*args, stdout=stdout)
        return stdout.getvalue()

    def test_01_plan(self):
        """Tests that the plan command writes the budget of a tabulated tolerance."""
        output = self.call('plan', '--problem', 'ivp', '--eps-tol', '1e-2', '--out', self.out)
        self.assertIn(os.path.join(self.out, REPORT_FILE), output)
        report = ArtifactWriter.read_report(os.path.join(self.out, REPORT_FILE))
        self.assertEqual(report['budget']['n'], 241)
        self.assertEqual(report['summary']['ratio_s'], 5.0)
        self.assertAlmostEqual(report['summary']['residual_bound'], 0.26)
        self.assertFalse(report['summary']['full_scale_required'])
        self.assertEqual(ExperimentRun.objects.get(command='plan').status, RunStatus.FINISHED)

    def test_02_usage_error_exit_code(self):
        """Tests that an untabulated tolerance without interpolation leaves with the usage exit code."""
        with self.assertRaises(CommandError) as context:
            self.call('plan', '--problem', 'ivp', '--eps-tol', '0.05')
        self.assertEqual(context.exception.returncode, EXIT_USAGE)
        self.assertEqual(ExperimentRun.objects.get(command='plan').status, RunStatus.FAILED)

    def test_03_mc_matches_library(self):
        """Tests that the mc command reproduces the library estimate."""
        self.call('mc', '--problem', 'pulsed', '--model', 'exact', '--n-theta', '10', '--seed', '3', '--out',
                  self.out)
        report = ArtifactWriter.read_report(os.path.join(self.out, REPORT_FILE))
        expected = UQManager.mc_estimate(FidelityManager.exact_model('pulsed'), 10, domain_for('pulsed'), 3)
        self.assertEqual(report['estimates'][0]['value'], expected.value)
        self.assertEqual(report['estimates'][0]['stderr'], expected.stderr)
        self.assertEqual(report['seeds'], [3])

    def test_04_train_and_predict(self):
        """Tests that a saved bundle reproduces the predictions of the trained surrogate bit for bit."""
        bundle = os.path.join(self.out, 'train')
        self.call('train', '--problem', 'ivp', '--n', '41', '--n-i', '9', '--epochs', '5', '--out', bundle)
        for name in (MANIFEST_FILE, 'dnn.json', 'resnn.json', 'dataset.csv', PREDICTIONS_FILE, REPORT_FILE):
            self.assertTrue(os.path.isfile(os.path.join(bundle, name)), name)
        dataset = ArtifactWriter.read_frame(os.path.join(bundle, 'dataset.csv'))
        self.assertEqual(len(dataset), 41)
        self.assertEqual(int((dataset['provenance'] == 'real').sum()), 9)
        self.assertEqual(TrialResult.objects.get(run__command='train').n_hf, 9)

        predicted = os.path.join(self.out, 'predict')
        self.call('predict', '--bundle', bundle, '--input', os.path.join(bundle, PREDICTIONS_FILE), '--out',
                  predicted)
        trained = ArtifactWriter.read_frame(os.path.join(bundle, PREDICTIONS_FILE))
        reloaded = ArtifactWriter.read_frame(os.path.join(predicted, PREDICTIONS_FILE))
        np.testing.assert_array_equal(trained['prediction'].to_numpy(), reloaded['prediction'].to_numpy())

    def test_05_train_unknown_problem(self):
        """Tests that an unknown problem is a usage error."""
        with self.assertRaises(CommandError) as context:
            self.call('train', '--problem', 'heat', '--n', '20', '--out', self.out)
        self.assertEqual(context.exception.returncode, EXIT_USAGE)

    def test_06_invalid_config_key_is_named(self):
        """Tests that an unknown key of a config file is named in the error."""
        config = os.path.join(self.out, 'config.yml')
        with open(config, 'w') as output:
            output.write('problem: pulsed\nlearning_rate: 0.1\n')
        with self.assertRaises(CommandError) as context:
            self.call('sweep', '--config', config, '--out', self.out)
        self.assertEqual(context.exception.returncode, EXIT_USAGE)
        self.assertIn('learning_rate', str(context.exception))

    def test_07_missing_config_file(self):
        """Tests that a missing config file leaves with the IO exit code."""
        with self.assertRaises(CommandError) as context:
            self.call('sweep', '--config', os.path.join(self.out, 'missing.yml'))
        self.assertEqual(context.exception.returncode, EXIT_IO)

    def test_08_pedagogy(self):
        """Tests the responses, scatter and residual files of the damped oscillator."""
        self.call('pedagogy', '--dt', '1e-3', '--points', '40', '--out', self.out)
        values = ArtifactWriter.read_frame(os.path.join(self.out, 'pedagogy_values.csv'))
        self.assertListEqual(list(values.columns), ['theta', 'q_lf', 'q_hf'])
        self.assertEqual(len(values), 40)
        residual = ArtifactWriter.read_frame(os.path.join(self.out, 'pedagogy_residual.csv'))
        np.testing.assert_allclose(residual['residual'], values['q_hf'] - values['q_lf'])
        scatter = ArtifactWriter.read_frame(os.path.join(self.out, 'pedagogy_scatter.csv'))
        self.assertEqual(int(scatter['low_frequency'].sum()), int((values['theta'] < 30.0).sum()))

    def test_09_sweep(self):
        """Tests a small sweep: aggregates, trials, bounds and the ledger."""
        self.call('sweep', '--problem', 'pulsed', '--n-hf', '20', '--seeds', '0', '--epochs', '2', '--n-test', '50',
                  '--methods', 'HFNN', 'RMFNN', '--out', self.out)
        aggregates = ArtifactWriter.read_frame(os.path.join(self.out, 'sweep_K7_L7.csv'))
        self.assertListEqual(list(aggregates['method']), ['HFNN', 'RMFNN'])
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'sweep_trials.csv')))
        bounds = ArtifactWriter.read_frame(os.path.join(self.out, 'sweep_bounds.csv'))
        self.assertEqual(len(bounds), 2)
        report = ArtifactWriter.read_report(os.path.join(self.out, REPORT_FILE))
        self.assertEqual(report['summary']['n_test'], 50)
        self.assertEqual(TrialResult.objects.filter(run__command='sweep').count(), 2)

    def test_10_tolerance_study(self):
        """Tests a desk-scale tolerance study of the IVP."""
        self.call('tolerance_study', '--problem', 'ivp', '--eps-tol', '0.1', '--trials', '2', '--n-theta', '100',
                  '--epochs', '3', '--out', self.out)
        convergence = ArtifactWriter.read_frame(os.path.join(self.out, CONVERGENCE_FILE))
        self.assertEqual(len(convergence), 1)
        self.assertEqual(convergence['eps_tol'][0], 0.1)
        scatter = ArtifactWriter.read_frame(os.path.join(self.out, 'error_scatter.csv'))
        self.assertListEqual(list(scatter['seed']), [0, 1])
        report = ArtifactWriter.read_report(os.path.join(self.out, 'report_eps_0.1.json'))
        self.assertEqual(len(report['estimates']), 2)
        self.assertEqual(report['estimates'][0]['n_theta'], 100)
        self.assertTrue(report['budget']['extrapolated'])
        self.assertEqual(TrialResult.objects.filter(run__command='tolerance_study').count(), 2)

    def test_11_tolerance_study_needs_full_scale(self):
        """Tests that a budget beyond desk scale needs --full-scale."""
        with self.assertRaises(CommandError) as context:
            self.call('tolerance_study', '--problem', 'ivp', '--eps-tol', '1e-3', '--out', self.out)
        self.assertEqual(context.exception.returncode, EXIT_USAGE)
        self.assertIn('--full-scale', str(context.exception))

    def test_12_tolerance_study_unsupported_problem(self):
        """Tests that only the ODE and PDE problems have tolerance studies."""
        with self.assertRaises(CommandError) as context:
            self.call('tolerance_study', '--problem', 'pulsed', '--out', self.out)
        self.assertEqual(context.exception.returncode, EXIT_USAGE)

    def test_13_malformed_theta_file_marks_run_failed(self):
        """Tests that an unreadable parameter file leaves with exit code 3 and a FAILED run."""
        bundle = os.path.join(self.out, 'train')
        self.call('train', '--problem', 'ivp', '--n', '41', '--n-i', '9', '--epochs', '2', '--out', bundle)
        points = os.path.join(self.out, 'points.csv')
        with open(points, 'w') as output:
            output.write('theta_0\n0.1\nnot-a-number\n')
        with self.assertRaises(CommandError) as context:
            self.call('predict', '--bundle', bundle, '--input', points, '--out', os.path.join(self.out, 'predict'))
        self.assertEqual(context.exception.returncode, EXIT_NUMERICAL)
        self.assertEqual(ExperimentRun.objects.get(command='predict').status, RunStatus.FAILED)

    def test_14_validation_error_is_usage_error(self):
        """Tests that a serializer validation error leaves with the usage exit code."""
        with mock.patch.object(ExperimentRunner, 'predict', side_effect=ValidationError({'weights': ['bad shape']})):
            with self.assertRaises(CommandError) as context:
                self.call('predict', '--bundle', self.out, '--input', 'points.csv', '--out', self.out)
        self.assertEqual(context.exception.returncode, EXIT_USAGE)
        self.assertEqual(ExperimentRun.objects.get(command='predict').status, RunStatus.FAILED)

    def test_15_pedagogy_reads_config(self):
        """Tests that the pedagogy settings come from the config file unless given as flags."""
        config = os.path.join(self.out, 'config.yml')
        with open(config, 'w') as output:
            output.write('dt: 0.001\npoints: 30\n')
        self.call('pedagogy', '--config', config, '--out', os.path.join(self.out, 'file'))
        values = ArtifactWriter.read_frame(os.path.join(self.out, 'file', 'pedagogy_values.csv'))
        self.assertEqual(len(values), 30)
        self.call('pedagogy', '--config', config, '--points', '12', '--out', os.path.join(self.out, 'flag'))
        values = ArtifactWriter.read_frame(os.path.join(self.out, 'flag', 'pedagogy_values.csv'))
        self.assertEqual(len(values), 12)
        with open(config, 'w') as output:
            output.write('dt: 0\n')
        with self.assertRaises(CommandError) as context:
            self.call('pedagogy', '--config', config, '--out', self.out)
        self.assertEqual(context.exception.returncode, EXIT_USAGE)

    def test_16_sweep_with_every_trial_diverged(self):
        """Tests that a cell without a converged trial is written as null in valid JSON."""
        with mock.patch.object(SurrogateBuilder, 'hfnn_build', side_effect=TrainingDiverged(3, float('nan'))):
            self.call('sweep', '--problem', 'pulsed', '--n-hf', '20', '--seeds', '0', '--epochs', '2', '--n-test',
                      '50', '--methods', 'HFNN', '--out', self.out)

        def reject(constant):
            raise ValueError('{} is not valid JSON'.format(constant))

        with open(os.path.join(self.out, REPORT_FILE)) as source:
            report = json.loads(source.read(), parse_constant=reject)
        row = report['summary']['aggregates']['K7_L7'][0]
        self.assertIsNone(row['mean_mse'])
        self.assertIsNone(row['std_mse'])
        self.assertEqual(report['summary']['excluded_diverged'], 1)
        self.assertEqual(report['summary']['bounds'], [])
        self.assertEqual(ExperimentRun.objects.get(command='sweep').status, RunStatus.FINISHED)

    def test_17_sweep_repeats_under_the_same_seeds(self):
        """Tests that two sweeps with the same seeds write the same errors."""
        for name in ('first', 'second'):
            self.call('sweep', '--problem', 'pulsed', '--n-hf', '20', '40', '--seeds', '0', '1', '--epochs', '3',
                      '--n-test', '50', '--out', os.path.join(self.out, name))
        first = ArtifactWriter.read_frame(os.path.join(self.out, 'first', 'sweep_trials.csv'))
        second = ArtifactWriter.read_frame(os.path.join(self.out, 'second', 'sweep_trials.csv'))
        np.testing.assert_array_equal(first.drop(columns=['train_time_s']).to_numpy(),
                                      second.drop(columns=['train_time_s']).to_numpy())
        first = ArtifactWriter.read_frame(os.path.join(self.out, 'first', 'sweep_K7_L7.csv'))
        second = ArtifactWriter.read_frame(os.path.join(self.out, 'second', 'sweep_K7_L7.csv'))
        np.testing.assert_array_equal(first.to_numpy(), second.to_numpy())
