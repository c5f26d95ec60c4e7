import json
import os
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from rmfnn_app.models import ExperimentRun
from rmfnn_app.utils.constants import RunStatus, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO
from rmfnn_app.utils.exceptions import UsageError, NumericalError
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner, ExperimentConfig, RunOutcome
from surrogate_lab.logger import logger


class RmfnnCommand(BaseCommand):
    """
    Base class of the experiment commands. Subclasses add their own arguments and implement run().
    Failures leave with exit code 2 for usage errors, 3 for numerical failures and 4 for IO errors. Any other
    exception is reported as a numerical failure; the run is marked FAILED in every case.
    """
    command_name = ''

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, help='Seed of the run')
        parser.add_argument('--config', help='Experiment config file (JSON or YAML)')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--workers', type=int, help='Number of worker threads')

    def overrides(self, options: dict) -> dict:
        """
        Config values given on the command line; they take precedence over the config file.
        """
        return {}

    def build_config(self, options: dict) -> ExperimentConfig:
        overrides = {'output_dir': self.output_dir(options), 'workers': options.get('workers')}
        if options.get('seed') is not None:
            overrides['seeds'] = [options['seed']]
        overrides.update(self.overrides(options))
        if options.get('workers') is None and not options.get('config'):
            overrides['workers'] = settings.RMFNN_WORKERS
        return ExperimentRunner.load_config(options.get('config'), overrides)

    def output_dir(self, options: dict) -> str:
        return options.get('out') or os.path.join(settings.RMFNN_OUTPUT_DIR, self.command_name)

    def run(self, options: dict) -> RunOutcome:
        raise NotImplementedError

    def handle(self, *args, **options):
        run = ExperimentRun.start(self.command_name, options.get('problem') or '',
                                  {key: value for key, value in options.items() if key in self.recorded_options()},
                                  self.output_dir(options))
        try:
            outcome = self.run(options)
        except (UsageError, ValidationError) as error:
            self.fail(run, error, EXIT_USAGE)
        except (NumericalError, FloatingPointError) as error:
            self.fail(run, error, EXIT_NUMERICAL)
        except OSError as error:
            self.fail(run, error, EXIT_IO)
        except Exception as error:
            logger.exception('Unexpected error in {}'.format(self.command_name))
            self.fail(run, error, EXIT_NUMERICAL)

        if run is not None:
            run.record_trials(outcome.trials)
            run.finish(RunStatus.FINISHED)
        for path in outcome.paths:
            self.stdout.write(str(path))
        if outcome.summary:
            self.stdout.write(json.dumps(outcome.summary, indent=2, default=str))
        logger.info('{} finished'.format(self.command_name))

    def recorded_options(self):
        return {'seed', 'config', 'out', 'workers', 'problem', 'method', 'eps_tol', 'n', 'n_i', 'n_theta', 'bundle',
                'model', 'epochs', 'dt', 'points'}

    def fail(self, run, error: Exception, returncode: int):
        logger.error('{} failed: {}'.format(self.command_name, error))
        if run is not None:
            run.finish(RunStatus.FAILED)
        raise CommandError(str(error), returncode=returncode)
