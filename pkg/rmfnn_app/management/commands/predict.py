import os

from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.constants import PREDICTIONS_FILE
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner


class Command(RmfnnCommand):
    help = 'Evaluates a saved surrogate on the parameter points of a CSV file.'
    command_name = 'predict'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--bundle', required=True, help='Directory written by the train command')
        parser.add_argument('--input', required=True, help='CSV with the columns theta_0, ..., theta_{d-1}')

    def run(self, options):
        return ExperimentRunner.predict(options['bundle'], options['input'],
                                        os.path.join(self.output_dir(options), PREDICTIONS_FILE))
