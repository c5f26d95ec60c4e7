from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.constants import DAMPED_HF_DT, PEDAGOGY_POINTS
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner


class Command(RmfnnCommand):
    help = 'Writes the low- and high-fidelity responses of the damped oscillator, their scatter and the residual.'
    command_name = 'pedagogy'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dt', type=float,
                            help='Time step of the high-fidelity model (default {})'.format(DAMPED_HF_DT))
        parser.add_argument('--points', type=int, help='Number of frequencies (default {})'.format(PEDAGOGY_POINTS))

    def overrides(self, options):
        return {'dt': options.get('dt'), 'points': options.get('points')}

    def run(self, options):
        config = self.build_config(options)
        return ExperimentRunner.pedagogy(config.output_dir, config.dt or DAMPED_HF_DT,
                                         config.points or PEDAGOGY_POINTS)
