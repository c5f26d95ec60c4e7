from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner


class Command(RmfnnCommand):
    help = 'Prints the Monte Carlo budget of a tolerance.'
    command_name = 'plan'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', required=True)
        parser.add_argument('--eps-tol', type=float, dest='eps_tol', required=True)
        parser.add_argument('--interpolate', action='store_true', help='Scale the nearest tabulated budget')

    def run(self, options):
        return ExperimentRunner.plan(options['problem'], options['eps_tol'], options['interpolate'],
                                     options.get('out'))
