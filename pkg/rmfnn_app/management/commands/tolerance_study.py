from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner


class Command(RmfnnCommand):
    help = 'CPU time and error of the RMFNN Monte Carlo estimator against the tolerance.'
    command_name = 'tolerance_study'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', help='ivp or wave (default: ivp)')
        parser.add_argument('--eps-tol', type=float, nargs='+', dest='eps_tol', help='Tolerances to study')
        parser.add_argument('--trials', type=int, help='Monte Carlo repetitions per tolerance')
        parser.add_argument('--n-theta', type=int, dest='n_theta', help='Replaces the budget sample count')
        parser.add_argument('--epochs', type=int, help='Replaces the budget epochs')
        parser.add_argument('--run-hfm', action='store_true', dest='run_hfm', default=None,
                            help='Also run the direct high-fidelity Monte Carlo')
        parser.add_argument('--full-scale', action='store_true', dest='full_scale', default=None,
                            help='Allow budgets beyond desk scale')
        parser.add_argument('--emit', nargs='+', help='Artifact kinds to write')

    def overrides(self, options):
        return {key: options.get(key) for key in ('problem', 'eps_tol', 'trials', 'n_theta', 'epochs', 'run_hfm',
                                                  'full_scale', 'emit')}

    def run(self, options):
        return ExperimentRunner.tolerance_study(self.build_config(options))
