from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.constants import SWEEP_ARCHITECTURES
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner


class Command(RmfnnCommand):
    help = 'Test MSE of RMFNN, MFNN and HFNN against the number of high-fidelity training samples.'
    command_name = 'sweep'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', help='Problem id (default: pulsed)')
        parser.add_argument('--seeds', type=int, nargs='+', help='Seeds of the trials')
        parser.add_argument('--n-hf', type=int, nargs='+', dest='n_hf', help='Numbers of high-fidelity samples')
        parser.add_argument('--methods', nargs='+', help='Methods to compare')
        parser.add_argument('--epochs', type=int)
        parser.add_argument('--n-test', type=int, dest='n_test', help='Number of test points')
        parser.add_argument('--all-architectures', action='store_true', dest='all_architectures',
                            help='Also run the wide and the deep network')
        parser.add_argument('--emit', nargs='+', help='Artifact kinds to write')

    def overrides(self, options):
        overrides = {key: options.get(key) for key in ('problem', 'n_hf', 'methods', 'epochs', 'n_test', 'emit')}
        if options.get('seeds'):
            overrides['seeds'] = options['seeds']
        if options.get('all_architectures'):
            overrides['architectures'] = [list(pair) for pair in SWEEP_ARCHITECTURES]
        return overrides

    def run(self, options):
        return ExperimentRunner.sweep(self.build_config(options))
