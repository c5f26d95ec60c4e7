from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.constants import Method
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner, TRAINABLE_METHODS


class Command(RmfnnCommand):
    help = 'Trains one surrogate and writes its bundle, predictions and report.'
    command_name = 'train'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', required=True)
        parser.add_argument('--method', default=Method.RMFNN, choices=[str(m) for m in TRAINABLE_METHODS])
        parser.add_argument('--eps-tol', type=float, dest='eps_tol', help='Train with the budget of a tolerance')
        parser.add_argument('--n', type=int, help='Number of design points')
        parser.add_argument('--n-i', type=int, dest='n_i', help='Number of high-fidelity points')
        parser.add_argument('--epochs', type=int)
        parser.add_argument('--batch-size', type=int, dest='batch_size')
        parser.add_argument('--emit', nargs='+', help='Artifact kinds to write')

    def overrides(self, options):
        overrides = {key: options.get(key) for key in ('problem', 'n', 'n_i', 'epochs', 'batch_size')}
        if options.get('eps_tol') is not None:
            overrides['eps_tol'] = [options['eps_tol']]
        if options.get('emit') or not options.get('config'):
            overrides['emit'] = options.get('emit') or ['datasets', 'checkpoints', 'reports']
        return overrides

    def run(self, options):
        return ExperimentRunner.train(self.build_config(options), options['method'])
