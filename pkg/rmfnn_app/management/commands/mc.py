from rmfnn_app.management.base import RmfnnCommand
from rmfnn_app.utils.ExperimentRunner import ExperimentRunner


class Command(RmfnnCommand):
    help = 'Monte Carlo estimate of the expected quantity of interest of a model or a saved surrogate.'
    command_name = 'mc'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem')
        parser.add_argument('--bundle', help='Directory written by the train command')
        parser.add_argument('--model', default='hf', choices=['hf', 'lf', 'exact'])
        parser.add_argument('--n-theta', type=int, dest='n_theta', required=True)

    def run(self, options):
        config = self.build_config(options)
        _, outcome = ExperimentRunner.mc(options.get('problem'), options['n_theta'], int(config.seeds[0]),
                                         config.output_dir, options.get('bundle'), options['model'], config.workers)
        return outcome
