from attention.augment import AdjacencyConfig
from attention.eval_report import adjacency_sweep, write_report
from attention.management.base import AttentionCommand


class Command(AttentionCommand):
    help = 'Retrain per adjacency window and score the held-out split; writes sweep_window.csv.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser, fixations=True)
        parser.add_argument('--windows', type=int, nargs='+', default=[0, 1, 2, 3], help='Windows to sweep (default: 0 1 2 3).')
        parser.add_argument('--allow-wide-window', action='store_true', help='Accept windows above 3.')
        parser.add_argument('--no-baseline', action='store_true', help='Skip the alpha=0, window-0 baseline run.')
        self.add_augment_arguments(parser)
        self.add_training_arguments(parser)

    def perform(self, **options):
        for window in options['windows']:
            AdjacencyConfig(window, allow_wide=options['allow_wide_window'])
        self.check_augment_options(options)
        train_config, model_config = self.train_config(options), self.model_config(options)
        corpus = self.load_corpus(options)
        scanpaths = self.load_scanpaths(options, corpus)
        report = adjacency_sweep(corpus, scanpaths, options['windows'], train_config, model_config,
                                 options['top_k_patterns'], options['pi_cap'], options['mining_order'],
                                 include_baseline=not options['no_baseline'])
        with open(self.out_path(options, 'sweep_window.csv'), 'w', encoding='utf-8', newline='') as out:
            write_report(report, out)
