from attention import conf
from attention.augment import AdjacencyConfig
from attention.eval_report import progress_sweep, write_report
from attention.management.base import AttentionCommand


class Command(AttentionCommand):
    help = 'Evaluate one training run at batch-size-ratio checkpoints; writes sweep_progress.csv.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser, fixations=True)
        parser.add_argument('--checkpoints', type=float, nargs='+', default=list(conf.get('PROGRESS_CHECKPOINTS')),
                            help='Fractions of training in (0, 1] to evaluate at (default: %(default)s).')
        parser.add_argument('--window', type=int, default=conf.get('WINDOW_LINES'), help='Adjacency window (default: %(default)s).')
        parser.add_argument('--baseline', action='store_true', help='Add the alpha=0, window-0 baseline curve.')
        self.add_augment_arguments(parser)
        self.add_training_arguments(parser)

    def perform(self, **options):
        AdjacencyConfig(options['window'])
        self.check_augment_options(options)
        train_config, model_config = self.train_config(options), self.model_config(options)
        corpus = self.load_corpus(options)
        scanpaths = self.load_scanpaths(options, corpus)
        report = progress_sweep(corpus, scanpaths, options['checkpoints'], train_config, model_config, options['window'],
                                options['top_k_patterns'], options['pi_cap'], options['mining_order'],
                                include_baseline=options['baseline'])
        with open(self.out_path(options, 'sweep_progress.csv'), 'w', encoding='utf-8', newline='') as out:
            write_report(report, out)
