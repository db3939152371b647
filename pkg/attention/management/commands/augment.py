from attention import conf
from attention.augment import AdjacencyConfig, build_augmented_dataset, write_dataset
from attention.management.base import AttentionCommand
from attention.reward import gold_sequence, write_label_file


class Command(AttentionCommand):
    help = ('Expand fixated tokens, mine k-gram patterns and attach reading indices; '
            'writes augmented.jsonl, patterns.json and gold_labels.jsonl.')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser, fixations=True)
        parser.add_argument('--window', type=int, default=conf.get('WINDOW_LINES'),
                            help='Adjacency window in lines, 0..3 (default: %(default)s).')
        parser.add_argument('--allow-wide-window', action='store_true', help='Accept --window above 3.')
        self.add_augment_arguments(parser)

    def perform(self, **options):
        config = AdjacencyConfig(options['window'], allow_wide=options['allow_wide_window'])
        self.check_augment_options(options)
        corpus = self.load_corpus(options)
        scanpaths = self.load_scanpaths(options, corpus)
        dataset = build_augmented_dataset(corpus, scanpaths, config, options['top_k_patterns'], options['pi_cap'],
                                          options['mining_order'])

        with open(self.out_path(options, 'augmented.jsonl'), 'w', encoding='utf-8') as rows, \
                open(self.out_path(options, 'patterns.json'), 'w', encoding='utf-8') as table:
            write_dataset(dataset, corpus, rows, table)
        gold = {sid: gold_sequence(len(corpus[sid].tokens), tokens) for sid, tokens in dataset.snippets.items()}
        with open(self.out_path(options, 'gold_labels.jsonl'), 'w', encoding='utf-8') as out:
            write_label_file(gold, out)
