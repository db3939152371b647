import csv

from attention.code_model import corpus_statistics
from attention.management.base import AttentionCommand


class Command(AttentionCommand):
    help = 'Token and line counts per snippet plus the semantic-label distribution; writes corpus_stats.csv and label_counts.csv.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser)

    def perform(self, **options):
        stats = corpus_statistics(self.load_corpus(options))
        with open(self.out_path(options, 'corpus_stats.csv'), 'w', encoding='utf-8', newline='') as out:
            writer = csv.writer(out, lineterminator='\n')
            writer.writerow(('snippet_id', 'tokens', 'lines'))
            writer.writerows(stats.snippets)
        with open(self.out_path(options, 'label_counts.csv'), 'w', encoding='utf-8', newline='') as out:
            writer = csv.writer(out, lineterminator='\n')
            writer.writerow(('label', 'count'))
            writer.writerows(stats.label_counts.items())
