import logging
from dataclasses import replace

from attention import conf
from attention.eval_report import SweepReport, evaluate, majority_class_rows, write_report
from attention.exceptions import ConfigurationError
from attention.management.base import AttentionCommand
from attention.trainer import build_examples, split_dataset

logger = logging.getLogger(__name__)


class Command(AttentionCommand):
    help = 'Score a trained model on the held-out split of the augmented dataset; writes eval.csv.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser)
        self.add_dataset_argument(parser)
        parser.add_argument('--model', help='Model file (default: <out>/model.bin).')
        parser.add_argument('--split', type=float, default=conf.get('SPLIT_RATIO'),
                            help='Train fraction used when the model was trained (default: %(default)s).')

    def perform(self, **options):
        if not 0 < options['split'] < 1:
            raise ConfigurationError(f"--split must be in (0, 1), got {options['split']}")
        model = self.load_model(options)
        corpus = self.load_corpus(options)
        dataset = self.load_dataset(options)
        train, test = split_dataset(build_examples(corpus, dataset), options['split'], options['seed'])
        report = SweepReport([replace(row, key=float(dataset.window_lines)) for row in evaluate(model, test)])
        for row in report.rows:
            logger.info("[Eval] %s: precision=%.4f recall=%.4f f1=%.4f support=%d", row.family.value,
                        row.precision, row.recall, row.f1, row.support)
        for row in majority_class_rows(train, test):
            logger.info("[Eval] %s majority-class reference: f1=%.4f", row.family.value, row.f1)
        with open(self.out_path(options, 'eval.csv'), 'w', encoding='utf-8', newline='') as out:
            write_report(report, out)
