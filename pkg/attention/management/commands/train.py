import logging

from attention.management.base import AttentionCommand
from attention.trainer import MiniLabeler, build_examples, save_model, split_dataset, token_accuracy, train_epoch, write_history

logger = logging.getLogger(__name__)


class Command(AttentionCommand):
    help = 'Train the labeler on the augmented dataset with reward-interleaved passes; writes model.bin and history.csv.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser)
        self.add_dataset_argument(parser)
        self.add_training_arguments(parser)

    def perform(self, **options):
        train_config, model_config = self.train_config(options), self.model_config(options)
        corpus = self.load_corpus(options)
        dataset = self.load_dataset(options)
        train, test = split_dataset(build_examples(corpus, dataset), train_config.split_ratio, train_config.seed)
        logger.info("[Trainer] split: %d train / %d test snippets", len(train), len(test))

        model = MiniLabeler(model_config)
        history = train_epoch(model, train, train_config)
        pattern_acc, position_acc = token_accuracy(model, train)
        logger.info("[Trainer] training accuracy: pattern=%.4f position=%.4f", pattern_acc, position_acc)

        with open(self.out_path(options, 'model.bin'), 'wb') as out:
            save_model(model, out)
        with open(self.out_path(options, 'history.csv'), 'w', encoding='utf-8', newline='') as out:
            write_history(history, out)
