import logging
import os
import sys

from django.core.management.base import BaseCommand, CommandError, CommandParser

from attention import conf
from attention.augment import AugmentedDataset, read_dataset
from attention.code_model import Corpus, load_corpus
from attention.exceptions import ConfigurationError, DataError, DivergenceError
from attention.gaze_ingest import ingest_corpus, parse_fixation_csv
from attention.reward import RewardWeights
from attention.trainer import MiniLabeler, ModelConfig, TrainConfig, load_model

EXIT_USAGE, EXIT_DATA, EXIT_DIVERGENCE = 1, 2, 3


class UsageErrorParser(CommandParser):
    """Argument errors exit with the usage code (argparse would use 2, which is reserved for data errors)."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")
        raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)


class AttentionCommand(BaseCommand):
    """Shared flags (--seed, --out, --verbose) and the error-to-exit-code mapping for every subcommand."""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = UsageErrorParser
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=conf.get('SEED'), help='Seed for every stochastic step (default: %(default)s).')
        parser.add_argument('--out', default=conf.get('OUT_DIR'), help='Output directory (default: %(default)s).')
        parser.add_argument('--verbose', action='store_true', help='Log at DEBUG level.')

    def handle(self, *args, **options):
        if options['verbose']:
            logging.getLogger('attention').setLevel(logging.DEBUG)
        os.makedirs(options['out'], exist_ok=True)
        try:
            self.perform(**options)
        except ConfigurationError as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc
        except DataError as exc:
            raise CommandError(str(exc), returncode=EXIT_DATA) from exc
        except DivergenceError as exc:
            raise CommandError(str(exc), returncode=EXIT_DIVERGENCE) from exc
        except OSError as exc:
            raise CommandError(str(exc), returncode=EXIT_DATA) from exc

    def perform(self, **options):
        raise NotImplementedError

    def out_path(self, options, name: str) -> str:
        return os.path.join(options['out'], name)

    def add_corpus_arguments(self, parser, fixations: bool = False):
        parser.add_argument('--snippets', required=True, help='Snippet directory (one file per snippet) or JSONL file {id, source}.')
        if fixations:
            parser.add_argument('--fixations', required=True, help='Fixation CSV: snippet_id,seq,line,column,duration_ms.')

    def load_corpus(self, options) -> Corpus:
        return load_corpus(options['snippets'])

    def load_scanpaths(self, options, corpus: Corpus) -> dict:
        with open(options['fixations'], encoding='utf-8', newline='') as handle:
            records = parse_fixation_csv(handle)
        return ingest_corpus(records, corpus)

    def add_dataset_argument(self, parser):
        parser.add_argument('--dataset', help='Directory holding augmented.jsonl and patterns.json (default: --out).')

    def load_dataset(self, options) -> AugmentedDataset:
        directory = options['dataset'] or options['out']
        with open(os.path.join(directory, 'augmented.jsonl'), encoding='utf-8') as rows, \
                open(os.path.join(directory, 'patterns.json'), encoding='utf-8') as table:
            return read_dataset(rows, table)

    def load_model(self, options) -> MiniLabeler:
        with open(options['model'] or self.out_path(options, 'model.bin'), 'rb') as handle:
            return load_model(handle)

    def add_augment_arguments(self, parser):
        parser.add_argument('--top-k-patterns', type=int, default=conf.get('TOP_K_PATTERNS'), help='Patterns kept (default: %(default)s).')
        parser.add_argument('--pi-cap', type=int, default=conf.get('PI_CAP'), help='Tokens per snippet given a reading index (default: %(default)s).')
        parser.add_argument('--mining-order', choices=('scanpath', 'source'), default=conf.get('MINING_ORDER'),
                            help='Order of the F* label sequence mined for k-grams (default: %(default)s).')

    def check_augment_options(self, options):
        if not 1 <= options['top_k_patterns'] <= 20:
            raise ConfigurationError(f"--top-k-patterns must be in 1..20, got {options['top_k_patterns']}")
        if not 1 <= options['pi_cap'] <= 100:
            raise ConfigurationError(f"--pi-cap must be in 1..100, got {options['pi_cap']}")

    def add_training_arguments(self, parser):
        parser.add_argument('--lr', type=float, default=conf.get('LEARNING_RATE'), help='AdamW learning rate (default: %(default)s).')
        parser.add_argument('--alpha', type=float, default=conf.get('ALPHA'), help='Weight of the reward term (default: %(default)s).')
        parser.add_argument('--reward-every', type=int, default=conf.get('REWARD_EVERY'), help='CE batches between reward passes (default: %(default)s).')
        parser.add_argument('--batch-size', type=int, default=conf.get('BATCH_SIZE'), help='Snippets per mini-batch (default: %(default)s).')
        parser.add_argument('--split', type=float, default=conf.get('SPLIT_RATIO'), help='Train fraction of the snippet split (default: %(default)s).')
        parser.add_argument('--epochs', type=int, default=conf.get('EPOCHS'), help='Passes over the training split (default: %(default)s).')
        parser.add_argument('--weight-decay', type=float, default=conf.get('WEIGHT_DECAY'), help='Decoupled weight decay (default: %(default)s).')
        parser.add_argument('--embed-dim', type=int, default=conf.get('EMBED_DIM'), help='Embedding width (default: %(default)s).')
        parser.add_argument('--heads', type=int, default=conf.get('ATTENTION_HEADS'), help='Attention heads (default: %(default)s).')
        parser.add_argument('--layers', type=int, default=conf.get('ATTENTION_LAYERS'), help='Attention blocks (default: %(default)s).')
        parser.add_argument('--max-seq-len', type=int, default=conf.get('MAX_SEQ_LEN'), help='Tokens per snippet fed to the model (default: %(default)s).')

    def train_config(self, options, **overrides) -> TrainConfig:
        return TrainConfig.from_settings(
            learning_rate=options['lr'], seed=options['seed'], alpha=options['alpha'], reward_every=options['reward_every'],
            batch_size=options['batch_size'], split_ratio=options['split'], epochs=options['epochs'],
            weight_decay=options['weight_decay'], reward_weights=RewardWeights.from_settings(), **overrides)

    def model_config(self, options) -> ModelConfig:
        return ModelConfig.from_settings(embed_dim=options['embed_dim'], attention_heads=options['heads'],
                                         attention_layers=options['layers'], max_seq_len=options['max_seq_len'],
                                         seed=options['seed'])
