import logging
from dataclasses import replace

import numpy as np

from attention.exceptions import ConfigurationError, DivergenceError
from attention.management.base import AttentionCommand
from attention.reward import RewardWeights
from attention.trainer import MiniLabeler, ModelConfig, PassKind, gradient_check, random_batch

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4


class Command(AttentionCommand):
    help = 'Compare analytic gradients with central finite differences on random batches; prints max_rel_error.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--batches', type=int, default=10, help='Random batches to check (default: %(default)s).')
        parser.add_argument('--alpha', type=float, default=1.0, help='Reward weight on reward passes (default: %(default)s).')

    def perform(self, **options):
        if options['batches'] < 1:
            raise ConfigurationError(f"--batches must be >= 1, got {options['batches']}")
        config = ModelConfig.from_settings(embed_dim=8, attention_heads=2, ffn_dim=16, max_seq_len=8, seed=options['seed'])
        rng = np.random.default_rng([options['seed'], 3])
        weights = RewardWeights.from_settings()
        worst = 0.0
        for number in range(options['batches']):
            model = MiniLabeler(replace(config, seed=options['seed'] + number))
            batch = random_batch(config, rng)
            for kind in PassKind:
                errors = gradient_check(model, batch, kind, options['alpha'], weights, rng)
                name = max(errors, key=errors.get)
                logger.debug("[Gradcheck] batch %d %s: worst tensor %s rel_error=%.3e", number, kind.value, name, errors[name])
                worst = max(worst, errors[name])
        self.stdout.write(f"max_rel_error={worst:.6e}")
        if not worst < TOLERANCE:
            raise DivergenceError(f"gradient check failed: max relative error {worst:.3e} >= {TOLERANCE}")
