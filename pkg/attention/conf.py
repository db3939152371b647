from typing import Any, Dict

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS: Dict[str, Any] = {
    'SEED': 42,
    'OUT_DIR': 'out',
    'EXTRA_LABELS': (),
    'LOCALITY_PROB': 0.95,
    'SYNTH_WINDOW_LINES': 3,
    'FIXATIONS_PER_SNIPPET': 60,
    'WINDOW_LINES': 3,
    'MAX_WINDOW_LINES': 3,
    'TOP_K_PATTERNS': 20,
    'PI_CAP': 100,
    'MINING_ORDER': 'scanpath',
    'REWARD_WEIGHTS': (0.5, 0.5),
    'EMBED_DIM': 64,
    'ATTENTION_HEADS': 4,
    'ATTENTION_LAYERS': 1,
    'FFN_DIM': 128,
    'MAX_SEQ_LEN': 256,
    'INIT_SCALE': 0.1,
    'LEARNING_RATE': 5e-5,
    'WEIGHT_DECAY': 0.01,
    'ALPHA': 1.0,
    'REWARD_EVERY': 20,
    'EPOCHS': 1,
    'BATCH_SIZE': 8,
    'SPLIT_RATIO': 0.8,
    'PROGRESS_CHECKPOINTS': (0.2, 0.4, 0.6, 0.8, 1.0),
}


def get(name: str) -> Any:
    """Look up a pipeline setting, falling back to the built-in default."""
    try:
        overrides = getattr(settings, 'ATTENTION', {})
    except ImproperlyConfigured:
        overrides = {}
    if name in overrides: return overrides[name]
    return DEFAULTS[name]
