import os

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SECRET_KEY = os.environ.get('GAZEATTN_SECRET_KEY', 'gazeattn-local-only')
DEBUG = False
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'attention',  # Our app
]

DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Pipeline defaults. Flags on every subcommand default to these values.
ATTENTION = {
    'SEED': 42,
    'OUT_DIR': os.path.join(BASE_DIR, 'out'),
    # code-model: (name, regex) pairs, e.g. ('Constant', r'[A-Z][A-Z0-9_]+'), tried before the built-in rules
    'EXTRA_LABELS': (),
    # scanpath-synth
    'LOCALITY_PROB': 0.95,
    'SYNTH_WINDOW_LINES': 3,
    'FIXATIONS_PER_SNIPPET': 60,
    # augment
    'WINDOW_LINES': 3,
    'MAX_WINDOW_LINES': 3,
    'TOP_K_PATTERNS': 20,
    'PI_CAP': 100,
    'MINING_ORDER': 'scanpath',
    # reward
    'REWARD_WEIGHTS': (0.5, 0.5),
    # trainer
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

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'flow': {'format': '%(asctime)s %(levelname)s %(name)s %(message)s'},
    },
    'handlers': {
        'console': {'class': 'logging.StreamHandler', 'formatter': 'flow', 'stream': 'ext://sys.stderr'},
    },
    'loggers': {
        'attention': {'handlers': ['console'], 'level': os.environ.get('GAZEATTN_LOG_LEVEL', 'INFO'), 'propagate': False},
    },
}
