import logging
import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from attention import conf
from attention.code_model import Corpus, Snippet, build_corpus
from attention.exceptions import ConfigurationError, DataError
from attention.gaze_ingest import FixationRecord, ScanEvent, Scanpath

logger = logging.getLogger(__name__)

DURATION_RANGE_MS = (100, 400)


@dataclass(frozen=True)
class SynthConfig:
    locality_prob: float = 0.95
    window_lines: int = 3
    fixations_per_snippet: int = 60
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.locality_prob <= 1.0:
            raise ConfigurationError(f"locality_prob must be in [0, 1], got {self.locality_prob}")
        if self.fixations_per_snippet < 1:
            raise ConfigurationError(f"fixations_per_snippet must be >= 1, got {self.fixations_per_snippet}")
        if self.window_lines < 0:
            raise ConfigurationError(f"window_lines must be >= 0, got {self.window_lines}")

    @classmethod
    def from_settings(cls, **overrides) -> "SynthConfig":
        values = dict(locality_prob=conf.get('LOCALITY_PROB'), window_lines=conf.get('SYNTH_WINDOW_LINES'),
                      fixations_per_snippet=conf.get('FIXATIONS_PER_SNIPPET'), seed=conf.get('SEED'))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def snippet_seed(seed: int, snippet_id: str) -> int:
    return (seed ^ zlib.crc32(snippet_id.encode("utf-8"))) & 0xFFFFFFFFFFFFFFFF


def synthesize_scanpath(snippet: Snippet, config: SynthConfig, rng: Optional[np.random.Generator] = None) -> Scanpath:
    """Random walk over tokens: local saccades with probability locality_prob, uniform jumps otherwise."""
    if not snippet.tokens:
        raise DataError(f"snippet '{snippet.id}' has no tokens to fixate")
    if rng is None:
        rng = np.random.default_rng(snippet_seed(config.seed, snippet.id))
    lines = np.array([token.line for token in snippet.tokens])
    low, high = DURATION_RANGE_MS

    current = int(rng.integers(len(lines)))
    events = [ScanEvent(current, float(rng.integers(low, high + 1)))]
    for _ in range(config.fixations_per_snippet - 1):
        if rng.random() < config.locality_prob:
            nearby = np.flatnonzero(np.abs(lines - lines[current]) <= config.window_lines)
            current = int(nearby[rng.integers(len(nearby))])
        else:
            current = int(rng.integers(len(lines)))
        events.append(ScanEvent(current, float(rng.integers(low, high + 1))))
    return Scanpath(snippet.id, events)


def synthesize_corpus(corpus: Corpus, config: SynthConfig) -> Dict[str, Scanpath]:
    scanpaths = {}
    for snippet_id, snippet in corpus.items():
        if not snippet.tokens:
            logger.warning("[Synth] skipping '%s': no tokens", snippet_id)
            continue
        scanpaths[snippet_id] = synthesize_scanpath(snippet, config)
    logger.info("[Synth] %d scanpaths, locality_prob=%.2f window=%d", len(scanpaths), config.locality_prob, config.window_lines)
    return scanpaths


def scanpath_to_records(scanpath: Scanpath, snippet: Snippet) -> List[FixationRecord]:
    """Place each fixation on its token's first column so re-ingestion maps it back to the same token."""
    return [
        FixationRecord(snippet.id, seq, snippet.tokens[e.token_index].line, snippet.tokens[e.token_index].col_start, e.duration_ms)
        for seq, e in enumerate(scanpath.events)
    ]


NAMES = ("count", "total", "index", "value", "result", "buffer", "userInput", "limit", "offset", "size")
TYPES = ("int", "long", "double", "boolean", "String")
METHODS = ("append", "add", "get", "put", "process", "validate")
STATEMENTS = (
    "{t} {a} = {n};",
    "{a} = {a} + {b};",
    "if ({a} > {n}) {{",
    "}}",
    "for (int i = 0; i < {a}; i++) {{",
    "{b}.{m}({a});",
    "return {a};",
    "// update {a} before {m}",
    'String {a} = "{m}";',
    "while ({a} != null && {b} < {n}) {{",
    "{a}++;",
)


def generate_corpus(count: int, seed: int, lines: tuple = (30, 50)) -> Corpus:
    """Java-like methods built from statement templates; braces are balanced before the method closes."""
    rng = np.random.default_rng([seed, 7])
    entries = []
    for number in range(count):
        body, depth = [], 0
        for _ in range(int(rng.integers(lines[0], lines[1] + 1)) - 2):
            template = STATEMENTS[int(rng.integers(len(STATEMENTS)))]
            if template == "}}" and depth == 0: template = STATEMENTS[1]
            picks = dict(t=TYPES[int(rng.integers(len(TYPES)))], a=NAMES[int(rng.integers(len(NAMES)))],
                         b=NAMES[int(rng.integers(len(NAMES)))], m=METHODS[int(rng.integers(len(METHODS)))],
                         n=int(rng.integers(0, 100)))
            body.append("    " * (depth + 1 - (template == "}}")) + template.format(**picks))
            depth += template.endswith("{{") - (template == "}}")
        body.extend("    " * d + "}" for d in range(depth, 0, -1))
        header = f"public int method{number}(int count, String value) {{"
        entries.append((f"synth-{number:04d}", "\n".join([header, *body, "}"]) + "\n"))
    return build_corpus(entries)
