import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, TextIO, Tuple

import numpy as np

from attention import conf
from attention.augment import AugmentedDataset
from attention.code_model import Corpus, Snippet, label_vocabulary
from attention.exceptions import ConfigurationError, CorpusError, DataError, DivergenceError
from attention.reward import LabeledSequence, RewardWeights, batch_soft_reward, gold_sequence
from attention.trainer.model import MiniLabeler, ModelConfig, log_softmax, softmax_backward
from attention.trainer.optim import AdamW

logger = logging.getLogger(__name__)


class PassKind(Enum):
    CE = "CE"
    REWARD = "reward"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    seed: int = 42
    alpha: float = 1.0
    reward_every: int = 20
    epochs: int = 1
    batch_size: int = 8
    split_ratio: float = 0.8
    progress_checkpoints: Tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    weight_decay: float = 0.01
    reward_weights: RewardWeights = RewardWeights()
    reward_enabled: bool = True

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ConfigurationError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.reward_every < 1:
            raise ConfigurationError(f"reward_every must be >= 1, got {self.reward_every}")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("batch_size and epochs must be >= 1")
        if any(not 0 < r <= 1 for r in self.progress_checkpoints):
            raise ConfigurationError(f"progress checkpoints must lie in (0, 1], got {self.progress_checkpoints}")

    @classmethod
    def from_settings(cls, **overrides) -> "TrainConfig":
        values = dict(learning_rate=conf.get('LEARNING_RATE'), seed=conf.get('SEED'), alpha=conf.get('ALPHA'),
                      reward_every=conf.get('REWARD_EVERY'), epochs=conf.get('EPOCHS'), batch_size=conf.get('BATCH_SIZE'),
                      split_ratio=conf.get('SPLIT_RATIO'), progress_checkpoints=tuple(conf.get('PROGRESS_CHECKPOINTS')),
                      weight_decay=conf.get('WEIGHT_DECAY'), reward_weights=RewardWeights.from_settings())
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class LossBreakdown:
    batch_index: int
    kind: PassKind
    ce: float
    reward: Optional[float]
    total: float


@dataclass
class TrainingHistory:
    passes: List[LossBreakdown] = field(default_factory=list)
    checkpoints: List[Tuple[float, Any]] = field(default_factory=list)

    @property
    def reward_pass_count(self) -> int:
        return sum(p.kind is PassKind.REWARD for p in self.passes)

    @property
    def ce_batch_count(self) -> int:
        return sum(p.kind is PassKind.CE for p in self.passes)


class TrainingExample(NamedTuple):
    snippet_id: str
    input_ids: List[int]
    gold: LabeledSequence


@dataclass
class Batch:
    snippet_ids: List[str]
    ids: np.ndarray
    mask: np.ndarray
    gold_pattern: np.ndarray
    gold_position: np.ndarray


def label_ids(snippet: Snippet) -> List[int]:
    """Model input ids: 1-based position of each token's label in the vocabulary (0 is padding)."""
    vocabulary = {name: i + 1 for i, name in enumerate(label_vocabulary())}
    return [vocabulary[token.label.value] for token in snippet.tokens]


def build_examples(corpus: Corpus, dataset: AugmentedDataset) -> List[TrainingExample]:
    examples = []
    for snippet_id in sorted(dataset.snippets):
        if snippet_id not in corpus:
            raise CorpusError(f"augmented dataset references unknown snippet '{snippet_id}'")
        snippet = corpus[snippet_id]
        examples.append(TrainingExample(snippet_id, label_ids(snippet), gold_sequence(len(snippet.tokens), dataset.snippets[snippet_id])))
    return examples


def encode_batch(examples: Sequence[TrainingExample], config: ModelConfig) -> Batch:
    """Pad to the longest snippet; tokens past max_seq_len are cut off."""
    if not examples:
        raise DataError("cannot encode an empty batch")
    truncated = [e.snippet_id for e in examples if len(e.input_ids) > config.max_seq_len]
    if truncated:
        logger.warning("[Trainer] truncated %d snippet(s) to %d tokens: %s", len(truncated), config.max_seq_len, ", ".join(truncated[:3]))
    width = max(1, max(min(len(e.input_ids), config.max_seq_len) for e in examples))
    shape = (len(examples), width)
    ids, gold_p, gold_r = np.zeros(shape, np.int64), np.zeros(shape, np.int64), np.zeros(shape, np.int64)
    mask = np.zeros(shape, bool)
    for row, example in enumerate(examples):
        n = min(len(example.input_ids), config.max_seq_len)
        ids[row, :n] = example.input_ids[:n]
        gold_p[row, :n] = example.gold.pattern_classes()[:n]
        gold_r[row, :n] = example.gold.position_classes()[:n]
        mask[row, :n] = True
    if gold_p.max() >= config.pattern_classes or gold_r.max() >= config.position_classes:
        raise DataError("gold labels exceed the model's class space (pattern 1..20, reading index 0..99)")
    return Batch([e.snippet_id for e in examples], ids, mask, gold_p, gold_r)


def _masked_cross_entropy(logits: np.ndarray, gold: np.ndarray, mask: np.ndarray, count: int):
    log_probs = log_softmax(logits)
    picked = np.take_along_axis(log_probs, gold[..., None], axis=-1)[..., 0]
    loss = -float((picked * mask).sum()) / count
    d_logits = np.exp(log_probs)
    d_logits[np.arange(gold.shape[0])[:, None], np.arange(gold.shape[1])[None], gold] -= 1.0
    return loss, d_logits * (mask[..., None] / count)


def loss_and_gradients(model: MiniLabeler, batch: Batch, kind: PassKind, alpha: float, weights: RewardWeights,
                       batch_index: int = 0, with_grads: bool = True) -> Tuple[LossBreakdown, Optional[Dict[str, np.ndarray]]]:
    """Masked mean cross-entropy over both heads; reward passes add alpha times the soft reward."""
    pattern_probs, position_probs, cache = model.forward(batch.ids, batch.mask)
    count = int(batch.mask.sum())
    if count == 0:
        zero = {name: np.zeros_like(v) for name, v in model.params.items()} if with_grads else None
        return LossBreakdown(batch_index, kind, 0.0, 0.0 if kind is PassKind.REWARD else None, 0.0), zero

    mask = batch.mask.astype(float)
    ce_p, d_pattern = _masked_cross_entropy(cache.pattern_logits, batch.gold_pattern, mask, count)
    ce_r, d_position = _masked_cross_entropy(cache.position_logits, batch.gold_position, mask, count)
    ce = ce_p + ce_r
    reward, total = None, ce
    if kind is PassKind.REWARD:
        reward, d_rp, d_rr = batch_soft_reward(pattern_probs, position_probs, batch.gold_pattern, batch.gold_position,
                                               batch.mask, weights)
        total = ce + alpha * reward
        d_pattern = d_pattern + alpha * softmax_backward(pattern_probs, d_rp)
        d_position = d_position + alpha * softmax_backward(position_probs, d_rr)
    if not math.isfinite(total):
        raise DivergenceError(f"non-finite loss at batch {batch_index} ({kind.value}): L_CE={ce} R={reward}")
    breakdown = LossBreakdown(batch_index, kind, ce, reward, total)
    if not with_grads:
        return breakdown, None
    grads = model.backward(cache, d_pattern, d_position)
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise DivergenceError(f"non-finite gradient at batch {batch_index}")
    return breakdown, grads


def split_dataset(items: Sequence, ratio: float, seed: int) -> Tuple[list, list]:
    """Seeded shuffle; the first ceil(ratio * N) items train, the rest test (both sides kept non-empty)."""
    if len(items) < 2:
        raise DataError(f"need at least 2 snippets to split, got {len(items)}")
    order = np.random.default_rng([seed, 4]).permutation(len(items))
    cut = min(max(math.ceil(ratio * len(items) - 1e-9), 1), len(items) - 1)
    return [items[i] for i in order[:cut]], [items[i] for i in order[cut:]]


def _checkpoint_batches(ratios: Sequence[float], total: int) -> Dict[int, List[float]]:
    marks: Dict[int, List[float]] = {}
    for ratio in sorted(set(ratios)):
        marks.setdefault(max(1, math.ceil(ratio * total - 1e-9)), []).append(ratio)
    return marks


def train_epoch(model: MiniLabeler, train: Sequence[TrainingExample], config: TrainConfig,
                evaluate: Optional[Callable[[MiniLabeler], Any]] = None) -> TrainingHistory:
    """CE batches over shuffled data; after every `reward_every`-th CE batch one reward pass on a sampled batch."""
    if not train:
        raise DataError("training set is empty")
    optimizer = AdamW(config.learning_rate, weight_decay=config.weight_decay)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    reward_rng = np.random.default_rng([config.seed, 2])
    per_epoch = math.ceil(len(train) / config.batch_size)
    checkpoints = _checkpoint_batches(config.progress_checkpoints, per_epoch * config.epochs) if evaluate else {}
    history = TrainingHistory()

    def run_pass(examples, kind, index):
        breakdown, grads = loss_and_gradients(model, encode_batch(examples, model.config), kind, config.alpha,
                                              config.reward_weights, batch_index=index)
        optimizer.step(model.params, grads)
        history.passes.append(breakdown)
        return breakdown

    ce_batches = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train))
        for start in range(0, len(train), config.batch_size):
            ce_batches += 1
            run_pass([train[i] for i in order[start:start + config.batch_size]], PassKind.CE, ce_batches)
            if ce_batches % config.reward_every == 0:
                sample = reward_rng.choice(len(train), size=min(config.batch_size, len(train)), replace=False)
                kind = PassKind.REWARD if config.reward_enabled else PassKind.CE
                result = run_pass([train[i] for i in sample], kind, ce_batches)
                logger.debug("[Trainer] reward pass after batch %d: L_CE=%.4f R=%s", ce_batches, result.ce, result.reward)
            for ratio in checkpoints.get(ce_batches, ()):
                history.checkpoints.append((ratio, evaluate(model)))
                logger.info("[Trainer] checkpoint %.0f%% (batch %d)", ratio * 100, ce_batches)
    logger.info("[Trainer] %d CE batches, %d reward passes", ce_batches, history.reward_pass_count)
    return history


def predict_examples(model: MiniLabeler, examples: Sequence[TrainingExample], batch_size: int = 32) -> Dict[str, LabeledSequence]:
    """Argmax labels per token (lowest class id wins ties); output is cut to max_seq_len like the input."""
    predictions = {}
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        batch = encode_batch(chunk, model.config)
        pattern_probs, position_probs, _ = model.forward(batch.ids, batch.mask)
        pattern, position = pattern_probs.argmax(axis=-1), position_probs.argmax(axis=-1)
        for row, example in enumerate(chunk):
            n = int(batch.mask[row].sum())
            predictions[example.snippet_id] = LabeledSequence.from_classes(pattern[row, :n], position[row, :n])
    return predictions


def predict(model: MiniLabeler, snippet: Snippet) -> LabeledSequence:
    example = TrainingExample(snippet.id, label_ids(snippet), gold_sequence(len(snippet.tokens), ()))
    return predict_examples(model, [example])[snippet.id]


def token_accuracy(model: MiniLabeler, examples: Sequence[TrainingExample]) -> Tuple[float, float]:
    """Exact-match accuracy of both heads over every (untruncated) token, none class included."""
    predictions = predict_examples(model, examples)
    hits_p = hits_r = total = 0
    for example in examples:
        pred, gold = predictions[example.snippet_id], example.gold
        n = len(pred)
        hits_p += sum(a == b for a, b in zip(pred.pattern_labels, gold.pattern_labels[:n]))
        hits_r += sum(a == b for a, b in zip(pred.reading_indices, gold.reading_indices[:n]))
        total += n
    return (hits_p / total, hits_r / total) if total else (1.0, 1.0)


def gradient_check(model: MiniLabeler, batch: Batch, kind: PassKind, alpha: float, weights: RewardWeights,
                   rng: np.random.Generator, samples: int = 12, step: float = 1e-5) -> Dict[str, float]:
    """Relative error ||analytic - numeric|| / (||analytic|| + ||numeric||) per tensor, central differences."""
    _, grads = loss_and_gradients(model, batch, kind, alpha, weights)
    errors = {}
    for name, value in model.params.items():
        flat = value.reshape(-1)
        picks = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
        numeric = np.empty(len(picks))
        for n, i in enumerate(picks):
            original = flat[i]
            flat[i] = original + step
            plus = loss_and_gradients(model, batch, kind, alpha, weights, with_grads=False)[0].total
            flat[i] = original - step
            minus = loss_and_gradients(model, batch, kind, alpha, weights, with_grads=False)[0].total
            flat[i] = original
            numeric[n] = (plus - minus) / (2 * step)
        analytic = grads[name].reshape(-1)[picks]
        scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
        errors[name] = float(np.linalg.norm(analytic - numeric) / scale) if scale > 1e-10 else 0.0
    return errors


def random_batch(config: ModelConfig, rng: np.random.Generator, batch_size: int = 2, max_len: int = 6) -> Batch:
    """Small random batch with ragged lengths and random gold labels, for gradient checks."""
    examples = []
    for row in range(batch_size):
        n = int(rng.integers(2, max_len + 1))
        pattern = [int(c) or None for c in rng.integers(0, config.pattern_classes, size=n)]
        position = [int(c) - 1 if c else None for c in rng.integers(0, 12, size=n)]
        examples.append(TrainingExample(f"random-{row}", [int(i) for i in rng.integers(1, config.vocab_size, size=n)],
                                        LabeledSequence(pattern, position)))
    return encode_batch(examples, config)


def write_history(history: TrainingHistory, stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("pass_index", "kind", "L_CE", "R", "L_total"))
    for index, p in enumerate(history.passes):
        writer.writerow((index, p.kind.value, repr(p.ce), "" if p.reward is None else repr(p.reward), repr(p.total)))
