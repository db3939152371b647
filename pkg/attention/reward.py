import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from attention import conf
from attention.exceptions import ConfigurationError, DataError

PATTERN_CLASSES = 21
POSITION_CLASSES = 101
ROW_SUM_TOLERANCE = 1e-6


@dataclass
class LabeledSequence:
    pattern_labels: List[Optional[int]] = field(default_factory=list)
    reading_indices: List[Optional[int]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.pattern_labels) != len(self.reading_indices):
            raise DataError("pattern and position label lists differ in length")

    def __len__(self):
        return len(self.pattern_labels)

    def pattern_classes(self) -> np.ndarray:
        return np.array([0 if p is None else p for p in self.pattern_labels], dtype=np.int64)

    def position_classes(self) -> np.ndarray:
        return np.array([0 if r is None else r + 1 for r in self.reading_indices], dtype=np.int64)

    @classmethod
    def from_classes(cls, pattern: Sequence[int], position: Sequence[int]) -> "LabeledSequence":
        return cls([int(c) or None for c in pattern], [int(c) - 1 if c else None for c in position])


@dataclass(frozen=True)
class RewardWeights:
    pattern: float = 0.5
    position: float = 0.5

    def __post_init__(self):
        if self.pattern < 0 or self.position < 0 or not math.isclose(self.pattern + self.position, 1.0, abs_tol=1e-9):
            raise ConfigurationError(f"reward weights must be non-negative and sum to 1, got ({self.pattern}, {self.position})")

    @classmethod
    def from_settings(cls) -> "RewardWeights":
        return cls(*conf.get('REWARD_WEIGHTS'))


@dataclass(frozen=True)
class RewardScore:
    value: float
    pattern_acc: float
    position_acc: float


def _family_weights(weights: RewardWeights, has_pattern: bool, has_position: bool) -> Tuple[float, float]:
    """Drop families with no scorable gold tokens and renormalise the rest."""
    wp, wr = (weights.pattern if has_pattern else 0.0), (weights.position if has_position else 0.0)
    total = wp + wr
    return (wp / total, wr / total) if total > 0 else (0.0, 0.0)


def hard_reward(pred: LabeledSequence, gold: LabeledSequence, weights: RewardWeights) -> RewardScore:
    """Misalignment penalty: 1 minus the weighted exact-match accuracy over gold tokens that carry a label."""
    if len(pred) != len(gold):
        raise DataError(f"prediction has {len(pred)} tokens, gold has {len(gold)}")
    p_pairs = [(p, g) for p, g in zip(pred.pattern_labels, gold.pattern_labels) if g is not None]
    r_pairs = [(p, g) for p, g in zip(pred.reading_indices, gold.reading_indices) if g is not None]
    pattern_acc = sum(p == g for p, g in p_pairs) / len(p_pairs) if p_pairs else 1.0
    position_acc = sum(p == g for p, g in r_pairs) / len(r_pairs) if r_pairs else 1.0
    wp, wr = _family_weights(weights, bool(p_pairs), bool(r_pairs))
    value = 1.0 - (wp * pattern_acc + wr * position_acc) if (wp or wr) else 0.0
    return RewardScore(value, pattern_acc, position_acc)


def _check_rows(probs: np.ndarray, mask: np.ndarray, name: str):
    rows = probs[mask]
    if rows.size == 0: return
    if not np.all(np.isfinite(rows)) or np.any(rows < -1e-12) or np.any(np.abs(rows.sum(axis=-1) - 1.0) > ROW_SUM_TOLERANCE):
        raise DataError(f"{name} probability rows must be finite, non-negative and sum to 1")


def batch_soft_reward(pattern_probs: np.ndarray, position_probs: np.ndarray, gold_pattern: np.ndarray,
                      gold_position: np.ndarray, mask: np.ndarray, weights: RewardWeights):
    """Differentiable surrogate of hard_reward over a padded batch.

    Returns (R, dR/d pattern_probs, dR/d position_probs). Gold class 0 is the none class and
    is not scored; mean gold-class probability stands in for exact-match accuracy.
    """
    mask = np.asarray(mask, dtype=bool)
    _check_rows(pattern_probs, mask, "pattern")
    _check_rows(position_probs, mask, "position")
    scored_p, scored_r = mask & (gold_pattern != 0), mask & (gold_position != 0)
    wp, wr = _family_weights(weights, scored_p.any(), scored_r.any())

    value = 1.0 if (wp or wr) else 0.0
    grads = []
    for probs, gold, scored, w in ((pattern_probs, gold_pattern, scored_p, wp), (position_probs, gold_position, scored_r, wr)):
        grad = np.zeros_like(probs)
        count = int(scored.sum())
        if count and w:
            gold_prob = np.take_along_axis(probs, gold[..., None], axis=-1)[..., 0]
            value -= w * float(gold_prob[scored].sum()) / count
            b, t = np.nonzero(scored)
            grad[b, t, gold[b, t]] = -w / count
        grads.append(grad)
    return value, grads[0], grads[1]


def soft_reward(pattern_probs: np.ndarray, position_probs: np.ndarray, gold: LabeledSequence, weights: RewardWeights) -> float:
    """Soft reward for one snippet; probability arrays are (tokens, classes)."""
    if len(pattern_probs) != len(gold) or len(position_probs) != len(gold):
        raise DataError("probability rows and gold labels differ in length")
    mask = np.ones((1, len(gold)), dtype=bool)
    value, _, _ = batch_soft_reward(np.asarray(pattern_probs, float)[None], np.asarray(position_probs, float)[None],
                                    gold.pattern_classes()[None], gold.position_classes()[None], mask, weights)
    return value


def gold_sequence(token_count: int, augmented) -> LabeledSequence:
    """Gold labels over every token of a snippet; tokens outside F* carry none."""
    pattern: List[Optional[int]] = [None] * token_count
    position: List[Optional[int]] = [None] * token_count
    for t in augmented:
        pattern[t.token_index], position[t.token_index] = t.pattern_label, t.reading_index
    return LabeledSequence(pattern, position)


def write_label_file(sequences: Dict[str, LabeledSequence], stream: TextIO):
    for snippet_id in sorted(sequences):
        seq = sequences[snippet_id]
        stream.write(json.dumps({"snippet_id": snippet_id, "pattern_labels": seq.pattern_labels,
                                 "reading_indices": seq.reading_indices}, separators=(",", ":")) + "\n")


def read_label_file(stream: TextIO) -> Dict[str, LabeledSequence]:
    sequences = {}
    try:
        for number, raw in enumerate(stream, start=1):
            if not raw.strip(): continue
            record = json.loads(raw)
            sequences[record["snippet_id"]] = LabeledSequence(record["pattern_labels"], record["reading_indices"])
    except UnicodeDecodeError as exc:
        raise DataError(f"label file is not valid UTF-8: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"label file line {number}: {exc}") from exc
    return sequences


def score_label_files(pred: Dict[str, LabeledSequence], gold: Dict[str, LabeledSequence], weights: RewardWeights) -> RewardScore:
    """Hard reward over all snippets of two label files, concatenated in snippet-id order."""
    if sorted(pred) != sorted(gold):
        raise DataError("prediction and gold files cover different snippets")
    merged_pred, merged_gold = LabeledSequence(), LabeledSequence()
    for snippet_id in sorted(gold):
        for merged, seq in ((merged_pred, pred[snippet_id]), (merged_gold, gold[snippet_id])):
            merged.pattern_labels.extend(seq.pattern_labels)
            merged.reading_indices.extend(seq.reading_indices)
        if len(pred[snippet_id]) != len(gold[snippet_id]):
            raise DataError(f"snippet '{snippet_id}': prediction has {len(pred[snippet_id])} tokens, gold has {len(gold[snippet_id])}")
    return hard_reward(merged_pred, merged_gold, weights)
