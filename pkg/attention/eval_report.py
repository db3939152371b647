import csv
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Mapping, Sequence, TextIO

import numpy as np
from sklearn.metrics import precision_recall_fscore_support

from attention.augment import AdjacencyConfig, build_augmented_dataset
from attention.code_model import Corpus
from attention.exceptions import ConfigurationError, DataError
from attention.gaze_ingest import Scanpath
from attention.reward import LabeledSequence
from attention.trainer import (MiniLabeler, ModelConfig, TrainConfig, TrainingExample, build_examples,
                               predict_examples, split_dataset, train_epoch)

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("window_or_ratio", "family", "precision", "recall", "f1", "support", "is_baseline")


class LabelFamily(Enum):
    PATTERN = "semantic-pattern"
    POSITION = "positional"


@dataclass(frozen=True)
class MetricRow:
    family: LabelFamily
    precision: float
    recall: float
    f1: float
    support: int
    key: float = 0.0
    is_baseline: bool = False


@dataclass
class SweepReport:
    rows: List[MetricRow] = field(default_factory=list)

    def sorted_rows(self) -> List[MetricRow]:
        return sorted(self.rows, key=lambda r: (r.key, r.family.value, r.is_baseline))

    def row(self, key: float, family: LabelFamily, baseline: bool = False) -> MetricRow:
        return next(r for r in self.rows if r.key == key and r.family is family and r.is_baseline == baseline)


def _family_classes(sequence: LabeledSequence, family: LabelFamily) -> np.ndarray:
    return sequence.pattern_classes() if family is LabelFamily.PATTERN else sequence.position_classes()


def score_labels(preds: Sequence[LabeledSequence], golds: Sequence[LabeledSequence], family: LabelFamily) -> MetricRow:
    """Macro precision/recall/F1 over the non-none classes that occur in gold."""
    if len(preds) != len(golds) or any(len(p) != len(g) for p, g in zip(preds, golds)):
        raise DataError("predictions and gold labels are not aligned")
    pred = np.concatenate([_family_classes(p, family) for p in preds]) if preds else np.zeros(0, np.int64)
    gold = np.concatenate([_family_classes(g, family) for g in golds]) if golds else np.zeros(0, np.int64)
    classes = sorted(set(gold[gold != 0].tolist()))
    if not classes:
        raise DataError(f"no scorable {family.value} tokens in gold")
    precision, recall, f1, _ = precision_recall_fscore_support(gold, pred, labels=classes, average="macro", zero_division=0)
    return MetricRow(family, float(precision), float(recall), float(f1), int(np.sum(gold != 0)))


def majority_class_rows(train: Sequence[TrainingExample], test: Sequence[TrainingExample]) -> List[MetricRow]:
    """Score a constant guess of each family's most frequent non-none training class (lowest id on ties)."""
    golds = [example.gold for example in test]
    rows = []
    for family in LabelFamily:
        seen = np.concatenate([_family_classes(e.gold, family) for e in train]) if train else np.zeros(0, np.int64)
        seen = seen[seen != 0]
        if not seen.size:
            raise DataError(f"no {family.value} labels in the training split")
        majority = int(np.bincount(seen).argmax())
        preds = [LabeledSequence.from_classes([majority] * len(g), [majority] * len(g)) for g in golds]
        rows.append(score_labels(preds, golds, family))
    return rows


def evaluate(model: MiniLabeler, examples: Sequence[TrainingExample]) -> List[MetricRow]:
    predictions = predict_examples(model, examples)
    preds, golds = [], []
    for example in examples:
        pred = predictions[example.snippet_id]
        n = len(pred)
        preds.append(pred)
        golds.append(LabeledSequence(example.gold.pattern_labels[:n], example.gold.reading_indices[:n]))
    return [score_labels(preds, golds, family) for family in LabelFamily]


def _f1_summary(rows: Iterable[MetricRow]) -> str:
    return " ".join(f"{r.family.value}:f1={r.f1:.3f}" for r in rows)


def _train_and_score(corpus: Corpus, scanpaths: Mapping[str, Scanpath], window: int, train_config: TrainConfig,
                     model_config: ModelConfig, top_k: int, pi_cap: int, mining_order: str, checkpoints=None):
    dataset = build_augmented_dataset(corpus, scanpaths, AdjacencyConfig(window, allow_wide=True), top_k, pi_cap, mining_order)
    train, test = split_dataset(build_examples(corpus, dataset), train_config.split_ratio, train_config.seed)
    model = MiniLabeler(model_config)
    config = train_config if checkpoints is None else replace(train_config, progress_checkpoints=tuple(checkpoints))
    history = train_epoch(model, train, config, evaluate=(lambda m: evaluate(m, test)) if checkpoints else None)
    return model, train, test, history


def adjacency_sweep(corpus: Corpus, scanpaths: Mapping[str, Scanpath], windows: Iterable[int], train_config: TrainConfig,
                    model_config: ModelConfig, top_k: int = 20, pi_cap: int = 100, mining_order: str = "scanpath",
                    include_baseline: bool = True) -> SweepReport:
    """Rebuild the dataset and retrain from scratch per window; the baseline is window 0 trained with alpha = 0."""
    report = SweepReport()
    for window in sorted(set(windows)):
        model, train, test, _ = _train_and_score(corpus, scanpaths, window, train_config, model_config, top_k, pi_cap, mining_order)
        report.rows += [replace(row, key=float(window)) for row in evaluate(model, test)]
        logger.info("[Eval] window=%d %s (majority class: %s)", window, _f1_summary(report.rows[-2:]),
                    _f1_summary(majority_class_rows(train, test)))
    if include_baseline:
        model, _, test, _ = _train_and_score(corpus, scanpaths, 0, replace(train_config, alpha=0.0), model_config, top_k, pi_cap, mining_order)
        report.rows += [replace(row, key=0.0, is_baseline=True) for row in evaluate(model, test)]
    return report


def progress_sweep(corpus: Corpus, scanpaths: Mapping[str, Scanpath], checkpoints: Iterable[float], train_config: TrainConfig,
                   model_config: ModelConfig, window: int = 3, top_k: int = 20, pi_cap: int = 100,
                   mining_order: str = "scanpath", include_baseline: bool = False) -> SweepReport:
    """One training run evaluated on the held-out split at each batch-size ratio."""
    checkpoints = sorted(set(checkpoints))
    if not checkpoints or any(not 0 < c <= 1 for c in checkpoints):
        raise ConfigurationError(f"checkpoints must be a non-empty subset of (0, 1], got {checkpoints}")
    runs = [(window, train_config, False)]
    if include_baseline:
        runs.append((0, replace(train_config, alpha=0.0), True))
    report = SweepReport()
    for run_window, config, baseline in runs:
        *_, history = _train_and_score(corpus, scanpaths, run_window, config, model_config, top_k, pi_cap, mining_order, checkpoints)
        for ratio, rows in history.checkpoints:
            report.rows += [replace(row, key=float(ratio), is_baseline=baseline) for row in rows]
    return report


def write_report(report: SweepReport, stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in report.sorted_rows():
        writer.writerow((repr(float(r.key)), r.family.value, repr(r.precision), repr(r.recall), repr(r.f1), r.support,
                         int(r.is_baseline)))


def read_report(stream: TextIO) -> SweepReport:
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise DataError(f"report header must be {','.join(REPORT_COLUMNS)}")
    try:
        return SweepReport([MetricRow(LabelFamily(r["family"]), float(r["precision"]), float(r["recall"]), float(r["f1"]),
                                      int(r["support"]), float(r["window_or_ratio"]), r["is_baseline"] == "1")
                            for r in reader])
    except (ValueError, KeyError) as exc:
        raise DataError(f"malformed report row: {exc}") from exc
