import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, TextIO, Tuple

from attention import conf
from attention.code_model import Corpus, Label, Snippet, label_from_value
from attention.exceptions import ConfigurationError, CorpusError, DataError
from attention.gaze_ingest import Scanpath, fixated_set, reading_order

logger = logging.getLogger(__name__)

LabelGram = Tuple[Label, ...]
MINING_ORDERS = ("scanpath", "source")


@dataclass(frozen=True)
class AdjacencyConfig:
    window_lines: int = 3
    allow_wide: bool = False

    def __post_init__(self):
        limit = conf.get('MAX_WINDOW_LINES')
        if self.window_lines < 0 or (self.window_lines > limit and not self.allow_wide):
            raise ConfigurationError(f"window_lines must be in 0..{limit}, got {self.window_lines} (wider windows need the override flag)")


class Origin(Enum):
    FIXATED = "fixated"
    EXPANDED = "expanded"


@dataclass(frozen=True)
class KGramPattern:
    labels: LabelGram
    frequency: int
    numeric_label: int


@dataclass
class PatternTable:
    patterns: List[KGramPattern] = field(default_factory=list)

    def __post_init__(self):
        self._by_labels = {p.labels: p for p in self.patterns}

    def lookup(self, labels: LabelGram) -> Optional[KGramPattern]:
        return self._by_labels.get(labels)

    @property
    def numeric_labels(self) -> Set[int]:
        return {p.numeric_label for p in self.patterns}


@dataclass(frozen=True)
class AugmentedToken:
    token_index: int
    origin: Origin
    anchor_index: Optional[int] = None
    pattern_label: Optional[int] = None
    reading_index: Optional[int] = None


@dataclass
class AugmentedDataset:
    snippets: Dict[str, List[AugmentedToken]]
    table: PatternTable
    window_lines: int = 3
    mining_order: str = "scanpath"

    @property
    def token_count(self) -> int:
        return sum(len(tokens) for tokens in self.snippets.values())


def expand_adjacency(fixated: Iterable[int], snippet: Snippet, config: AdjacencyConfig) -> Dict[int, Optional[int]]:
    """F* as {token_index: anchor}; fixated members map to None, expanded ones to the nearest same-label anchor."""
    fixated = set(fixated)
    invalid = sorted(i for i in fixated if not 0 <= i < len(snippet.tokens))
    if invalid:
        raise DataError(f"snippet '{snippet.id}': fixated indices out of range: {invalid[:5]}")
    tokens = snippet.tokens
    by_label: Dict[Label, List[int]] = {}
    for i in sorted(fixated):
        by_label.setdefault(tokens[i].label, []).append(i)

    expanded: Dict[int, Optional[int]] = {i: None for i in fixated}
    for token in tokens:
        if token.index in fixated: continue
        best = None
        for anchor in by_label.get(token.label, ()):
            distance = abs(token.line - tokens[anchor].line)
            if distance <= config.window_lines and (best is None or distance < best[0]):
                best = (distance, anchor)
        if best is not None:
            expanded[token.index] = best[1]
    return dict(sorted(expanded.items()))


def _collapse_refixations(indices: Sequence[int]) -> List[int]:
    return [i for n, i in enumerate(indices) if n == 0 or indices[n - 1] != i]


def fixation_label_sequence(scanpath: Scanpath, snippet: Snippet) -> List[Label]:
    return [snippet.tokens[i].label for i in _collapse_refixations(scanpath.token_indices)]


def extended_order(scanpath: Scanpath, expansion: Mapping[int, Optional[int]], mining_order: str = "scanpath") -> List[int]:
    """Token sequence of F*: fixation order with each expanded token placed right after its anchor's first visit."""
    if mining_order == "source":
        return sorted(expansion)
    if mining_order != "scanpath":
        raise ConfigurationError(f"mining_order must be one of {MINING_ORDERS}, got '{mining_order}'")
    followers: Dict[int, List[int]] = {}
    for token_index, anchor in sorted(expansion.items()):
        if anchor is not None: followers.setdefault(anchor, []).append(token_index)
    sequence, placed = [], set()
    for token_index in _collapse_refixations(scanpath.token_indices):
        sequence.append(token_index)
        if token_index not in placed:
            placed.add(token_index)
            sequence.extend(followers.get(token_index, ()))
    return sequence


def mine_kgrams(sequences: Iterable[Sequence[Label]], k_values: Iterable[int] = (2, 3)) -> Counter:
    counts: Counter = Counter()
    k_values = tuple(k_values)
    for sequence in sequences:
        for k in k_values:
            counts.update(tuple(sequence[i:i + k]) for i in range(len(sequence) - k + 1))
    return counts


def _rank_key(item: Tuple[LabelGram, int]):
    labels, frequency = item
    return -frequency, -len(labels), tuple(label.value for label in labels)


def select_top_patterns(counts: Mapping[LabelGram, int], limit: int = 20) -> PatternTable:
    """Rank by frequency, then longer k, then label names; keep the top `limit` with labels 1..limit."""
    if not counts:
        raise DataError("cannot rank patterns: no k-gram counts")
    ranked = sorted(counts.items(), key=_rank_key)[:limit]
    return PatternTable([KGramPattern(labels, frequency, rank) for rank, (labels, frequency) in enumerate(ranked, start=1)])


def assign_pattern_labels(snippet: Snippet, sequence: Sequence[int], table: PatternTable) -> Dict[int, int]:
    """Trigram match wins over bigram at a position; a token covered several times keeps the best-ranked, then leftmost."""
    labels = [snippet.tokens[i].label for i in sequence]
    best: Dict[int, Tuple[int, int]] = {}
    for position in range(len(sequence)):
        match = None
        for k in (3, 2):
            if position + k <= len(sequence):
                match = table.lookup(tuple(labels[position:position + k]))
                if match is not None: break
        if match is None: continue
        for token_index in sequence[position:position + len(match.labels)]:
            candidate = (match.numeric_label, position)
            if token_index not in best or candidate < best[token_index]:
                best[token_index] = candidate
    return {token_index: rank for token_index, (rank, _) in best.items()}


def attach_reading_indices(expansion: Mapping[int, Optional[int]], order: Mapping[int, int]) -> Dict[int, Optional[int]]:
    return {i: order.get(i if anchor is None else anchor) for i, anchor in expansion.items()}


def build_augmented_dataset(corpus: Corpus, scanpaths: Mapping[str, Scanpath], config: AdjacencyConfig,
                            top_k: int = 20, pi_cap: int = 100, mining_order: str = "scanpath") -> AugmentedDataset:
    missing = sorted(set(scanpaths) - set(corpus))
    if missing:
        raise CorpusError(f"scanpaths reference unknown snippet(s): {', '.join(missing[:5])}")

    expansions, sequences, orders = {}, {}, {}
    for snippet_id in sorted(scanpaths):
        snippet, scanpath = corpus[snippet_id], scanpaths[snippet_id]
        expansions[snippet_id] = expand_adjacency(fixated_set(scanpath), snippet, config)
        sequences[snippet_id] = extended_order(scanpath, expansions[snippet_id], mining_order)
        orders[snippet_id] = reading_order(scanpath, pi_cap)

    counts = mine_kgrams([snippet_label_run(corpus[sid], seq) for sid, seq in sequences.items()])
    if counts:
        table = select_top_patterns(counts, top_k)
    else:
        logger.warning("[Augment] no k-grams found; pattern table is empty")
        table = PatternTable()

    snippets = {}
    for snippet_id, expansion in expansions.items():
        patterns = assign_pattern_labels(corpus[snippet_id], sequences[snippet_id], table)
        positions = attach_reading_indices(expansion, orders[snippet_id])
        snippets[snippet_id] = [
            AugmentedToken(i, Origin.FIXATED if anchor is None else Origin.EXPANDED, anchor, patterns.get(i), positions[i])
            for i, anchor in expansion.items()
        ]
    dataset = AugmentedDataset(snippets, table, config.window_lines, mining_order)
    logger.info("[Augment] window=%d order=%s snippets=%d tokens=%d patterns=%d", config.window_lines, mining_order,
                len(snippets), dataset.token_count, len(table.patterns))
    return dataset


def snippet_label_run(snippet: Snippet, sequence: Sequence[int]) -> List[Label]:
    return [snippet.tokens[i].label for i in sequence]


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_dataset(dataset: AugmentedDataset, corpus: Corpus, rows: TextIO, table: TextIO):
    for snippet_id in sorted(dataset.snippets):
        tokens = corpus[snippet_id].tokens
        for t in dataset.snippets[snippet_id]:
            source = tokens[t.token_index]
            rows.write(_dumps({
                "snippet_id": snippet_id, "token_index": t.token_index, "text": source.text, "line": source.line,
                "semantic_label": source.label.value, "origin": t.origin.value, "anchor_index": t.anchor_index,
                "pattern_label": t.pattern_label, "reading_index": t.reading_index,
            }) + "\n")
    table.write(_dumps({
        "window_lines": dataset.window_lines, "mining_order": dataset.mining_order, "snippet_ids": sorted(dataset.snippets),
        "patterns": [{"rank": p.numeric_label, "labels": [l.value for l in p.labels], "frequency": p.frequency}
                     for p in dataset.table.patterns],
    }) + "\n")


def read_dataset(rows: TextIO, table: TextIO) -> AugmentedDataset:
    try:
        header = json.loads(table.read())
        patterns = PatternTable([KGramPattern(tuple(label_from_value(l) for l in p["labels"]), p["frequency"], p["rank"])
                                 for p in header["patterns"]])
        snippets: Dict[str, List[AugmentedToken]] = {sid: [] for sid in header["snippet_ids"]}
        for number, raw in enumerate(rows, start=1):
            if not raw.strip(): continue
            r = json.loads(raw)
            if r["snippet_id"] not in snippets:
                raise DataError(f"dataset row {number}: snippet '{r['snippet_id']}' missing from the pattern table file")
            snippets[r["snippet_id"]].append(AugmentedToken(
                r["token_index"], Origin(r["origin"]), r["anchor_index"], r["pattern_label"], r["reading_index"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"malformed augmented dataset: {exc}") from exc
    return AugmentedDataset(snippets, patterns, header["window_lines"], header["mining_order"])
