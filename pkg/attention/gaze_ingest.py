import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Set, TextIO

from attention.code_model import Corpus, Snippet
from attention.exceptions import CorpusError, DataError, FixationParseError

logger = logging.getLogger(__name__)

FIXATION_COLUMNS = ("snippet_id", "seq", "line", "column", "duration_ms")
LOCALITY_WINDOWS = tuple(range(6))


@dataclass(frozen=True)
class FixationRecord:
    snippet_id: str
    seq: int
    line: int
    column: int
    duration_ms: float


class ScanEvent(NamedTuple):
    token_index: int
    duration_ms: float


@dataclass
class Scanpath:
    snippet_id: str
    events: List[ScanEvent] = field(default_factory=list)
    unmapped_count: int = 0

    @property
    def token_indices(self) -> List[int]:
        return [event.token_index for event in self.events]


@dataclass
class LocalityReport:
    fractions: Dict[int, float]
    transitions: int


def _parse_int(raw: str, name: str, row: int, minimum: int) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise FixationParseError(f"{name} '{raw}' is not an integer", row) from None
    if value < minimum:
        raise FixationParseError(f"{name} must be >= {minimum}, got {value}", row)
    return value


def _parse_rows(stream: TextIO) -> List[FixationRecord]:
    reader = csv.DictReader(stream)
    missing = [name for name in FIXATION_COLUMNS if name not in (reader.fieldnames or [])]
    if missing:
        raise FixationParseError(f"missing column(s): {', '.join(missing)}", 1)

    records: List[FixationRecord] = []
    seen: Set[tuple] = set()
    for row, raw in enumerate(reader, start=2):
        snippet_id = (raw["snippet_id"] or "").strip()
        if not snippet_id:
            raise FixationParseError("empty snippet_id", row)
        seq = _parse_int(raw["seq"], "seq", row, 0)
        line = _parse_int(raw["line"], "line", row, 1)
        column = _parse_int(raw["column"], "column", row, 1)
        try:
            duration = float(raw["duration_ms"])
        except (TypeError, ValueError):
            raise FixationParseError(f"duration_ms '{raw['duration_ms']}' is not numeric", row) from None
        if not math.isfinite(duration) or duration < 0:
            raise FixationParseError(f"duration_ms must be a non-negative number, got {raw['duration_ms']}", row)
        if (snippet_id, seq) in seen:
            raise FixationParseError(f"duplicate fixation ({snippet_id}, seq {seq})", row)
        seen.add((snippet_id, seq))
        records.append(FixationRecord(snippet_id, seq, line, column, duration))
    return sorted(records, key=lambda r: (r.snippet_id, r.seq))


def parse_fixation_csv(stream: TextIO) -> List[FixationRecord]:
    """Read fixation rows; result is grouped by snippet id (sorted) and ordered by seq within each group."""
    try:
        return _parse_rows(stream)
    except (csv.Error, UnicodeDecodeError) as exc:
        raise FixationParseError(f"unreadable fixation CSV: {exc}") from exc


def write_fixation_csv(records: Iterable[FixationRecord], stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FIXATION_COLUMNS)
    for r in records:
        duration = int(r.duration_ms) if float(r.duration_ms).is_integer() else r.duration_ms
        writer.writerow((r.snippet_id, r.seq, r.line, r.column, duration))


def group_by_snippet(records: Iterable[FixationRecord]) -> Dict[str, List[FixationRecord]]:
    groups: Dict[str, List[FixationRecord]] = {}
    for record in records:
        groups.setdefault(record.snippet_id, []).append(record)
    return {key: sorted(groups[key], key=lambda r: r.seq) for key in sorted(groups)}


def _resolve_token(snippet: Snippet, line: int, column: int) -> Optional[int]:
    best, best_distance = None, None
    for token in snippet.tokens_by_line.get(line, ()):
        start, end = token.span_on(line)
        distance = 0 if start <= column <= end else min(abs(column - start), abs(column - end))
        # tokens_by_line is in source order, so strict < keeps the leftmost on ties
        if best_distance is None or distance < best_distance:
            best, best_distance = token.index, distance
    return best


def map_fixations_to_tokens(records: Iterable[FixationRecord], snippet: Snippet) -> Scanpath:
    """Containment first, then nearest token on the same line; fixations on token-free lines are dropped."""
    scanpath = Scanpath(snippet.id)
    for record in sorted(records, key=lambda r: r.seq):
        if record.snippet_id != snippet.id:
            raise DataError(f"fixation for snippet '{record.snippet_id}' passed with snippet '{snippet.id}'")
        token_index = _resolve_token(snippet, record.line, record.column)
        if token_index is None:
            scanpath.unmapped_count += 1
            continue
        scanpath.events.append(ScanEvent(token_index, record.duration_ms))
    if scanpath.unmapped_count:
        logger.debug("[GazeIngest] %s: %d fixation(s) on token-free lines dropped", snippet.id, scanpath.unmapped_count)
    return scanpath


def ingest_corpus(records: Iterable[FixationRecord], corpus: Corpus) -> Dict[str, Scanpath]:
    scanpaths = {}
    for snippet_id, group in group_by_snippet(records).items():
        if snippet_id not in corpus:
            raise CorpusError(f"fixations reference unknown snippet '{snippet_id}'")
        scanpaths[snippet_id] = map_fixations_to_tokens(group, corpus[snippet_id])
    unmapped = sum(s.unmapped_count for s in scanpaths.values())
    logger.info("[GazeIngest] %d scanpaths, %d events, %d unmapped", len(scanpaths), sum(len(s.events) for s in scanpaths.values()), unmapped)
    return scanpaths


def fixated_set(scanpath: Scanpath) -> Set[int]:
    return set(scanpath.token_indices)


def reading_order(scanpath: Scanpath, cap: int = 100) -> Dict[int, int]:
    """Reading index of each token by first fixation; only the first `cap` distinct tokens are indexed."""
    order: Dict[int, int] = {}
    for token_index in scanpath.token_indices:
        if len(order) >= cap: break
        if token_index not in order:
            order[token_index] = len(order)
    return order


def locality_stats(scanpaths: Iterable[Scanpath], snippets: Mapping[str, Snippet]) -> LocalityReport:
    """Fraction of consecutive fixation pairs whose line distance is within each window 0..5."""
    paths = sorted(scanpaths, key=lambda s: s.snippet_id)
    if not paths:
        raise DataError("locality statistics need at least one scanpath")
    within = [0] * len(LOCALITY_WINDOWS)
    transitions = 0
    for scanpath in paths:
        tokens = snippets[scanpath.snippet_id].tokens
        lines = [tokens[i].line for i in scanpath.token_indices]
        for prev, nxt in zip(lines, lines[1:]):
            transitions += 1
            delta = abs(nxt - prev)
            for window in LOCALITY_WINDOWS:
                if delta <= window: within[window] += 1
    if transitions == 0:
        raise DataError("locality fractions are undefined: no fixation transitions")
    return LocalityReport({w: within[w] / transitions for w in LOCALITY_WINDOWS}, transitions)


def write_locality_report(report: LocalityReport, stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("window", "fraction", "transitions"))
    for window in sorted(report.fractions):
        writer.writerow((window, f"{report.fractions[window]:.6f}", report.transitions))
