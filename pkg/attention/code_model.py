import bisect
import json
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property, lru_cache
from typing import Dict, Iterable, List, Optional, Pattern, Tuple, Union

from attention import conf
from attention.exceptions import ConfigurationError, CorpusError, TokenizeError

logger = logging.getLogger(__name__)


class SemanticLabel(Enum):
    KEYWORD = "Keyword"
    IDENTIFIER = "Identifier"
    LITERAL = "Literal"
    OPERATOR = "Operator"
    SEPARATOR = "Separator"
    COMMENT = "Comment"
    OTHER = "Other"


@dataclass(frozen=True)
class ExtraLabel:
    """A label declared in ATTENTION['EXTRA_LABELS'] for a role finer than the built-ins, e.g. MethodCall."""
    value: str

    @property
    def name(self) -> str:
        return self.value


Label = Union[SemanticLabel, ExtraLabel]


@lru_cache(maxsize=8)
def _compile_extra_rules(entries: tuple) -> Tuple[Tuple[ExtraLabel, Pattern], ...]:
    builtin = {label.value for label in SemanticLabel}
    rules: List[Tuple[ExtraLabel, Pattern]] = []
    for entry in entries:
        try:
            name, pattern = entry
            regex = re.compile(pattern)
        except (TypeError, ValueError, re.error) as exc:
            raise ConfigurationError(f"EXTRA_LABELS entries must be (name, regex) pairs, got {entry!r}") from exc
        if not isinstance(name, str) or not name or name in builtin or any(name == r[0].value for r in rules):
            raise ConfigurationError(f"EXTRA_LABELS name {name!r} must be a new, non-empty label name")
        rules.append((ExtraLabel(name), regex))
    return tuple(rules)


def extra_label_rules() -> Tuple[Tuple[ExtraLabel, Pattern], ...]:
    """Configured labels with the regex a token's text must fully match; they are tried before the built-in rules."""
    entries = conf.get('EXTRA_LABELS')
    return _compile_extra_rules(tuple(tuple(e) if isinstance(e, list) else e for e in entries))


def label_vocabulary() -> Tuple[str, ...]:
    """Label names in model-id order: the seven built-ins, then EXTRA_LABELS."""
    return tuple(label.value for label in SemanticLabel) + tuple(label.value for label, _ in extra_label_rules())


def label_from_value(value: str) -> Label:
    try:
        return SemanticLabel(value)
    except ValueError:
        pass
    for label, _ in extra_label_rules():
        if label.value == value: return label
    raise ValueError(f"unknown semantic label '{value}'")


@dataclass(frozen=True)
class SourceToken:
    """A lexeme with 1-based inclusive columns on its start line.

    Multi-line tokens (block comments, text blocks) keep `col_end` on the start line; `end_line`/`end_col`
    locate their last character.
    """
    index: int
    text: str
    line: int
    col_start: int
    col_end: int
    label: Label = SemanticLabel.OTHER
    offset: int = 0
    end_line: Optional[int] = None
    end_col: Optional[int] = None

    @property
    def last_line(self) -> int:
        return self.end_line if self.end_line is not None else self.line

    def span_on(self, line: int) -> Optional[Tuple[int, int]]:
        """Inclusive column span this token covers on `line`, or None."""
        if not self.line <= line <= self.last_line: return None
        if line == self.line: return self.col_start, self.col_end
        return 1, self.end_col if line == self.last_line else 10 ** 9


@dataclass
class Snippet:
    id: str
    source: str
    tokens: List[SourceToken] = field(default_factory=list)

    @cached_property
    def tokens_by_line(self) -> Dict[int, List[SourceToken]]:
        lines: Dict[int, List[SourceToken]] = {}
        for token in self.tokens:
            for line in range(token.line, token.last_line + 1):
                lines.setdefault(line, []).append(token)
        return lines

    @property
    def line_count(self) -> int:
        """Lines as the tokenizer numbers them (newline characters only); a trailing newline opens no new line."""
        if not self.source: return 0
        return self.source.count("\n") + (0 if self.source.endswith("\n") else 1)


Corpus = Dict[str, Snippet]

# Java SE reserved words (JLS 3.9), including the `_` keyword.
JAVA_KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do double else enum extends
final finally float for goto if implements import instanceof int interface long native new package private
protected public return short static strictfp super switch synchronized this throw throws transient try void
volatile while _
""".split())
JAVA_LITERAL_WORDS = frozenset(("true", "false", "null"))
JAVA_OPERATORS = frozenset("""
= > < ! ~ ? : -> == >= <= != && || ++ -- + - * / & | ^ % << >> >>> += -= *= /= &= |= ^= %= <<= >>= >>>=
""".split())
JAVA_SEPARATORS = frozenset("( ) { } [ ] ; , . ... @ ::".split())

_NUMBER = (r"0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?\d+)?[lLfFdD]?"
           r"|0[bB][01_]+[lL]?"
           r"|(?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[lLfFdD]?")
_OPERATOR_OR_SEPARATOR = "|".join(re.escape(s) for s in sorted(JAVA_OPERATORS | JAVA_SEPARATORS, key=len, reverse=True))

LEXER: Pattern = re.compile("|".join([
    r"(?P<ws>\s+)",
    r"(?P<block_comment>/\*.*?\*/)",
    r"(?P<open_comment>/\*)",
    r"(?P<line_comment>//[^\n]*)",
    r'(?P<text_block>"""[\s\S]*?""")',
    r'(?P<open_text_block>""")',
    r'(?P<string>"(?:[^"\\\n]|\\.)*")',
    r'(?P<open_string>")',
    r"(?P<char>'(?:[^'\\\n]|\\.)+')",
    r"(?P<open_char>')",
    rf"(?P<number>{_NUMBER})",
    r"(?P<name>[A-Za-z_$][A-Za-z0-9_$]*)",
    rf"(?P<punct>{_OPERATOR_OR_SEPARATOR})",
    r"(?P<other>\S)",
]), re.DOTALL)

_UNTERMINATED = {
    "open_comment": "unterminated comment",
    "open_text_block": "unterminated text block",
    "open_string": "unterminated string literal",
    "open_char": "unterminated character literal",
}


def _line_starts(source: str) -> List[int]:
    return [0] + [m.end() for m in re.finditer("\n", source)]


def tokenize(source: str) -> List[SourceToken]:
    """Split Java source into span-accurate tokens; whitespace is dropped, comments are kept whole."""
    starts = _line_starts(source)

    def position(offset: int) -> Tuple[int, int]:
        line = bisect.bisect_right(starts, offset)
        return line, offset - starts[line - 1] + 1

    tokens: List[SourceToken] = []
    for match in LEXER.finditer(source):
        kind = match.lastgroup
        if kind == "ws": continue
        line, col = position(match.start())
        if kind in _UNTERMINATED:
            raise TokenizeError(_UNTERMINATED[kind], line, col)
        text = match.group()
        end_line, end_col = position(match.end() - 1)
        if end_line == line:
            tokens.append(SourceToken(len(tokens), text, line, col, end_col, offset=match.start()))
        else:
            first_line = text.split("\n", 1)[0]
            tokens.append(SourceToken(len(tokens), text, line, col, col + len(first_line) - 1, offset=match.start(),
                                      end_line=end_line, end_col=end_col))
    return tokens


class LabelEngine:
    """Ordered rule table mapping token text to a semantic label; the first matching rule wins."""

    def __init__(self, extra_rules: Iterable[Tuple[ExtraLabel, Pattern]] = ()):
        self.rules: List[Tuple[str, object, Label]] = [(label.value, regex, label) for label, regex in extra_rules]
        self.rules += [
            ("COMMENT", re.compile(r"(?s)//.*|/\*.*\*/"), SemanticLabel.COMMENT),
            ("LITERAL_WORD", JAVA_LITERAL_WORDS, SemanticLabel.LITERAL),
            ("KEYWORD", JAVA_KEYWORDS, SemanticLabel.KEYWORD),
            ("LITERAL_TEXT", re.compile(r'(?s)""".*"""|".*"|\'.+\''), SemanticLabel.LITERAL),
            ("LITERAL_NUMBER", re.compile(rf"(?:{_NUMBER})"), SemanticLabel.LITERAL),
            ("IDENTIFIER", re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*"), SemanticLabel.IDENTIFIER),
            ("OPERATOR", JAVA_OPERATORS, SemanticLabel.OPERATOR),
            ("SEPARATOR", JAVA_SEPARATORS, SemanticLabel.SEPARATOR),
        ]

    def classify(self, text: str) -> Label:
        for _, rule, label in self.rules:
            if isinstance(rule, frozenset):
                if text in rule: return label
            elif rule.fullmatch(text):
                return label
        return SemanticLabel.OTHER


@lru_cache(maxsize=8)
def _engine(extra_rules: Tuple[Tuple[ExtraLabel, Pattern], ...]) -> LabelEngine:
    return LabelEngine(extra_rules)


def label_tokens(tokens: Iterable[SourceToken]) -> List[SourceToken]:
    engine = _engine(extra_label_rules())
    return [replace(token, label=engine.classify(token.text)) for token in tokens]


def parse_snippet(snippet_id: str, source: str) -> Snippet:
    return Snippet(id=snippet_id, source=source, tokens=label_tokens(tokenize(source)))


def build_corpus(entries: Iterable[Tuple[str, str]]) -> Corpus:
    """Parse (id, source) pairs into a corpus keyed and ordered by snippet id."""
    parsed: Dict[str, Snippet] = {}
    for snippet_id, source in entries:
        if snippet_id in parsed:
            raise CorpusError(f"duplicate snippet id '{snippet_id}'")
        try:
            parsed[snippet_id] = parse_snippet(snippet_id, source)
        except TokenizeError as exc:
            raise TokenizeError(f"snippet '{snippet_id}': {exc.reason}", exc.line, exc.column) from exc
    return {snippet_id: parsed[snippet_id] for snippet_id in sorted(parsed)}


def _read_jsonl(path: str) -> List[Tuple[str, str]]:
    entries = []
    with open(path, encoding="utf-8") as handle:
        for row, raw in enumerate(handle, start=1):
            if not raw.strip(): continue
            try:
                record = json.loads(raw)
                entries.append((str(record["id"]), record["source"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path} line {row}: expected a JSON object with 'id' and 'source' ({exc})") from exc
    return entries


def _read_directory(path: str) -> List[Tuple[str, str]]:
    entries = []
    for name in sorted(os.listdir(path)):
        full = os.path.join(path, name)
        if not os.path.isfile(full) or name.startswith("."): continue
        with open(full, encoding="utf-8") as handle:
            entries.append((os.path.splitext(name)[0], handle.read()))
    return entries


def load_corpus(path: str) -> Corpus:
    """Load snippets from a directory (one file per snippet, stem = id) or a JSONL file."""
    if not os.path.exists(path):
        raise CorpusError(f"corpus path '{path}' does not exist")
    try:
        entries = _read_directory(path) if os.path.isdir(path) else _read_jsonl(path)
    except UnicodeDecodeError as exc:
        raise CorpusError(f"corpus '{path}' is not valid UTF-8: {exc}") from exc
    corpus = build_corpus(entries)
    logger.info("[CodeModel] loaded %d snippets (%d tokens) from %s", len(corpus), sum(len(s.tokens) for s in corpus.values()), path)
    return corpus


@dataclass
class CorpusStats:
    snippets: List[Tuple[str, int, int]] = field(default_factory=list)
    label_counts: Dict[str, int] = field(default_factory=dict)


def corpus_statistics(corpus: Corpus) -> CorpusStats:
    stats, counts = CorpusStats(), Counter()
    for snippet in corpus.values():
        stats.snippets.append((snippet.id, len(snippet.tokens), snippet.line_count))
        counts.update(token.label.value for token in snippet.tokens)
    stats.label_counts = {name: counts.get(name, 0) for name in label_vocabulary()}
    return stats
