"""Formality-annotated parallel corpora.

Corpus files are UTF-8 text with LF line endings, one record per line,
exactly four tab-separated fields: id, English source, formal target,
informal target. Target fields may wrap formality-marking phrases in
``[F]...[/F]`` markup; markers must be balanced and non-nested, and there
is no escape mechanism for literal markers. Source pools (used by the
zero-shot generation mode) are plain text, one source sentence per line.

Source and target fields are NFC-normalized at parse time; phrase spans
are byte offsets into the UTF-8 encoding of the markup-stripped text.
All containers are immutable after construction.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from fsmt.errors import FsmtError

OPEN_MARK = "[F]"
CLOSE_MARK = "[/F]"


class CorpusError(FsmtError):
    pass


class MalformedRecord(CorpusError):
    pass


class UnbalancedMarkup(CorpusError):
    pass


class EmptyPhrase(CorpusError):
    pass


class EmptyField(CorpusError):
    pass


class DuplicateId(CorpusError):
    def __init__(self, segment_id: str, line_number: int):
        super().__init__(f"duplicate segment id {segment_id!r} at line {line_number}")
        self.segment_id = segment_id
        self.line_number = line_number


class LangPair(Enum):
    EN_KO = "EN-KO"
    EN_VI = "EN-VI"
    EN_PT = "EN-PT"
    EN_RU = "EN-RU"

    @classmethod
    def parse(cls, text: str) -> "LangPair":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(
                f"unknown language pair {text!r} (expected one of "
                f"{', '.join(p.value.lower() for p in cls)})"
            ) from None

    @property
    def target_code(self) -> str:
        """Lowercase target-language code, e.g. 'ko'."""
        return self.value.split("-")[1].lower()

    @property
    def target_language(self) -> str:
        """English name of the target language, e.g. 'Korean'."""
        return _TARGET_NAMES[self]


_TARGET_NAMES = {
    LangPair.EN_KO: "Korean",
    LangPair.EN_VI: "Vietnamese",
    LangPair.EN_PT: "Portuguese",
    LangPair.EN_RU: "Russian",
}


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


def strip_markup(raw: str) -> tuple[str, tuple[str, ...], tuple[tuple[int, int], ...]]:
    """Remove ``[F]...[/F]`` markers from *raw*.

    Returns (plain, phrases, spans) where spans are (start, end) byte
    offsets into plain's UTF-8 encoding, end exclusive. Re-inserting the
    markers at the spans reproduces *raw* byte for byte (see
    reinsert_markup). The input is used as given; callers wanting NFC
    text must normalize before stripping.
    """
    plain_parts: list[str] = []
    phrases: list[str] = []
    spans: list[tuple[int, int]] = []
    byte_len = 0
    open_at: tuple[int, int] | None = None  # (byte offset, plain_parts index)
    i = 0
    while i < len(raw):
        next_open = raw.find(OPEN_MARK, i)
        next_close = raw.find(CLOSE_MARK, i)
        if next_open == -1 and next_close == -1:
            plain_parts.append(raw[i:])
            break
        if next_close == -1 or (next_open != -1 and next_open < next_close):
            pos, mark = next_open, OPEN_MARK
        else:
            pos, mark = next_close, CLOSE_MARK
        chunk = raw[i:pos]
        plain_parts.append(chunk)
        byte_len += len(chunk.encode("utf-8"))
        if mark is OPEN_MARK:
            if open_at is not None:
                raise UnbalancedMarkup(f"nested {OPEN_MARK} at position {pos}")
            open_at = (byte_len, len(plain_parts))
        else:
            if open_at is None:
                raise UnbalancedMarkup(f"{CLOSE_MARK} without {OPEN_MARK} at position {pos}")
            if byte_len == open_at[0]:
                raise EmptyPhrase(f"empty {OPEN_MARK}{CLOSE_MARK} phrase at position {pos}")
            spans.append((open_at[0], byte_len))
            phrases.append("".join(plain_parts[open_at[1]:]))
            open_at = None
        i = pos + len(mark)
    if open_at is not None:
        raise UnbalancedMarkup(f"unclosed {OPEN_MARK}")
    return "".join(plain_parts), tuple(phrases), tuple(spans)


def reinsert_markup(plain: str, spans: tuple[tuple[int, int], ...]) -> str:
    """Inverse of strip_markup: wrap each byte span of *plain* in markers."""
    data = plain.encode("utf-8")
    out = bytearray()
    prev = 0
    for start, end in spans:
        out += data[prev:start] + OPEN_MARK.encode() + data[start:end] + CLOSE_MARK.encode()
        prev = end
    out += data[prev:]
    return out.decode("utf-8")


@dataclass(frozen=True)
class AnnotatedReference:
    """Target-side text with its formality-marking phrase spans.

    spans are byte offsets into plain's UTF-8 form; phrases[i] is the
    text covered by spans[i]. Spans are sorted, non-overlapping and
    non-nesting by construction.
    """

    raw: str
    plain: str
    phrases: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    @classmethod
    def from_raw(cls, raw: str) -> "AnnotatedReference":
        plain, phrases, spans = strip_markup(raw)
        return cls(raw=raw, plain=plain, phrases=phrases, spans=spans)


@dataclass(frozen=True)
class Segment:
    """One parallel example: English source plus both register references."""

    id: str
    lang_pair: LangPair
    source: str
    formal_ref: AnnotatedReference
    informal_ref: AnnotatedReference


@dataclass(frozen=True)
class Corpus:
    lang_pair: LangPair
    split: Split
    segments: tuple[Segment, ...]

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class SourcePool:
    """Plain English sources for zero-shot generation."""

    lang_pair: LangPair
    sources: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.sources)


def parse_annotated_line(line: str, lang_pair: LangPair) -> Segment:
    """Parse one 4-field TSV record into a Segment.

    Fields: id, source, formal target, informal target. Source and
    target fields are NFC-normalized before markup extraction, so stored
    raw/plain text and spans all refer to NFC form.
    """
    fields = line.split("\t")
    if len(fields) != 4:
        raise MalformedRecord(f"expected 4 tab-separated fields, got {len(fields)}")
    seg_id, source, formal_raw, informal_raw = fields
    if not seg_id:
        raise EmptyField("empty id field")
    source = unicodedata.normalize("NFC", source)
    if not source:
        raise EmptyField("empty source field")
    formal_ref = AnnotatedReference.from_raw(unicodedata.normalize("NFC", formal_raw))
    informal_ref = AnnotatedReference.from_raw(unicodedata.normalize("NFC", informal_raw))
    if not formal_ref.plain:
        raise EmptyField("formal target is empty after markup removal")
    if not informal_ref.plain:
        raise EmptyField("informal target is empty after markup removal")
    return Segment(
        id=seg_id,
        lang_pair=lang_pair,
        source=source,
        formal_ref=formal_ref,
        informal_ref=informal_ref,
    )


def _read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if "\r" in text:
        raise MalformedRecord(f"{path}: CR line endings not supported (LF only)")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline at EOF
    return lines


def load_corpus(path: str | Path, lang_pair: LangPair, split: Split) -> Corpus:
    """Load an annotated TSV file, preserving line order.

    Raises CorpusError subtypes annotated with 1-based line numbers, and
    OSError on unreadable paths.
    """
    segments: list[Segment] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            segment = parse_annotated_line(line, lang_pair)
        except CorpusError as err:
            raise type(err)(f"{path}:{lineno}: {err}") from None
        if segment.id in seen:
            raise DuplicateId(segment.id, lineno)
        seen[segment.id] = lineno
        segments.append(segment)
    return Corpus(lang_pair=lang_pair, split=split, segments=tuple(segments))


def load_source_pool(path: str | Path, lang_pair: LangPair) -> SourcePool:
    """Load a one-sentence-per-line source pool; blank lines are rejected."""
    sources: list[str] = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        stripped = unicodedata.normalize("NFC", line).strip()
        if not stripped:
            raise EmptyField(f"{path}:{lineno}: empty source line")
        sources.append(stripped)
    return SourcePool(lang_pair=lang_pair, sources=tuple(sources))
