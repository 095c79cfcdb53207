"""Rule-based formality classification over marker lexicons.

A lexicon is a flat list of suffix/substring marker rules, each tagged
formal or informal with an integer priority. Classification NFC-
normalizes the sentence, strips trailing punctuation and whitespace,
then compares the highest-priority matching rule on each side: one side
matching wins outright, a higher priority wins a contested sentence, and
a priority tie (or no match at all) yields Neutral.

Suffix matching is code-point equality plus one Korean-specific
allowance: a bare vowel-ending pattern syllable like 어 or 아 also
matches when that ending has fused into the preceding syllable by
regular vowel contraction (우+어→워, 이+어→여, 으-dropping 쓰+어→써,
오+아→와, 가+아→가), since the contracted surface form still carries
the ending. Without this, sentences like 고마워 would not count as
ending in 어.

The packaged lexicons under data/lexicons/ are curated configuration
meant to be edited per project, not linguistic ground truth.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from fsmt.errors import FsmtError


class LexiconError(FsmtError):
    pass


class SchemaError(LexiconError):
    pass


class DuplicateRule(LexiconError):
    pass


class EmptySide(LexiconError):
    pass


class FormalityLabel(Enum):
    FORMAL = "formal"
    INFORMAL = "informal"
    NEUTRAL = "neutral"

    @classmethod
    def parse(cls, text: str) -> "FormalityLabel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown formality label {text!r}") from None


def parse_requested_formality(text: str) -> FormalityLabel:
    """Parse a formal/informal request; Neutral is not requestable."""
    label = FormalityLabel.parse(text)
    if label is FormalityLabel.NEUTRAL:
        raise ValueError("requested formality must be 'formal' or 'informal'")
    return label


class RuleKind(Enum):
    SUFFIX = "suffix"
    SUBSTRING = "substring"


@dataclass(frozen=True)
class MarkerRule:
    label: FormalityLabel
    kind: RuleKind
    pattern: str
    priority: int


@dataclass(frozen=True)
class Lexicon:
    lang: str
    rules: tuple[MarkerRule, ...]

    def __post_init__(self):
        seen: set[tuple[FormalityLabel, RuleKind, str]] = set()
        sides: set[FormalityLabel] = set()
        for rule in self.rules:
            if rule.label is FormalityLabel.NEUTRAL:
                raise SchemaError("rules must be labeled formal or informal")
            if not rule.pattern:
                raise SchemaError("rule pattern must be non-empty")
            key = (rule.label, rule.kind, rule.pattern)
            if key in seen:
                raise DuplicateRule(
                    f"duplicate rule ({rule.label.value}, {rule.kind.value}, {rule.pattern!r})"
                )
            seen.add(key)
            sides.add(rule.label)
        for side in (FormalityLabel.FORMAL, FormalityLabel.INFORMAL):
            if side not in sides:
                raise EmptySide(f"lexicon has no {side.value} rules")


def load_lexicon(path: str | Path) -> Lexicon:
    """Load and validate a JSON lexicon file.

    The file is a JSON array of objects with keys lang, label
    ("formal"|"informal"), kind ("suffix"|"substring"), pattern, and
    priority. Patterns are NFC-normalized on load so they match the
    normalized text classify() operates on.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: invalid JSON: {err}") from None
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON array of rule objects")
    rules: list[MarkerRule] = []
    langs: set[str] = set()
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise SchemaError(f"{path}: rule {i} is not an object")
        try:
            lang = item["lang"]
            label = item["label"]
            kind = item["kind"]
            pattern = item["pattern"]
            priority = item["priority"]
        except KeyError as err:
            raise SchemaError(f"{path}: rule {i} is missing key {err}") from None
        if not isinstance(lang, str) or not isinstance(pattern, str):
            raise SchemaError(f"{path}: rule {i}: lang and pattern must be strings")
        if isinstance(priority, bool) or not isinstance(priority, int):
            raise SchemaError(f"{path}: rule {i}: priority must be an integer")
        if label not in ("formal", "informal"):
            raise SchemaError(f"{path}: rule {i}: label must be 'formal' or 'informal'")
        if kind not in ("suffix", "substring"):
            raise SchemaError(f"{path}: rule {i}: kind must be 'suffix' or 'substring'")
        pattern = unicodedata.normalize("NFC", pattern)
        if not pattern:
            raise SchemaError(f"{path}: rule {i}: empty pattern")
        langs.add(lang)
        rules.append(
            MarkerRule(
                label=FormalityLabel(label),
                kind=RuleKind(kind),
                pattern=pattern,
                priority=priority,
            )
        )
    if len(langs) > 1:
        raise SchemaError(f"{path}: mixed languages in one lexicon: {sorted(langs)}")
    return Lexicon(lang=langs.pop() if langs else "", rules=tuple(rules))


def default_lexicon_path(lang: str) -> Path:
    """Path of the packaged lexicon for a target-language code like 'ko'."""
    path = Path(str(resources.files("fsmt").joinpath(f"data/lexicons/{lang}.json")))
    if not path.is_file():
        raise LexiconError(f"no packaged lexicon for language {lang!r}")
    return path


def _strip_trailing_punct(text: str) -> str:
    end = len(text)
    while end > 0:
        ch = text[end - 1]
        if ch.isspace() or unicodedata.category(ch).startswith("P"):
            end -= 1
        else:
            break
    return text[:end]


_CHOSEONG_IEUNG = 11  # silent initial of bare vowel syllables like 어/아

# pattern vowel -> stem vowels that absorb it under contraction; the same
# vowel is included for 으-dropping and same-vowel absorption (써, 가)
_VOWEL_CONTRACTIONS = {
    4: frozenset({4, 14, 6}),  # ㅓ: ㅓ itself, ㅝ (우+어), ㅕ (이+어)
    0: frozenset({0, 9}),      # ㅏ: ㅏ itself, ㅘ (오+아)
}


def _hangul_parts(ch: str) -> tuple[int, int, int] | None:
    code = ord(ch) - 0xAC00
    if not 0 <= code < 11172:
        return None
    return code // 588, (code % 588) // 28, code % 28


def _suffix_matches(text: str, pattern: str) -> bool:
    if text.endswith(pattern):
        return True
    # contraction fallback: only for a leading bare-vowel Hangul syllable
    rest = pattern[1:]
    if rest and not text.endswith(rest):
        return False
    head = _hangul_parts(pattern[0])
    if head is None or head[0] != _CHOSEONG_IEUNG or head[2] != 0:
        return False
    allowed = _VOWEL_CONTRACTIONS.get(head[1])
    if allowed is None:
        return False
    stem_pos = len(text) - len(rest) - 1
    if stem_pos < 0:
        return False
    stem = _hangul_parts(text[stem_pos])
    return stem is not None and stem[2] == 0 and stem[1] in allowed


def _matches(rule: MarkerRule, text: str) -> bool:
    if rule.kind is RuleKind.SUFFIX:
        return _suffix_matches(text, rule.pattern)
    return rule.pattern in text


def classify(lexicon: Lexicon, sentence: str) -> FormalityLabel:
    """Classify one sentence; pure and case-sensitive on NFC text."""
    text = _strip_trailing_punct(unicodedata.normalize("NFC", sentence))
    best: dict[FormalityLabel, int | None] = {
        FormalityLabel.FORMAL: None,
        FormalityLabel.INFORMAL: None,
    }
    for rule in lexicon.rules:
        if _matches(rule, text):
            current = best[rule.label]
            if current is None or rule.priority > current:
                best[rule.label] = rule.priority
    formal, informal = best[FormalityLabel.FORMAL], best[FormalityLabel.INFORMAL]
    if formal is None and informal is None:
        return FormalityLabel.NEUTRAL
    if informal is None:
        return FormalityLabel.FORMAL
    if formal is None:
        return FormalityLabel.INFORMAL
    if formal > informal:
        return FormalityLabel.FORMAL
    if informal > formal:
        return FormalityLabel.INFORMAL
    return FormalityLabel.NEUTRAL
