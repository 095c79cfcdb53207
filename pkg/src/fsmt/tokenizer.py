"""Morpheme-boundary-respecting byte-pair encoding.

Training and encoding operate strictly within morpheme units (already
segmented upstream), so no learned merge and no emitted token ever
crosses a unit boundary. Unit boundaries are carried through encoded
output as an explicit U+2581 separator token.

Training is standard BPE over the character sequence of each unit: at
every step the most frequent adjacent symbol pair is merged, with
frequency summed over units weighted by unit multiplicity. Equal
frequencies are broken by the lexicographically smallest (left, right)
pair, compared by code point, which makes training fully deterministic.
"""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

from fsmt.errors import FsmtError

SEPARATOR = "▁"


class TokenizerError(FsmtError):
    pass


class EmptyCorpus(TokenizerError):
    pass


class LeadingOrTrailingSeparator(TokenizerError):
    pass


class AdjacentSeparators(TokenizerError):
    pass


class ModelFormatError(TokenizerError):
    pass


class InvalidUnit(TokenizerError):
    pass


def _check_unit(unit: str) -> str:
    if not unit:
        raise InvalidUnit("unit must be a non-empty string")
    if SEPARATOR in unit:
        raise InvalidUnit(f"unit {unit!r} contains the separator character")
    return unit


@dataclass(frozen=True)
class MorphSegmentedText:
    """A sentence as an ordered sequence of morpheme units."""

    units: tuple[str, ...]

    def __post_init__(self):
        for unit in self.units:
            _check_unit(unit)

    @classmethod
    def from_line(cls, line: str) -> "MorphSegmentedText":
        """Parse a whitespace-separated unit line (blank line -> no units)."""
        return cls(units=tuple(line.split()))

    def to_line(self) -> str:
        return " ".join(self.units)


@dataclass(frozen=True)
class MergeRule:
    left: str
    right: str
    rank: int

    @property
    def merged(self) -> str:
        return self.left + self.right


@dataclass(frozen=True)
class BpeModel:
    """Ordered merge rules plus the frequency floor they were trained with."""

    merges: tuple[MergeRule, ...]
    min_frequency: int

    def __post_init__(self):
        seen = set()
        for expected_rank, rule in enumerate(self.merges):
            if rule.rank != expected_rank:
                raise ModelFormatError(
                    f"merge ranks must be consecutive from 0, got {rule.rank} "
                    f"at position {expected_rank}"
                )
            if (rule.left, rule.right) in seen:
                raise ModelFormatError(f"duplicate merge pair ({rule.left!r}, {rule.right!r})")
            seen.add((rule.left, rule.right))
        if self.min_frequency < 1:
            raise ModelFormatError("min_frequency must be >= 1")

    @property
    def vocab(self) -> frozenset[str]:
        """All symbols reachable from characters via the merge rules."""
        symbols: set[str] = set()
        for rule in self.merges:
            symbols.update(rule.left)
            symbols.update(rule.right)
            symbols.add(rule.left)
            symbols.add(rule.right)
            symbols.add(rule.merged)
        return frozenset(symbols)


def _merge_sequence(symbols: list[str], left: str, right: str) -> list[str]:
    """Replace left,right adjacencies by their concatenation, left to right."""
    out: list[str] = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def train_bpe(
    corpus_units: Mapping[str, int] | Iterable[str],
    num_merges: int,
    min_frequency: int = 2,
) -> BpeModel:
    """Learn up to num_merges merge rules from a multiset of units.

    corpus_units is either unit -> multiplicity or a plain iterable whose
    repetitions count. Learning stops early once the best adjacent pair
    falls below min_frequency. Pairs never span units, so merges respect
    morpheme boundaries by construction.
    """
    if num_merges < 0:
        raise TokenizerError("num_merges must be >= 0")
    if min_frequency < 1:
        raise TokenizerError("min_frequency must be >= 1")
    if isinstance(corpus_units, Mapping):
        counts = Counter(dict(corpus_units))
    else:
        counts = Counter(corpus_units)
    if not counts:
        raise EmptyCorpus("no units to train on")
    for unit, mult in counts.items():
        _check_unit(unit)
        if mult < 1:
            raise TokenizerError(f"unit {unit!r} has non-positive multiplicity {mult}")

    sequences: list[tuple[list[str], int]] = [(list(unit), mult) for unit, mult in counts.items()]
    merges: list[MergeRule] = []
    for rank in range(num_merges):
        pair_freqs: Counter[tuple[str, str]] = Counter()
        for symbols, mult in sequences:
            for pair in zip(symbols, symbols[1:]):
                pair_freqs[pair] += mult
        if not pair_freqs:
            break
        best_freq = max(pair_freqs.values())
        if best_freq < min_frequency:
            break
        left, right = min(pair for pair, freq in pair_freqs.items() if freq == best_freq)
        merges.append(MergeRule(left=left, right=right, rank=rank))
        sequences = [(_merge_sequence(symbols, left, right), mult) for symbols, mult in sequences]
    return BpeModel(merges=tuple(merges), min_frequency=min_frequency)


def _encode_unit(unit: str, ranks: dict[tuple[str, str], int]) -> list[str]:
    symbols = list(unit)
    while len(symbols) > 1:
        best: tuple[str, str] | None = None
        best_rank = -1
        for pair in zip(symbols, symbols[1:]):
            rank = ranks.get(pair)
            if rank is not None and (best is None or rank < best_rank):
                best, best_rank = pair, rank
        if best is None:
            break
        symbols = _merge_sequence(symbols, best[0], best[1])
    return symbols


def encode(model: BpeModel, text: MorphSegmentedText) -> list[str]:
    """Apply merges lowest rank first within each unit independently.

    Unknown characters stay as single-character tokens; the separator is
    emitted as its own token between consecutive units, never inside one.
    """
    ranks = {(rule.left, rule.right): rule.rank for rule in model.merges}
    tokens: list[str] = []
    for i, unit in enumerate(text.units):
        if i:
            tokens.append(SEPARATOR)
        tokens.extend(_encode_unit(unit, ranks))
    return tokens


def decode(tokens: Iterable[str]) -> MorphSegmentedText:
    """Reassemble units by concatenating tokens between separator tokens."""
    tokens = list(tokens)
    if not tokens:
        return MorphSegmentedText(units=())
    units: list[str] = []
    current: list[str] = []
    for i, token in enumerate(tokens):
        if token == SEPARATOR:
            if i == 0:
                raise LeadingOrTrailingSeparator("token stream starts with a separator")
            if tokens[i - 1] == SEPARATOR:
                raise AdjacentSeparators(f"adjacent separators at token {i}")
            units.append("".join(current))
            current = []
        else:
            current.append(token)
    if tokens[-1] == SEPARATOR:
        raise LeadingOrTrailingSeparator("token stream ends with a separator")
    units.append("".join(current))
    return MorphSegmentedText(units=tuple(units))


_HEADER_RE = re.compile(r"^bpe v1 min_frequency=(\d+)$")


def save_model(model: BpeModel, path: str | Path) -> None:
    """Write the model file: a header line, then one `left<TAB>right` per merge."""
    for rule in model.merges:
        if any(c in rule.left + rule.right for c in "\t\n"):
            raise ModelFormatError("merge symbols containing tab or newline cannot be saved")
    lines = [f"bpe v1 min_frequency={model.min_frequency}"]
    lines.extend(f"{rule.left}\t{rule.right}" for rule in model.merges)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_model(path: str | Path) -> BpeModel:
    """Read a model file; loading then saving is byte-identical."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    header = _HEADER_RE.match(lines[0])
    if header is None:
        raise ModelFormatError(f"{path}: bad header {lines[0]!r}")
    min_frequency = int(header.group(1))
    merges: list[MergeRule] = []
    known: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ModelFormatError(f"{path}:{lineno}: expected `left<TAB>right`")
        left, right = parts
        for side in (left, right):
            if len(side) > 1 and side not in known:
                raise ModelFormatError(
                    f"{path}:{lineno}: symbol {side!r} is not produced by an earlier merge"
                )
        merges.append(MergeRule(left=left, right=right, rank=lineno - 2))
        known.add(left + right)
    return BpeModel(merges=tuple(merges), min_frequency=min_frequency)
