from __future__ import annotations

from pathlib import Path

import pytest

from fsmt.formality import FormalityLabel, Lexicon, MarkerRule, RuleKind

DATA_DIR = Path(__file__).parent / "data"


def make_rule(label: str, kind: str, pattern: str, priority: int) -> MarkerRule:
    return MarkerRule(
        label=FormalityLabel(label),
        kind=RuleKind(kind),
        pattern=pattern,
        priority=priority,
    )


@pytest.fixture
def ko_lexicon() -> Lexicon:
    """Two-rule Korean lexicon used across pipeline and metric tests."""
    return Lexicon(
        lang="ko",
        rules=(
            make_rule("formal", "suffix", "니다", 10),
            make_rule("informal", "suffix", "어", 5),
        ),
    )


def write_corpus_tsv(path: Path, lines: list[str]) -> Path:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8", newline="\n")
    return path
