"""BLEU, %M-Acc, %C-F computation and report rendering.

BLEU is corpus-level 4-gram with no smoothing: clipped n-gram matches
and totals are summed over the whole corpus, the brevity penalty uses
total lengths, and the score is 0 whenever some order has no matches or
no hypothesis n-grams at all.

%M-Acc labels each hypothesis by annotated-phrase containment (formal
if it holds a formal-reference phrase and no informal one, and vice
versa; both or neither is neutral) and reports the share of annotated
segments whose label equals the desired register. %C-F is the share of
hypotheses the marker-lexicon classifier labels with the desired
register; neutral counts as a miss for both.
"""

from __future__ import annotations

import csv
import io
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from fsmt.corpus import Corpus, LangPair
from fsmt.errors import FsmtError
from fsmt.formality import FormalityLabel, Lexicon, classify


class EvalError(FsmtError):
    pass


class LengthMismatch(EvalError):
    pass


class EmptyCorpus(EvalError):
    pass


class EmptyInput(EvalError):
    pass


class NoAnnotatedSegments(EvalError):
    pass


class DuplicateRowKey(EvalError):
    pass


class Setting(Enum):
    SUPERVISED = "supervised"
    ZERO_SHOT = "zero-shot"


def bleu_tokenize(text: str) -> list[str]:
    """NFC-normalize, split punctuation into its own tokens, split on space."""
    out: list[str] = []
    for ch in unicodedata.normalize("NFC", text):
        if unicodedata.category(ch).startswith("P"):
            out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence[Sequence[str]],
                references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU in [0, 100] over pre-tokenized, one-reference segments."""
    if len(hypotheses) != len(references):
        raise LengthMismatch(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise EmptyCorpus("no segments to score")
    log_precision_sum = 0.0
    for n in range(1, 5):
        matched = 0
        total = 0
        for hyp, ref in zip(hypotheses, references):
            hyp_ngrams = _ngrams(hyp, n)
            ref_ngrams = _ngrams(ref, n)
            matched += sum(min(count, ref_ngrams[gram]) for gram, count in hyp_ngrams.items())
            total += sum(hyp_ngrams.values())
        if total == 0 or matched == 0:
            return 0.0
        log_precision_sum += math.log(matched / total)
    hyp_len = sum(len(hyp) for hyp in hypotheses)
    ref_len = sum(len(ref) for ref in references)
    brevity_penalty = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity_penalty * math.exp(log_precision_sum / 4.0)


@dataclass(frozen=True)
class EvalInput:
    corpus: Corpus
    hypotheses: tuple[str, ...]
    desired_formality: FormalityLabel

    def __post_init__(self):
        if len(self.hypotheses) != len(self.corpus.segments):
            raise LengthMismatch(
                f"{len(self.hypotheses)} hypotheses for {len(self.corpus.segments)} segments"
            )
        if any(not h for h in self.hypotheses):
            raise EmptyInput("hypotheses must be non-empty strings")
        if self.desired_formality not in (FormalityLabel.FORMAL, FormalityLabel.INFORMAL):
            raise EvalError("desired formality must be formal or informal")


def phrase_label(hypothesis: str, formal_phrases: Sequence[str],
                 informal_phrases: Sequence[str]) -> FormalityLabel:
    """Register implied by annotated-phrase containment; NFC, case-sensitive."""
    text = unicodedata.normalize("NFC", hypothesis)
    has_formal = any(p in text for p in formal_phrases)
    has_informal = any(p in text for p in informal_phrases)
    if has_formal and not has_informal:
        return FormalityLabel.FORMAL
    if has_informal and not has_formal:
        return FormalityLabel.INFORMAL
    return FormalityLabel.NEUTRAL


def m_acc(eval_input: EvalInput) -> float:
    """Matched accuracy over segments that carry phrase annotations."""
    annotated = 0
    hits = 0
    for segment, hypothesis in zip(eval_input.corpus.segments, eval_input.hypotheses):
        formal_phrases = segment.formal_ref.phrases
        informal_phrases = segment.informal_ref.phrases
        if not formal_phrases and not informal_phrases:
            continue
        annotated += 1
        if phrase_label(hypothesis, formal_phrases, informal_phrases) is eval_input.desired_formality:
            hits += 1
    if annotated == 0:
        raise NoAnnotatedSegments("no segment carries phrase annotations")
    return 100.0 * hits / annotated


def c_f_rate(hypotheses: Sequence[str], lexicon: Lexicon,
             desired: FormalityLabel) -> float:
    """Share of hypotheses the classifier labels with the desired register."""
    if not hypotheses:
        raise EmptyInput("no hypotheses to classify")
    hits = sum(classify(lexicon, h) is desired for h in hypotheses)
    return 100.0 * hits / len(hypotheses)


@dataclass(frozen=True)
class MetricsRow:
    system: str
    lang_pair: LangPair
    formality: FormalityLabel
    bleu: float
    m_acc_pct: float
    c_f_pct: float
    comet: float | None = None

    def __post_init__(self):
        for name in ("bleu", "m_acc_pct", "c_f_pct"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise EvalError(f"{name}={value} outside [0, 100]")

    @property
    def key(self) -> tuple[str, LangPair, FormalityLabel]:
        return (self.system, self.lang_pair, self.formality)


@dataclass(frozen=True)
class Report:
    rows: tuple[MetricsRow, ...]
    setting: Setting


def build_report(rows: Sequence[MetricsRow], setting: Setting) -> Report:
    """Order rows by formality block, then system first appearance, then pair."""
    seen: set[tuple] = set()
    system_order: dict[str, int] = {}
    for row in rows:
        if row.key in seen:
            raise DuplicateRowKey(
                f"duplicate row ({row.system}, {row.lang_pair.value}, {row.formality.value})"
            )
        seen.add(row.key)
        system_order.setdefault(row.system, len(system_order))
    formality_order = {FormalityLabel.FORMAL: 0, FormalityLabel.INFORMAL: 1}
    pair_order = {pair: i for i, pair in enumerate(LangPair)}
    ordered = sorted(
        rows,
        key=lambda r: (formality_order[r.formality], system_order[r.system],
                       pair_order[r.lang_pair]),
    )
    return Report(rows=tuple(ordered), setting=setting)


_CSV_HEADER = ["system", "lang_pair", "formality", "bleu", "comet", "m_acc_pct", "c_f_pct"]


def _row_cells(row: MetricsRow) -> list[str]:
    return [
        row.system,
        row.lang_pair.value,
        row.formality.value,
        f"{row.bleu:.2f}",
        "-" if row.comet is None else f"{row.comet:.3f}",
        f"{row.m_acc_pct:.1f}",
        f"{row.c_f_pct:.1f}",
    ]


def render_report(report: Report, fmt: str = "md") -> str:
    """Render as a Markdown pipe table ("md") or RFC-4180 CSV ("csv")."""
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer)  # RFC-4180 CRLF line endings
        writer.writerow(_CSV_HEADER)
        for row in report.rows:
            writer.writerow(_row_cells(row))
        return buffer.getvalue()
    if fmt == "md":
        header = ["System", "Pair", "Formality", "BLEU", "COMET", "%M-Acc", "%C-F"]
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(" --- " for _ in header) + "|",
        ]
        for row in report.rows:
            lines.append("| " + " | ".join(_row_cells(row)) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r} (md or csv)")


def read_rows_csv(path: str | Path) -> list[MetricsRow]:
    """Read a metrics-row CSV (same columns render_report writes)."""
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_rows_csv(fh)


def parse_rows_csv(stream) -> list[MetricsRow]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != _CSV_HEADER:
        raise EvalError(
            f"rows CSV must have header {','.join(_CSV_HEADER)}, "
            f"got {reader.fieldnames}"
        )
    rows: list[MetricsRow] = []
    for i, rec in enumerate(reader, start=2):
        try:
            comet_text = (rec["comet"] or "").strip()
            rows.append(
                MetricsRow(
                    system=rec["system"],
                    lang_pair=LangPair.parse(rec["lang_pair"]),
                    formality=FormalityLabel.parse(rec["formality"]),
                    bleu=float(rec["bleu"]),
                    comet=None if comet_text in ("", "-") else float(comet_text),
                    m_acc_pct=float(rec["m_acc_pct"]),
                    c_f_pct=float(rec["c_f_pct"]),
                )
            )
        except (TypeError, ValueError) as err:
            raise EvalError(f"rows CSV line {i}: {err}") from None
    return rows


def load_hypotheses(path: str | Path) -> list[str]:
    """One translation per line, aligned to the test TSV by line number."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            raise EmptyInput(f"{path}:{lineno}: empty hypothesis line")
    return lines


def load_comet_csv(path: str | Path) -> dict[tuple[str, LangPair, FormalityLabel], float]:
    """Read externally computed COMET scores keyed by (system, pair, formality)."""
    scores: dict[tuple[str, LangPair, FormalityLabel], float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["system", "lang_pair", "formality", "comet"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise EvalError(f"COMET CSV must have header {','.join(expected)}")
        for i, rec in enumerate(reader, start=2):
            try:
                key = (
                    rec["system"],
                    LangPair.parse(rec["lang_pair"]),
                    FormalityLabel.parse(rec["formality"]),
                )
                scores[key] = float(rec["comet"])
            except (TypeError, ValueError) as err:
                raise EvalError(f"COMET CSV line {i}: {err}") from None
    return scores


def apply_comet(rows: Sequence[MetricsRow],
                scores: dict[tuple[str, LangPair, FormalityLabel], float]) -> list[MetricsRow]:
    """Fill comet cells from an imported score table; unmatched rows unchanged."""
    return [
        replace(row, comet=scores[row.key]) if row.key in scores else row
        for row in rows
    ]
