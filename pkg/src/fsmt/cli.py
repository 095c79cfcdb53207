"""Command-line entry point: one binary, five subcommands.

    fsmt ingest    validate an annotated corpus and print summary counts
    fsmt tokenize  train or apply a boundary-respecting BPE model
    fsmt generate  run the synthetic-translation pipeline (mock or live)
    fsmt evaluate  score hypotheses: BLEU, %M-Acc, %C-F
    fsmt report    render metric rows as a Markdown or CSV table

Every flag may also come from an optional --config file of key=value
lines; explicit flags win. Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from pathlib import Path

from fsmt import corpus as corpus_mod
from fsmt import evaluate as eval_mod
from fsmt import pipeline as pipe_mod
from fsmt import tokenizer as tok_mod
from fsmt.corpus import LangPair, Split
from fsmt.errors import FsmtError
from fsmt.formality import (
    FormalityLabel,
    default_lexicon_path,
    load_lexicon,
    parse_requested_formality,
)
from fsmt.llm import ChatClient, HttpBackend, MockBackend
from fsmt.pipeline import Mode, PipelineConfig
from fsmt.prompts import default_template_path, load_template, shots_from_corpus

API_KEY_ENV = "FSMT_API_KEY"


class UsageError(FsmtError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # argparse hook; keep failures as exceptions
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < (1 << 64):
        raise ValueError("must be an unsigned 64-bit integer")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _temperature(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 2.0:
        raise ValueError("must be in [0, 2]")
    return value


def _report_format(text: str) -> str:
    value = text.strip().lower()
    if value not in ("md", "csv"):
        raise ValueError("format must be md or csv")
    return value


def _split(text: str) -> Split:
    try:
        return Split(text.strip().lower())
    except ValueError:
        raise ValueError(f"unknown split {text!r} (train or test)") from None


def _setting(text: str) -> eval_mod.Setting:
    try:
        return eval_mod.Setting(text.strip().lower())
    except ValueError:
        raise ValueError(f"unknown setting {text!r} (supervised or zero-shot)") from None


def build_parser() -> tuple[_ArgumentParser, dict[str, _ArgumentParser]]:
    parser = _ArgumentParser(
        prog="fsmt",
        description="Formality-sensitive MT data tooling",
    )
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    subs: dict[str, _ArgumentParser] = {}

    def sub(name: str, help_text: str) -> _ArgumentParser:
        sp = subparsers.add_parser(name, help=help_text)
        sp.add_argument("--config", metavar="FILE",
                        help="key=value file supplying defaults for any flag")
        subs[name] = sp
        return sp

    sp = sub("ingest", "validate an annotated corpus TSV")
    sp.add_argument("--in", dest="in_path", metavar="FILE", help="annotated corpus TSV")
    sp.add_argument("--pair", type=LangPair.parse, help="language pair, e.g. en-ko")
    sp.add_argument("--split", type=_split, help="train or test (default train)")

    sp = sub("tokenize", "train or apply a BPE subword model")
    sp.add_argument("--train", metavar="FILE", help="morph-segmented units file to train on")
    sp.add_argument("--encode", metavar="FILE", help="units file to encode")
    sp.add_argument("--decode", metavar="FILE", help="token file to decode")
    sp.add_argument("--model", metavar="FILE", help="model file to write (train) or read")
    sp.add_argument("--merges", type=_nonneg_int, help="number of merges to learn")
    sp.add_argument("--min-frequency", type=_positive_int,
                    help="pair frequency floor (default 2)")
    sp.add_argument("--out", metavar="FILE", help="output file (default stdout)")

    sp = sub("generate", "generate and filter synthetic translations")
    sp.add_argument("--pair", type=LangPair.parse)
    sp.add_argument("--formality", type=parse_requested_formality)
    sp.add_argument("--mode", type=Mode.parse, help="supervised or zero-shot (default supervised)")
    sp.add_argument("--corpus", metavar="FILE", help="annotated TSV (supervised mode)")
    sp.add_argument("--sources", metavar="FILE", help="source pool, one per line (zero-shot mode)")
    sp.add_argument("--shots", type=_nonneg_int,
                    help="in-context examples per prompt (default 4 supervised, 0 zero-shot)")
    sp.add_argument("--shots-from", metavar="FILE",
                    help="annotated TSV supplying the shot pool instead of --corpus")
    sp.add_argument("--seed", type=_u64, help="run seed (default 0)")
    sp.add_argument("--template", metavar="FILE", help="prompt template (default packaged)")
    sp.add_argument("--lexicon", metavar="FILE", help="classifier lexicon JSON (default packaged)")
    sp.add_argument("--mock-dir", metavar="DIR", help="canned-response directory (offline mode)")
    sp.add_argument("--endpoint", metavar="URL", help="chat-completions endpoint (live mode)")
    sp.add_argument("--model-name", metavar="NAME", help="model field of requests (default gpt-4)")
    sp.add_argument("--temperature", type=_temperature, help="sampling temperature (default 0)")
    sp.add_argument("--workers", type=_positive_int, help="concurrent items (default 1)")
    sp.add_argument("--out", metavar="FILE", help="JSONL output (default stdout)")

    sp = sub("evaluate", "score a hypothesis file against an annotated test set")
    sp.add_argument("--test", metavar="FILE", help="annotated test TSV")
    sp.add_argument("--hyp", metavar="FILE", help="hypotheses, one per line")
    sp.add_argument("--pair", type=LangPair.parse)
    sp.add_argument("--formality", type=parse_requested_formality)
    sp.add_argument("--lexicon", metavar="FILE", help="classifier lexicon JSON (default packaged)")
    sp.add_argument("--system", metavar="NAME", help="system name for --out rows (default 'system')")
    sp.add_argument("--out", metavar="FILE", help="write a metrics-row CSV here")

    sp = sub("report", "render metric rows as a table")
    sp.add_argument("--in", dest="in_path", metavar="FILE", help="rows CSV (default stdin)")
    sp.add_argument("--comet", metavar="FILE", help="imported COMET scores CSV to merge")
    sp.add_argument("--format", type=_report_format, help="md or csv (default md)")
    sp.add_argument("--mode", type=_setting, help="supervised or zero-shot (default supervised)")
    sp.add_argument("--out", metavar="FILE", help="output file (default stdout)")

    return parser, subs


def _flag_registry(subparser: _ArgumentParser) -> dict[str, tuple[str, object]]:
    registry: dict[str, tuple[str, object]] = {}
    for action in subparser._actions:
        if not action.option_strings or action.dest in ("help", "config"):
            continue
        key = action.option_strings[-1].lstrip("-")
        registry[key] = (action.dest, action.type)
    return registry


# explicit use of any flag in a group blocks config values for the whole group
_EXCLUSIVE_GROUPS = {
    "generate": [("mock_dir", "endpoint"), ("corpus", "sources")],
    "tokenize": [("train", "encode", "decode")],
}


def _merge_config_file(ns: argparse.Namespace, subparser: _ArgumentParser, path: Path) -> None:
    registry = _flag_registry(subparser)
    blocked: set[str] = set()
    for group in _EXCLUSIVE_GROUPS.get(ns.subcommand, []):
        if any(getattr(ns, dest) is not None for dest in group):
            blocked.update(group)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read config file: {err}") from None
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip().replace("_", "-")
        raw = raw.strip()
        if key == "config":
            raise UsageError(f"{path}:{lineno}: config files cannot nest")
        if key not in registry:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for {ns.subcommand}")
        dest, convert = registry[key]
        if dest in blocked or getattr(ns, dest) is not None:
            continue  # explicit flags win
        try:
            setattr(ns, dest, convert(raw) if convert else raw)
        except ValueError as err:
            raise UsageError(f"{path}:{lineno}: {key}: {err}") from None


_REQUIRED = {
    "evaluate": ("test", "hyp", "pair", "formality"),
}

_DEFAULTS = {
    "ingest": {"split": Split.TRAIN},
    "tokenize": {"min_frequency": 2},
    "generate": {"mode": Mode.SUPERVISED, "seed": 0, "model_name": "gpt-4",
                 "temperature": 0.0, "workers": 1},
    "evaluate": {"system": "system"},
    "report": {"format": "md", "mode": eval_mod.Setting.SUPERVISED},
}


def parse_args(argv: list[str]) -> argparse.Namespace:
    """Parse and validate argv into a ready-to-run configuration."""
    parser, subs = build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        raise UsageError(f"missing subcommand\n{parser.format_usage().rstrip()}")
    if ns.config:
        _merge_config_file(ns, subs[ns.subcommand], Path(ns.config))
    for dest in _REQUIRED.get(ns.subcommand, ()):
        if getattr(ns, dest) is None:
            flag = "--" + dest.replace("_", "-")
            raise UsageError(
                f"{ns.subcommand}: {flag} is required\n"
                f"{subs[ns.subcommand].format_usage().rstrip()}"
            )
    for dest, value in _DEFAULTS.get(ns.subcommand, {}).items():
        if getattr(ns, dest) is None:
            setattr(ns, dest, value)
    if ns.subcommand == "generate" and ns.shots is None:
        ns.shots = 4 if ns.mode is Mode.SUPERVISED else 0
    return ns


def _read_lines(path: str) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _run_ingest(ns: argparse.Namespace) -> int:
    if ns.in_path is None or ns.pair is None:
        raise UsageError("ingest: --in and --pair are required")
    corpus = corpus_mod.load_corpus(ns.in_path, ns.pair, ns.split)
    annotated = sum(
        1 for s in corpus.segments if s.formal_ref.phrases or s.informal_ref.phrases
    )
    print(f"loaded {len(corpus)} segments ({ns.pair.value}, {ns.split.value}) from {ns.in_path}")
    print(f"{annotated} segments carry formality phrase annotations")
    return 0


def _run_tokenize(ns: argparse.Namespace) -> int:
    chosen = [flag for flag in ("train", "encode", "decode") if getattr(ns, flag) is not None]
    if len(chosen) != 1:
        raise UsageError("tokenize: exactly one of --train, --encode, --decode is required")
    if ns.model is None:
        raise UsageError("tokenize: --model is required")
    if ns.train is not None:
        if ns.merges is None:
            raise UsageError("tokenize: --merges is required with --train")
        counts: Counter[str] = Counter()
        for line in _read_lines(ns.train):
            counts.update(tok_mod.MorphSegmentedText.from_line(line).units)
        model = tok_mod.train_bpe(counts, ns.merges, ns.min_frequency)
        tok_mod.save_model(model, ns.model)
        print(f"learned {len(model.merges)} merges -> {ns.model}")
        return 0
    model = tok_mod.load_model(ns.model)
    if ns.encode is not None:
        out_lines = [
            " ".join(tok_mod.encode(model, tok_mod.MorphSegmentedText.from_line(line)))
            for line in _read_lines(ns.encode)
        ]
    else:
        out_lines = [
            tok_mod.decode(line.split()).to_line() for line in _read_lines(ns.decode)
        ]
    _write_output("".join(line + "\n" for line in out_lines), ns.out)
    return 0


def _run_generate(ns: argparse.Namespace) -> int:
    if ns.pair is None or ns.formality is None:
        raise UsageError("generate: --pair and --formality are required")
    if (ns.mock_dir is None) == (ns.endpoint is None):
        raise UsageError("generate: exactly one of --mock-dir or --endpoint is required")
    # construct the backend first: a missing mock dir or API key should be
    # reported before any corpus parsing starts
    if ns.mock_dir is not None:
        backend = MockBackend(ns.mock_dir)
    else:
        token = os.environ.get(API_KEY_ENV, "")
        if not token:
            raise UsageError(f"generate: set {API_KEY_ENV} to use --endpoint")
        backend = HttpBackend(ns.endpoint, token)
    client = ChatClient(backend)
    template_path = ns.template if ns.template is not None else default_template_path()
    template = load_template(template_path)
    lexicon_path = ns.lexicon if ns.lexicon is not None else default_lexicon_path(ns.pair.target_code)
    lexicon = load_lexicon(lexicon_path)

    if ns.mode is Mode.SUPERVISED:
        if ns.corpus is None:
            raise UsageError("generate: supervised mode requires --corpus")
        inputs: corpus_mod.Corpus | corpus_mod.SourcePool = corpus_mod.load_corpus(
            ns.corpus, ns.pair, Split.TRAIN
        )
    else:
        if ns.sources is None:
            raise UsageError("generate: zero-shot mode requires --sources")
        inputs = corpus_mod.load_source_pool(ns.sources, ns.pair)
    shot_pool = None
    if ns.shots_from is not None:
        pool_corpus = corpus_mod.load_corpus(ns.shots_from, ns.pair, Split.TRAIN)
        shot_pool = shots_from_corpus(pool_corpus, ns.formality)

    config = PipelineConfig(
        mode=ns.mode,
        lang_pair=ns.pair,
        formality=ns.formality,
        n_shots=ns.shots,
        seed=ns.seed,
        template=template,
        template_id=Path(str(template_path)).stem,
        model=ns.model_name,
        temperature=ns.temperature,
        workers=ns.workers,
    )
    records, stats = pipe_mod.run_generation(config, inputs, lexicon, client, shot_pool)
    if ns.out is not None:
        pipe_mod.write_records(records, ns.out)
    else:
        sys.stdout.write(pipe_mod.dumps_records(records))
    by_label = ", ".join(
        f"{label.value} {count}" for label, count in stats.by_label.items() if count
    )
    print(
        f"generated {stats.total} records, accepted {stats.accepted}"
        + (f" ({by_label})" if by_label else ""),
        file=sys.stderr,
    )
    return 0


def _run_evaluate(ns: argparse.Namespace) -> int:
    corpus = corpus_mod.load_corpus(ns.test, ns.pair, Split.TEST)
    hypotheses = eval_mod.load_hypotheses(ns.hyp)
    eval_input = eval_mod.EvalInput(
        corpus=corpus, hypotheses=tuple(hypotheses), desired_formality=ns.formality
    )
    if ns.formality is FormalityLabel.FORMAL:
        references = [s.formal_ref.plain for s in corpus.segments]
    else:
        references = [s.informal_ref.plain for s in corpus.segments]
    bleu = eval_mod.corpus_bleu(
        [eval_mod.bleu_tokenize(h) for h in hypotheses],
        [eval_mod.bleu_tokenize(r) for r in references],
    )
    lexicon_path = ns.lexicon if ns.lexicon is not None else default_lexicon_path(ns.pair.target_code)
    lexicon = load_lexicon(lexicon_path)
    c_f = eval_mod.c_f_rate(hypotheses, lexicon, ns.formality)
    try:
        matched = eval_mod.m_acc(eval_input)
        matched_text = f"{matched:.1f}"
    except eval_mod.NoAnnotatedSegments:
        matched = None
        matched_text = "n/a (no annotated segments)"
    print(f"BLEU {bleu:.2f}")
    print(f"%M-Acc {matched_text}")
    print(f"%C-F {c_f:.1f}")
    if ns.out is not None:
        if matched is None:
            raise eval_mod.EvalError(
                "cannot write a metrics row: the test set has no phrase annotations"
            )
        row = eval_mod.MetricsRow(
            system=ns.system,
            lang_pair=ns.pair,
            formality=ns.formality,
            bleu=bleu,
            m_acc_pct=matched,
            c_f_pct=c_f,
        )
        report = eval_mod.build_report([row], eval_mod.Setting.SUPERVISED)
        _write_output(eval_mod.render_report(report, "csv"), ns.out)
    return 0


def _run_report(ns: argparse.Namespace) -> int:
    if ns.in_path is not None:
        rows = eval_mod.read_rows_csv(ns.in_path)
    else:
        rows = eval_mod.parse_rows_csv(sys.stdin)
    if ns.comet is not None:
        rows = eval_mod.apply_comet(rows, eval_mod.load_comet_csv(ns.comet))
    report = eval_mod.build_report(rows, ns.mode)
    _write_output(eval_mod.render_report(report, ns.format), ns.out)
    return 0


_RUNNERS = {
    "ingest": _run_ingest,
    "tokenize": _run_tokenize,
    "generate": _run_generate,
    "evaluate": _run_evaluate,
    "report": _run_report,
}


def run(ns: argparse.Namespace) -> int:
    return _RUNNERS[ns.subcommand](ns)


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    try:
        ns = parse_args(args)
    except UsageError as err:
        print(f"fsmt: {err}", file=sys.stderr)
        return 2
    try:
        return run(ns)
    except UsageError as err:
        print(f"fsmt: {err}", file=sys.stderr)
        return 2
    except (FsmtError, OSError) as err:
        print(f"fsmt: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
