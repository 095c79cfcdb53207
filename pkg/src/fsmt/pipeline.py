"""Generation -> classification -> filtering pipeline.

Every input source becomes exactly one GenerationRecord: the rendered
prompt, the raw model reply, the extracted candidate, the classifier
verdict, and whether the candidate met the requested register. Rejected
and failed items are kept (accepted=false) so acceptance rates stay
analyzable; filter_records() projects the accepted subset.

Determinism: the per-item seed is the (i+1)-th SplitMix64 draw from the
run seed, so outputs are identical no matter how many workers ran, and a
fixed mock directory replays byte-identical JSONL.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from fsmt.corpus import Corpus, LangPair, SourcePool
from fsmt.errors import FsmtError
from fsmt.formality import FormalityLabel, Lexicon, classify
from fsmt.llm import ChatClient, ChatMessage, ChatRequest, ClientError, extract_candidate
from fsmt.prompts import (
    NTooLarge,
    Prompt,
    PromptSpec,
    Shot,
    render_prompt,
    shots_from_corpus,
    splitmix_next,
)


class PipelineError(FsmtError):
    pass


class PipelineConfigError(PipelineError):
    pass


class AbortThreshold(PipelineError):
    pass


class RecordSchemaError(PipelineError):
    pass


class Mode(Enum):
    SUPERVISED = "supervised"
    ZERO_SHOT = "zero-shot"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown mode {text!r} (supervised or zero-shot)") from None


@dataclass(frozen=True)
class PipelineConfig:
    mode: Mode
    lang_pair: LangPair
    formality: FormalityLabel
    n_shots: int = 4
    seed: int = 0
    template: str = ""
    template_id: str = "default"
    model: str = "gpt-4"
    temperature: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.formality not in (FormalityLabel.FORMAL, FormalityLabel.INFORMAL):
            raise PipelineConfigError("requested formality must be formal or informal")
        if self.n_shots < 0:
            raise PipelineConfigError("n_shots must be >= 0")
        if not 0 <= self.seed < (1 << 64):
            raise PipelineConfigError("seed must fit in an unsigned 64-bit integer")
        if self.workers < 1:
            raise PipelineConfigError("workers must be >= 1")
        if not self.template:
            raise PipelineConfigError("config needs a prompt template")


@dataclass(frozen=True)
class GenerationRecord:
    index: int
    source: str
    lang_pair: LangPair
    requested_formality: FormalityLabel
    prompt_text: str
    raw_response: str
    candidate: str
    predicted_label: FormalityLabel
    accepted: bool
    seed: int


@dataclass(frozen=True)
class AcceptanceStats:
    total: int
    accepted: int
    by_label: dict[FormalityLabel, int]


def recompute_stats(records: list[GenerationRecord]) -> AcceptanceStats:
    by_label = {label: 0 for label in FormalityLabel}
    accepted = 0
    for record in records:
        by_label[record.predicted_label] += 1
        accepted += record.accepted
    return AcceptanceStats(total=len(records), accepted=accepted, by_label=by_label)


def build_chat_request(config: PipelineConfig, prompt_text: str) -> ChatRequest:
    """The exact request the pipeline sends for one rendered prompt."""
    return ChatRequest(
        model=config.model,
        messages=(ChatMessage(role="user", content=prompt_text),),
        temperature=config.temperature,
    )


def item_seeds(run_seed: int, count: int) -> list[int]:
    """Per-item seeds: consecutive SplitMix64 draws from the run seed."""
    seeds: list[int] = []
    state = run_seed
    for _ in range(count):
        value, state = splitmix_next(state)
        seeds.append(value)
    return seeds


def run_generation(
    config: PipelineConfig,
    inputs: Corpus | SourcePool,
    lexicon: Lexicon,
    client: ChatClient,
    shot_pool: tuple[Shot, ...] | None = None,
) -> tuple[list[GenerationRecord], AcceptanceStats]:
    """Generate one candidate per input source and filter by register.

    Supervised mode takes a Corpus (its sources are translated, and its
    chosen-register references form the default shot pool); zero-shot
    mode takes a SourcePool and defaults to an empty pool, so n_shots>0
    needs an explicit shot_pool. Client failures become records with an
    empty candidate and a Neutral verdict instead of aborting, unless
    more than half the items fail transport.
    """
    if config.mode is Mode.SUPERVISED:
        if not isinstance(inputs, Corpus):
            raise PipelineConfigError("supervised mode needs a Corpus input")
        sources = [segment.source for segment in inputs.segments]
        pool = shot_pool if shot_pool is not None else shots_from_corpus(inputs, config.formality)
    else:
        if not isinstance(inputs, SourcePool):
            raise PipelineConfigError("zero-shot mode needs a SourcePool input")
        sources = list(inputs.sources)
        pool = shot_pool if shot_pool is not None else ()
    if inputs.lang_pair is not config.lang_pair:
        raise PipelineConfigError(
            f"input pair {inputs.lang_pair.value} does not match config {config.lang_pair.value}"
        )
    if lexicon.lang and lexicon.lang != config.lang_pair.target_code:
        raise PipelineConfigError(
            f"lexicon language {lexicon.lang!r} does not match target "
            f"{config.lang_pair.target_code!r}"
        )
    if config.n_shots > len(pool):
        raise NTooLarge(f"n_shots={config.n_shots} exceeds shot pool size {len(pool)}")

    seeds = item_seeds(config.seed, len(sources))
    prompts: list[Prompt] = []
    for i, source in enumerate(sources):
        spec = PromptSpec(
            lang_pair=config.lang_pair,
            formality=config.formality,
            num_shots=config.n_shots,
            seed=seeds[i],
            template_id=config.template_id,
        )
        prompts.append(render_prompt(spec, pool, source, config.template))

    def generate_one(i: int) -> tuple[GenerationRecord, bool]:
        raw_response = ""
        candidate = ""
        label = FormalityLabel.NEUTRAL
        transport_failed = False
        try:
            response = client.send(build_chat_request(config, prompts[i].text))
        except ClientError:
            transport_failed = True
        else:
            raw_response = response.content
            try:
                candidate = extract_candidate(response.content)
            except ClientError:
                candidate = ""
            else:
                label = classify(lexicon, candidate)
        record = GenerationRecord(
            index=i,
            source=sources[i],
            lang_pair=config.lang_pair,
            requested_formality=config.formality,
            prompt_text=prompts[i].text,
            raw_response=raw_response,
            candidate=candidate,
            predicted_label=label,
            accepted=label is config.formality,
            seed=seeds[i],
        )
        return record, transport_failed

    if config.workers == 1 or len(sources) <= 1:
        results = [generate_one(i) for i in range(len(sources))]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(generate_one, range(len(sources))))

    records = [record for record, _ in results]
    transport_failures = sum(failed for _, failed in results)
    if transport_failures * 2 > len(sources):
        raise AbortThreshold(
            f"{transport_failures} of {len(sources)} items failed transport"
        )
    return records, recompute_stats(records)


def filter_records(records: list[GenerationRecord]) -> list[GenerationRecord]:
    """Accepted records only, order preserved."""
    return [record for record in records if record.accepted]


_RECORD_FIELDS = (
    "index",
    "source",
    "lang_pair",
    "requested_formality",
    "prompt_text",
    "raw_response",
    "candidate",
    "predicted_label",
    "accepted",
    "seed",
)


def _record_to_obj(record: GenerationRecord) -> dict:
    return {
        "index": record.index,
        "source": record.source,
        "lang_pair": record.lang_pair.value,
        "requested_formality": record.requested_formality.value,
        "prompt_text": record.prompt_text,
        "raw_response": record.raw_response,
        "candidate": record.candidate,
        "predicted_label": record.predicted_label.value,
        "accepted": record.accepted,
        "seed": record.seed,
    }


def dumps_records(records: list[GenerationRecord]) -> str:
    """JSONL text with fixed key order and LF endings (byte-stable)."""
    return "".join(
        json.dumps(_record_to_obj(record), ensure_ascii=False, separators=(",", ":")) + "\n"
        for record in records
    )


def write_records(records: list[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_records(records))


def read_records(path: str | Path) -> list[GenerationRecord]:
    records: list[GenerationRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise RecordSchemaError(f"{path}:{lineno}: invalid JSON: {err}") from None
            if not isinstance(obj, dict):
                raise RecordSchemaError(f"{path}:{lineno}: record is not an object")
            for field in _RECORD_FIELDS:
                if field not in obj:
                    raise RecordSchemaError(f"{path}:{lineno}: missing field {field!r}")
            try:
                record = GenerationRecord(
                    index=int(obj["index"]),
                    source=obj["source"],
                    lang_pair=LangPair(obj["lang_pair"]),
                    requested_formality=FormalityLabel(obj["requested_formality"]),
                    prompt_text=obj["prompt_text"],
                    raw_response=obj["raw_response"],
                    candidate=obj["candidate"],
                    predicted_label=FormalityLabel(obj["predicted_label"]),
                    accepted=bool(obj["accepted"]),
                    seed=int(obj["seed"]),
                )
            except (ValueError, TypeError) as err:
                raise RecordSchemaError(f"{path}:{lineno}: {err}") from None
            if record.accepted != (record.predicted_label is record.requested_formality):
                raise RecordSchemaError(
                    f"{path}:{lineno}: accepted flag contradicts predicted label"
                )
            records.append(record)
    return records
