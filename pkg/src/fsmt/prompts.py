"""Few-shot prompt construction with reproducible shot sampling.

Shot selection uses SplitMix64 driving a partial Fisher-Yates shuffle,
so the same (pool, n, seed) always picks the same shots on every
platform. Templates are plain text files with four placeholders, each
required exactly once: {FORMALITY}, {TARGET_LANG}, {SHOTS}, {SOURCE}.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from importlib import resources

from fsmt.corpus import Corpus, LangPair
from fsmt.errors import FsmtError
from fsmt.formality import FormalityLabel

UINT64_MASK = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

PLACEHOLDERS = ("{FORMALITY}", "{TARGET_LANG}", "{SHOTS}", "{SOURCE}")


class PromptError(FsmtError):
    pass


class NTooLarge(PromptError):
    pass


class MissingPlaceholder(PromptError):
    pass


class PoolFormalityMismatch(PromptError):
    pass


def splitmix_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (output value, next state), both uint64.

    next_state = state + 0x9E3779B97F4A7C15 mod 2^64; the output is the
    standard SplitMix64 finalizer mix of next_state.
    """
    next_state = (state + _GOLDEN_GAMMA) & UINT64_MASK
    z = next_state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & UINT64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & UINT64_MASK
    z ^= z >> 31
    return z, next_state


def select_shots(pool_size: int, n: int, seed: int) -> list[int]:
    """Sample n distinct indices from [0, pool_size) without replacement.

    Partial Fisher-Yates: position i swaps with i + (draw % remaining),
    one SplitMix64 draw per position starting from seed. Modulo bias is
    accepted; pools here are small.
    """
    if n < 0 or n > pool_size:
        raise NTooLarge(f"cannot select {n} shots from a pool of {pool_size}")
    indices = list(range(pool_size))
    state = seed & UINT64_MASK
    for i in range(n):
        value, state = splitmix_next(state)
        r = value % (pool_size - i)
        indices[i], indices[i + r] = indices[i + r], indices[i]
    return indices[:n]


@dataclass(frozen=True)
class Shot:
    """One in-context example: an English source and its register-true target."""

    source: str
    target: str
    formality: FormalityLabel


@dataclass(frozen=True)
class PromptSpec:
    lang_pair: LangPair
    formality: FormalityLabel
    num_shots: int
    seed: int
    template_id: str = "default"


@dataclass(frozen=True)
class Prompt:
    text: str
    shots_used: tuple[int, ...]


def shots_from_corpus(corpus: Corpus, formality: FormalityLabel) -> tuple[Shot, ...]:
    """Project a corpus onto (source, chosen-register reference) shot pairs."""
    if formality is FormalityLabel.FORMAL:
        return tuple(
            Shot(source=s.source, target=s.formal_ref.plain, formality=formality)
            for s in corpus.segments
        )
    if formality is FormalityLabel.INFORMAL:
        return tuple(
            Shot(source=s.source, target=s.informal_ref.plain, formality=formality)
            for s in corpus.segments
        )
    raise PoolFormalityMismatch("shot pools are formal or informal, never neutral")


def _substitute_once(template: str, mapping: dict[str, str]) -> str:
    # single simultaneous pass so substituted text is never re-scanned
    positions = sorted((template.index(key), key) for key in mapping)
    out: list[str] = []
    prev = 0
    for pos, key in positions:
        out.append(template[prev:pos])
        out.append(mapping[key])
        prev = pos + len(key)
    out.append(template[prev:])
    return "".join(out)


def render_prompt(spec: PromptSpec, pool: list[Shot] | tuple[Shot, ...],
                  source: str, template: str) -> Prompt:
    """Render a conditioned-translation prompt with seeded shot selection.

    Chosen shots are serialized in selection order as
    ``EN: <source>\\n<target language>: <target>\\n`` blocks.
    """
    for placeholder in PLACEHOLDERS:
        count = template.count(placeholder)
        if count != 1:
            raise MissingPlaceholder(
                f"template must contain {placeholder} exactly once (found {count})"
            )
    if spec.formality not in (FormalityLabel.FORMAL, FormalityLabel.INFORMAL):
        raise PoolFormalityMismatch("prompt formality must be formal or informal")
    for shot in pool:
        if shot.formality is not spec.formality:
            raise PoolFormalityMismatch(
                f"pool contains a {shot.formality.value} shot in a "
                f"{spec.formality.value} prompt"
            )
    chosen = select_shots(len(pool), spec.num_shots, spec.seed)
    target_lang = spec.lang_pair.target_language
    blocks = "".join(
        f"EN: {pool[i].source}\n{target_lang}: {pool[i].target}\n" for i in chosen
    )
    text = _substitute_once(
        template,
        {
            "{FORMALITY}": spec.formality.value,
            "{TARGET_LANG}": target_lang,
            "{SHOTS}": blocks,
            "{SOURCE}": source,
        },
    )
    return Prompt(text=text, shots_used=tuple(chosen))


def default_template_path() -> Path:
    return Path(str(resources.files("fsmt").joinpath("data/templates/default.txt")))


def load_template(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")
