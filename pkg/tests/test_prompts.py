from __future__ import annotations

import pytest

from fsmt.corpus import LangPair, Segment, Corpus, Split, AnnotatedReference
from fsmt.formality import FormalityLabel
from fsmt.prompts import (
    MissingPlaceholder,
    NTooLarge,
    PoolFormalityMismatch,
    PromptSpec,
    Shot,
    default_template_path,
    load_template,
    render_prompt,
    select_shots,
    shots_from_corpus,
    splitmix_next,
)

# Ten consecutive draws per seed, frozen from an independent transcription
# of the reference splitmix64.c (matches its published test vectors).
SPLITMIX_VECTORS = {
    0: [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
        0xF88BB8A8724C81EC, 0x1B39896A51A8749B, 0x53CB9F0C747EA2EA,
        0x2C829ABE1F4532E1, 0xC584133AC916AB3C, 0x3EE5789041C98AC3,
        0xF3B8488C368CB0A6,
    ],
    1: [
        0x910A2DEC89025CC1, 0xBEEB8DA1658EEC67, 0xF893A2EEFB32555E,
        0x71C18690EE42C90B, 0x71BB54D8D101B5B9, 0xC34D0BFF90150280,
        0xE099EC6CD7363CA5, 0x85E7BB0F12278575, 0x491718DE357E3DA8,
        0xCB435C8E74616796,
    ],
    (1 << 64) - 1: [
        0xE4D971771B652C20, 0xE99FF867DBF682C9, 0x382FF84CB27281E9,
        0x6D1DB36CCBA982D2, 0xB4A0472E578069AE, 0xD31DADBDA438BB33,
        0xF14F2CF802083FA5, 0x405DA438A39E8064, 0xC4FEA708156E0C84,
        0x031E50FE7BBD6E1C,
    ],
}

GOLDEN = 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1


class TestSplitMix:
    @pytest.mark.parametrize("seed", sorted(SPLITMIX_VECTORS))
    def test_matches_frozen_oracle(self, seed):
        state = seed
        values = []
        for _ in range(10):
            value, state = splitmix_next(state)
            values.append(value)
        assert values == SPLITMIX_VECTORS[seed]

    def test_state_advances_by_golden_gamma(self):
        for state in (0, 1, 12345, MASK):
            _, next_state = splitmix_next(state)
            assert next_state == (state + GOLDEN) & MASK

    def test_pure(self):
        assert splitmix_next(42) == splitmix_next(42)


class TestSelectShots:
    def test_zero_shots(self):
        assert select_shots(5, 0, 42) == []

    def test_forced_single(self):
        for seed in (0, 7, 42, MASK):
            assert select_shots(1, 1, seed) == [0]

    def test_frozen_fixtures(self):
        # hand-run with the independent splitmix oracle
        assert select_shots(5, 2, 42) == [3, 4]
        assert select_shots(5, 2, 7) == [2, 1]
        assert select_shots(10, 4, 123) == [5, 7, 2, 4]

    def test_without_replacement(self):
        for seed in range(200):
            picked = select_shots(8, 5, seed)
            assert len(picked) == len(set(picked)) == 5
            assert all(0 <= i < 8 for i in picked)

    def test_full_permutation(self):
        picked = select_shots(6, 6, 99)
        assert sorted(picked) == list(range(6))

    def test_n_too_large(self):
        with pytest.raises(NTooLarge):
            select_shots(3, 4, 0)

    def test_uniformity_sanity(self):
        counts = [0, 0, 0, 0]
        for seed in range(10_000):
            counts[select_shots(4, 1, seed)[0]] += 1
        for count in counts:
            assert 2000 <= count <= 3000


TEMPLATE = (
    "Translate into {FORMALITY} {TARGET_LANG}.\n\n{SHOTS}EN: {SOURCE}\nTranslation:"
)


def _pool(formality=FormalityLabel.FORMAL, size=5):
    return tuple(
        Shot(source=f"src {i}", target=f"tgt {i}", formality=formality)
        for i in range(size)
    )


class TestRenderPrompt:
    def test_zero_shots_blank_block(self):
        spec = PromptSpec(
            lang_pair=LangPair.EN_KO,
            formality=FormalityLabel.FORMAL,
            num_shots=0,
            seed=1,
        )
        prompt = render_prompt(spec, _pool(), "Hello.", TEMPLATE)
        assert prompt.text == "Translate into formal Korean.\n\nEN: Hello.\nTranslation:"
        assert prompt.shots_used == ()

    def test_missing_placeholder(self):
        spec = PromptSpec(LangPair.EN_KO, FormalityLabel.FORMAL, 0, 1)
        with pytest.raises(MissingPlaceholder):
            render_prompt(spec, _pool(), "x", "no placeholders {SHOTS}{FORMALITY}{TARGET_LANG}")

    def test_duplicate_placeholder_rejected(self):
        spec = PromptSpec(LangPair.EN_KO, FormalityLabel.FORMAL, 0, 1)
        with pytest.raises(MissingPlaceholder):
            render_prompt(spec, _pool(), "x", TEMPLATE + " {SOURCE}")

    def test_two_shot_blocks_in_selection_order(self):
        spec = PromptSpec(LangPair.EN_KO, FormalityLabel.FORMAL, 2, 42)
        prompt = render_prompt(spec, _pool(), "Hi.", TEMPLATE)
        # select_shots(5, 2, 42) == [3, 4] (frozen above)
        assert prompt.shots_used == (3, 4)
        expected_shots = "EN: src 3\nKorean: tgt 3\nEN: src 4\nKorean: tgt 4\n"
        assert prompt.text == (
            f"Translate into formal Korean.\n\n{expected_shots}EN: Hi.\nTranslation:"
        )

    def test_pool_formality_mismatch(self):
        spec = PromptSpec(LangPair.EN_KO, FormalityLabel.INFORMAL, 1, 0)
        with pytest.raises(PoolFormalityMismatch):
            render_prompt(spec, _pool(FormalityLabel.FORMAL), "x", TEMPLATE)

    def test_n_larger_than_pool(self):
        spec = PromptSpec(LangPair.EN_KO, FormalityLabel.FORMAL, 9, 0)
        with pytest.raises(NTooLarge):
            render_prompt(spec, _pool(size=5), "x", TEMPLATE)

    def test_reproducible_bytes(self):
        spec = PromptSpec(LangPair.EN_VI, FormalityLabel.FORMAL, 3, 777)
        first = render_prompt(spec, _pool(), "Same input.", TEMPLATE)
        second = render_prompt(spec, _pool(), "Same input.", TEMPLATE)
        assert first == second

    def test_placeholder_like_text_in_shots_survives(self):
        pool = (Shot(source="has {SOURCE} inside", target="t", formality=FormalityLabel.FORMAL),)
        spec = PromptSpec(LangPair.EN_KO, FormalityLabel.FORMAL, 1, 0)
        prompt = render_prompt(spec, pool, "real source", TEMPLATE)
        assert "has {SOURCE} inside" in prompt.text
        assert prompt.text.count("real source") == 1


def _mini_corpus():
    def ref(text):
        return AnnotatedReference.from_raw(text)

    segments = tuple(
        Segment(
            id=f"s{i}",
            lang_pair=LangPair.EN_KO,
            source=f"english {i}",
            formal_ref=ref(f"formal {i}"),
            informal_ref=ref(f"informal {i}"),
        )
        for i in range(3)
    )
    return Corpus(lang_pair=LangPair.EN_KO, split=Split.TRAIN, segments=segments)


def test_shots_from_corpus_projection():
    corpus = _mini_corpus()
    formal = shots_from_corpus(corpus, FormalityLabel.FORMAL)
    informal = shots_from_corpus(corpus, FormalityLabel.INFORMAL)
    assert [shot.target for shot in formal] == ["formal 0", "formal 1", "formal 2"]
    assert [shot.target for shot in informal] == ["informal 0", "informal 1", "informal 2"]
    assert all(shot.source.startswith("english") for shot in formal)


def test_default_template_has_all_placeholders_once():
    template = load_template(default_template_path())
    for placeholder in ("{FORMALITY}", "{TARGET_LANG}", "{SHOTS}", "{SOURCE}"):
        assert template.count(placeholder) == 1
