from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from fsmt.corpus import (
    DuplicateId,
    EmptyField,
    EmptyPhrase,
    LangPair,
    MalformedRecord,
    Split,
    UnbalancedMarkup,
    load_corpus,
    load_source_pool,
    parse_annotated_line,
    reinsert_markup,
    strip_markup,
)

from conftest import write_corpus_tsv


class TestStripMarkup:
    def test_single_phrase(self):
        plain, phrases, spans = strip_markup("[F]Vous[/F] êtes là")
        assert plain == "Vous êtes là"
        assert phrases == ("Vous",)
        assert spans == ((0, 4),)

    def test_no_markup_is_identity(self):
        assert strip_markup("abc") == ("abc", (), ())

    def test_two_phrases_byte_offsets(self):
        plain, phrases, spans = strip_markup("[F]a[/F] x [F]b[/F]")
        assert plain == "a x b"
        assert phrases == ("a", "b")
        assert spans == ((0, 1), (4, 5))
        # independent scan: each span must locate its phrase in the plain bytes
        data = plain.encode("utf-8")
        for (start, end), phrase in zip(spans, phrases):
            assert data[start:end].decode("utf-8") == phrase

    def test_multibyte_offsets(self):
        plain, phrases, spans = strip_markup("[F]감사합니다[/F]")
        assert plain == "감사합니다"
        assert spans == ((0, 15),)

    @pytest.mark.parametrize(
        "raw",
        ["[F]broken", "no open[/F]", "[F]a[F]b[/F][/F]", "[/F][F]x[/F]"],
    )
    def test_unbalanced(self, raw):
        with pytest.raises(UnbalancedMarkup):
            strip_markup(raw)

    def test_empty_phrase_rejected(self):
        with pytest.raises(EmptyPhrase):
            strip_markup("x [F][/F] y")

    def test_reinsert_roundtrip(self):
        raw = "pre [F]один[/F] mid [F]два[/F] post"
        plain, _, spans = strip_markup(raw)
        assert reinsert_markup(plain, spans) == raw


@given(
    st.lists(
        st.tuples(
            st.text(alphabet="ab х감", min_size=0, max_size=5),
            st.text(alphabet="cd ы니", min_size=1, max_size=5),
        ),
        min_size=0,
        max_size=5,
    ),
    st.text(alphabet="ef z다", min_size=0, max_size=5),
)
def test_markup_roundtrip_property(pieces, tail):
    """Building raw from (gap, phrase) pieces and stripping recovers both."""
    raw = "".join(gap + f"[F]{phrase}[/F]" for gap, phrase in pieces) + tail
    plain, phrases, spans = strip_markup(raw)
    assert phrases == tuple(phrase for _, phrase in pieces)
    assert reinsert_markup(plain, spans) == raw
    data = plain.encode("utf-8")
    for (start, end), phrase in zip(spans, phrases):
        assert data[start:end].decode("utf-8") == phrase
    # spans sorted and non-overlapping
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        assert s1 < e1 <= s2 < e2


class TestParseAnnotatedLine:
    def test_annotated_record(self):
        seg = parse_annotated_line(
            "s1\tThank you.\t[F]감사합니다[/F]\t[F]고마워[/F]", LangPair.EN_KO
        )
        assert seg.id == "s1"
        assert seg.source == "Thank you."
        assert seg.formal_ref.phrases == ("감사합니다",)
        assert seg.formal_ref.plain == "감사합니다"
        assert seg.informal_ref.phrases == ("고마워",)
        assert seg.informal_ref.plain == "고마워"

    def test_plain_record_has_no_phrases(self):
        seg = parse_annotated_line("s2\tHi.\tOlá\tOi", LangPair.EN_PT)
        assert seg.formal_ref.phrases == ()
        assert seg.informal_ref.phrases == ()

    def test_unbalanced_markup(self):
        with pytest.raises(UnbalancedMarkup):
            parse_annotated_line("s3\tHi.\t[F]broken\tOi", LangPair.EN_PT)

    @pytest.mark.parametrize("line", ["a\tb\tc", "a\tb\tc\td\te", "single"])
    def test_wrong_field_count(self, line):
        with pytest.raises(MalformedRecord):
            parse_annotated_line(line, LangPair.EN_KO)

    @pytest.mark.parametrize(
        "line",
        ["\tsrc\tf\ti", "s\t\tf\ti", "s\tsrc\t\ti", "s\tsrc\tf\t"],
    )
    def test_empty_fields(self, line):
        with pytest.raises(EmptyField):
            parse_annotated_line(line, LangPair.EN_KO)

    def test_nfc_normalization(self):
        # decomposed e + combining acute must parse to the composed form
        seg = parse_annotated_line("s\tsrc\t[F]é[/F]\tx", LangPair.EN_PT)
        assert seg.formal_ref.plain == "é"
        assert seg.formal_ref.spans == ((0, 2),)


class TestLoadCorpus:
    def test_order_preserved(self, tmp_path):
        path = write_corpus_tsv(
            tmp_path / "c.tsv",
            ["s1\tHi.\t[F]안녕하세요[/F]\t[F]안녕[/F]", "s2\tBye.\t가세요\t가"],
        )
        corpus = load_corpus(path, LangPair.EN_KO, Split.TRAIN)
        assert [s.id for s in corpus.segments] == ["s1", "s2"]
        assert corpus.split is Split.TRAIN

    def test_duplicate_id(self, tmp_path):
        path = write_corpus_tsv(
            tmp_path / "c.tsv", ["s1\ta\tb\tc", "s1\td\te\tf"]
        )
        with pytest.raises(DuplicateId) as exc:
            load_corpus(path, LangPair.EN_KO, Split.TRAIN)
        assert exc.value.segment_id == "s1"
        assert exc.value.line_number == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("", encoding="utf-8")
        corpus = load_corpus(path, LangPair.EN_KO, Split.TEST)
        assert len(corpus) == 0

    def test_parse_error_carries_line_number(self, tmp_path):
        path = write_corpus_tsv(tmp_path / "c.tsv", ["s1\ta\tb\tc", "bad line"])
        with pytest.raises(MalformedRecord, match=":2:"):
            load_corpus(path, LangPair.EN_KO, Split.TRAIN)

    def test_crlf_rejected(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_bytes(b"s1\ta\tb\tc\r\n")
        with pytest.raises(MalformedRecord):
            load_corpus(path, LangPair.EN_KO, Split.TRAIN)

    def test_deterministic(self, tmp_path):
        path = write_corpus_tsv(
            tmp_path / "c.tsv",
            ["s1\tHi.\t[F]안녕하세요[/F]\t[F]안녕[/F]", "s2\tBye.\t가세요\t가"],
        )
        first = load_corpus(path, LangPair.EN_KO, Split.TRAIN)
        second = load_corpus(path, LangPair.EN_KO, Split.TRAIN)
        assert first == second

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_corpus(tmp_path / "nope.tsv", LangPair.EN_KO, Split.TRAIN)


class TestSourcePool:
    def test_load(self, tmp_path):
        path = tmp_path / "pool.txt"
        path.write_text("One sentence.\nAnother one.\n", encoding="utf-8")
        pool = load_source_pool(path, LangPair.EN_PT)
        assert pool.sources == ("One sentence.", "Another one.")

    def test_blank_line_rejected(self, tmp_path):
        path = tmp_path / "pool.txt"
        path.write_text("One.\n   \nTwo.\n", encoding="utf-8")
        with pytest.raises(EmptyField, match=":2:"):
            load_source_pool(path, LangPair.EN_PT)


def test_lang_pair_parse():
    assert LangPair.parse("en-ko") is LangPair.EN_KO
    assert LangPair.parse("EN-RU") is LangPair.EN_RU
    with pytest.raises(ValueError):
        LangPair.parse("en-fr")
