import gzip
import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polycurate.corpus import (
    Document,
    LanguageKey,
    MalformedLanguageKey,
    RecordParseError,
    documents_to_bytes,
    parse_language_key,
    read_documents,
    write_documents,
)


class TestLanguageKey:
    def test_parse_arabic(self):
        key = parse_language_key("arb_Arab")
        assert (key.lang, key.script) == ("arb", "Arab")
        assert str(key) == "arb_Arab"

    def test_parse_swahili(self):
        assert parse_language_key("swh_Latn") == LanguageKey("swh", "Latn")

    @pytest.mark.parametrize(
        "bad", ["ARB_arab", "ar_Arab", "arb_arab", "arb-Arab", "", "arb_Arabic"]
    )
    def test_malformed(self, bad):
        with pytest.raises(MalformedLanguageKey):
            parse_language_key(bad)

    @given(st.text(max_size=12))
    def test_parse_never_crashes_unexpectedly(self, s):
        try:
            key = parse_language_key(s)
        except MalformedLanguageKey:
            return
        assert str(key) == s


def _docs(n=3):
    return [
        Document(
            id=f"d{i}",
            url=f"https://example.com/{i}",
            text=f"text {i} with émojis 🎉 and ‏RTL‎ and\nnewlines",
        )
        for i in range(n)
    ]


class TestRoundTrip:
    def test_two_lines_in_order(self):
        data = documents_to_bytes(_docs(2))
        out = list(read_documents(io.BytesIO(data)))
        assert [d.id for d in out] == ["d0", "d1"]

    def test_empty_stream(self):
        assert list(read_documents(io.BytesIO(b""))) == []

    def test_deterministic_serialization(self):
        docs = _docs(100)
        assert documents_to_bytes(docs) == documents_to_bytes(docs)

    def test_round_trip_identity_second_serialization(self):
        first = documents_to_bytes(_docs(100))
        second = documents_to_bytes(read_documents(io.BytesIO(first)))
        assert first == second

    def test_all_optional_fields_survive(self):
        doc = Document(
            id="x",
            url="https://example.org",
            text="hello",
            language=LanguageKey("fra", "Latn"),
            lid_confidence=0.97,
            cluster_size=4,
            filter_verdicts={"word_count_min": True},
            weight=3,
        )
        (back,) = read_documents(io.BytesIO(documents_to_bytes([doc])))
        assert back.language == doc.language
        assert back.lid_confidence == doc.lid_confidence
        assert back.cluster_size == doc.cluster_size
        assert back.filter_verdicts == doc.filter_verdicts
        assert back.weight == doc.weight

    def test_unknown_fields_preserved(self):
        line = json.dumps(
            {"id": "a", "url": "", "text": "t", "crawl_date": "2024-01-01"}
        ).encode()
        (doc,) = read_documents(io.BytesIO(line + b"\n"))
        assert doc.extra == {"crawl_date": "2024-01-01"}
        assert b"crawl_date" in documents_to_bytes([doc])

    def test_missing_id_derived_deterministically(self):
        line = json.dumps({"url": "u", "text": "t"}).encode() + b"\n"
        (a,) = read_documents(io.BytesIO(line))
        (b,) = read_documents(io.BytesIO(line))
        assert a.id == b.id and a.id

    def test_stats_counts(self):
        sink = io.BytesIO()
        stats = write_documents(_docs(5), sink)
        assert stats.document_count == 5
        assert stats.byte_count == len(sink.getvalue())
        assert sink.getvalue().count(b"\n") == 5

    def test_empty_input_zero_stats(self):
        stats = write_documents([], io.BytesIO())
        assert stats.document_count == 0
        assert stats.byte_count == 0


class TestErrorHandling:
    CORRUPT = b'{"id":"ok","url":"","text":"fine"}\nnot json at all\n'

    def test_strict_raises_with_line_number(self):
        with pytest.raises(RecordParseError) as e:
            list(read_documents(io.BytesIO(self.CORRUPT)))
        assert e.value.line_number == 2

    def test_lenient_counts_errors(self):
        counter = [0]
        docs = list(
            read_documents(io.BytesIO(self.CORRUPT), strict=False, error_counter=counter)
        )
        assert len(docs) == 1
        assert counter[0] == 1

    def test_invalid_cluster_size(self):
        with pytest.raises(ValueError):
            Document(id="x", cluster_size=0)


def test_gzip_transparent(tmp_path):
    path = str(tmp_path / "corpus.jsonl.gz")
    docs = _docs(3)
    write_documents(docs, path)
    with gzip.open(path, "rb") as f:
        assert f.read().count(b"\n") == 3
    assert [d.id for d in read_documents(path)] == ["d0", "d1", "d2"]
