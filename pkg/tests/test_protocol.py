"""Unit and property tests for the GH1 line protocol."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from ghunter.protocol import (
    PROTOCOL_TAG,
    Kind,
    LogRecord,
    ProtocolError,
    Skip,
    parse_record,
    read_log,
    serialize_record,
    write_log,
)

frame_lists = st.lists(st.text(max_size=60), max_size=4)
texts = st.text(max_size=80)
counts = st.integers(min_value=0, max_value=10**6)
wire_types = st.sampled_from(["string", "object", "forin"])

payloads_by_kind = {
    Kind.UNDEF_PROP: st.fixed_dictionaries({"prop": texts}),
    Kind.SRC_ACCESS: st.fixed_dictionaries(
        {"prop": texts, "id": counts, "type": wire_types, "stack": frame_lists}
    ),
    Kind.SINK_HIT: st.fixed_dictionaries(
        {"sink": texts, "arg": counts, "path": texts, "value": texts, "stack": frame_lists}
    ),
    Kind.EVAL_HIT: st.fixed_dictionaries({"value": texts, "stack": frame_lists}),
    Kind.AGENT_ERR: st.fixed_dictionaries({"msg": texts}),
}

records = st.sampled_from(list(Kind)).flatmap(
    lambda k: payloads_by_kind[k].map(lambda p: LogRecord(k, p))
)


class TestSerialize:
    def test_undef_prop_exact_line(self):
        line = serialize_record(LogRecord(Kind.UNDEF_PROP, {"prop": "method"}))
        assert line == 'GH1\tUNDEF_PROP\t{"prop":"method"}'

    def test_fixed_key_order(self):
        payload = {"stack": [], "type": "string", "id": 0, "prop": "x"}
        line = serialize_record(LogRecord(Kind.SRC_ACCESS, payload))
        body = line.split("\t", 2)[2]
        assert body == '{"prop":"x","id":0,"type":"string","stack":[]}'

    def test_schema_mismatch_raises(self):
        with pytest.raises(ProtocolError):
            serialize_record(LogRecord(Kind.UNDEF_PROP, {"prop": 3}))
        with pytest.raises(ProtocolError):
            serialize_record(LogRecord(Kind.UNDEF_PROP, {"property": "x"}))

    @given(records)
    def test_exactly_two_raw_tabs(self, record):
        line = serialize_record(record)
        assert line.count("\t") == 2
        assert "\n" not in line

    @given(records)
    @settings(max_examples=300)
    def test_roundtrip(self, record):
        assert parse_record(serialize_record(record)) == record


class TestParse:
    def test_noise_line(self):
        assert parse_record("hello world") is Skip.NOT_PROTOCOL

    def test_unknown_kind(self):
        assert parse_record("GH1\tFUTURE_KIND\t{}") is Skip.UNKNOWN_KIND

    def test_malformed_json(self):
        assert parse_record("GH1\tUNDEF_PROP\t{nope") is Skip.MALFORMED

    def test_malformed_schema(self):
        assert parse_record('GH1\tUNDEF_PROP\t{"prop":5}') is Skip.MALFORMED
        assert parse_record('GH1\tUNDEF_PROP\t{"prop":"x","extra":1}') is Skip.MALFORMED

    def test_missing_body(self):
        assert parse_record("GH1\tUNDEF_PROP") is Skip.MALFORMED

    def test_tag_without_tab_is_noise(self):
        assert parse_record("GH1 UNDEF_PROP {}") is Skip.NOT_PROTOCOL

    def test_payload_not_object(self):
        assert parse_record("GH1\tAGENT_ERR\t[1,2]") is Skip.MALFORMED

    @given(st.text(max_size=120))
    def test_total_no_exceptions(self, line):
        out = parse_record(line)
        assert isinstance(out, (LogRecord, Skip))


class TestReadLog:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "agent.log"
        p.write_text("")
        recs, stats = read_log(p)
        assert recs == [] and stats.records == 0 and stats.not_protocol == 0

    def test_missing_file(self, tmp_path):
        recs, stats = read_log(tmp_path / "never-created.log")
        assert recs == [] and stats.records == 0

    def test_records_with_noise(self, tmp_path):
        p = tmp_path / "agent.log"
        lines = [
            serialize_record(LogRecord(Kind.UNDEF_PROP, {"prop": "a"})),
            "test output noise",
            serialize_record(LogRecord(Kind.AGENT_ERR, {"msg": "oops"})),
        ]
        p.write_text("\n".join(lines) + "\n")
        recs, stats = read_log(p)
        assert len(recs) == 2
        assert stats.not_protocol == 1

    def test_truncated_tail(self, tmp_path):
        p = tmp_path / "agent.log"
        good = serialize_record(LogRecord(Kind.UNDEF_PROP, {"prop": "a"}))
        p.write_text(good + "\n" + "GH1\tSINK_HIT\t{\"sink\":\"x")
        recs, stats = read_log(p)
        assert len(recs) == 1
        assert stats.malformed == 1

    def test_write_then_read(self, tmp_path):
        p = tmp_path / "agent.log"
        wanted = [
            LogRecord(Kind.SRC_ACCESS, {"prop": "shell", "id": 0, "type": "string", "stack": []}),
            LogRecord(Kind.SINK_HIT, {"sink": "op_spawn", "arg": 1, "path": "",
                                      "value": "0xEFFACED0", "stack": []}),
        ]
        write_log(p, wanted)
        recs, stats = read_log(p)
        assert recs == wanted and stats.records == 2

    @given(recs=st.lists(records, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_prefix_safety(self, tmp_path_factory, recs):
        """Truncating a log at any byte offset preserves all fully-written
        prior records."""
        tmp = tmp_path_factory.mktemp("logs")
        full = "".join(serialize_record(r) + "\n" for r in recs)
        data = full.encode("utf-8")
        p = tmp / "a.log"
        # Check a spread of offsets (every offset is exercised exhaustively
        # in the acceptance suite on the golden log).
        for cut in range(0, len(data) + 1, max(1, len(data) // 17)):
            p.write_bytes(data[:cut])
            got, _ = read_log(p)
            n_complete = data[:cut].count(b"\n")
            # All fully-written records survive; the tail fragment parses
            # only if the cut landed exactly at a line end.
            assert got[:n_complete] == recs[:n_complete]
            assert got == recs[: len(got)]
            assert len(got) <= n_complete + 1


def test_protocol_tag_is_stable():
    assert PROTOCOL_TAG == "GH1"
