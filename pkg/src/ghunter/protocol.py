"""Line-oriented wire format between the in-runtime agent and the orchestrator.

One record per line::

    GH1<TAB>KIND<TAB>{...single-line JSON payload...}

The agent appends each line with a single synchronous write so records
survive an immediately following crash.  Anything else found in the file
(test stdout noise, truncated tails) is skipped and tallied, never fatal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

PROTOCOL_TAG = "GH1"

_POLLUTION_WIRE_TYPES = ("string", "object", "forin")


class Kind(Enum):
    UNDEF_PROP = "UNDEF_PROP"
    SRC_ACCESS = "SRC_ACCESS"
    SINK_HIT = "SINK_HIT"
    EVAL_HIT = "EVAL_HIT"
    AGENT_ERR = "AGENT_ERR"


class Skip(Enum):
    """Why a line was not parsed into a record."""

    NOT_PROTOCOL = "not_protocol"
    UNKNOWN_KIND = "unknown_kind"
    MALFORMED = "malformed"


class ProtocolError(ValueError):
    """A record violates its kind's payload schema (serialization side)."""


@dataclass(frozen=True)
class LogRecord:
    kind: Kind
    payload: dict


@dataclass
class ParseStats:
    records: int = 0
    not_protocol: int = 0
    unknown_kind: int = 0
    malformed: int = 0

    def count(self, verdict: Skip) -> None:
        if verdict is Skip.NOT_PROTOCOL:
            self.not_protocol += 1
        elif verdict is Skip.UNKNOWN_KIND:
            self.unknown_kind += 1
        else:
            self.malformed += 1


def _is_frame_list(v: object) -> bool:
    return isinstance(v, list) and all(isinstance(f, str) for f in v)


def _is_text(v: object) -> bool:
    return isinstance(v, str)


def _is_count(v: object) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _is_wire_type(v: object) -> bool:
    return v in _POLLUTION_WIRE_TYPES


# Payload schema per kind; tuple order fixes the serialized key order.
_SCHEMAS: dict[Kind, tuple[tuple[str, object], ...]] = {
    Kind.UNDEF_PROP: (("prop", _is_text),),
    Kind.SRC_ACCESS: (
        ("prop", _is_text),
        ("id", _is_count),
        ("type", _is_wire_type),
        ("stack", _is_frame_list),
    ),
    Kind.SINK_HIT: (
        ("sink", _is_text),
        ("arg", _is_count),
        ("path", _is_text),
        ("value", _is_text),
        ("stack", _is_frame_list),
    ),
    Kind.EVAL_HIT: (
        ("value", _is_text),
        ("stack", _is_frame_list),
    ),
    Kind.AGENT_ERR: (("msg", _is_text),),
}


def _check_payload(kind: Kind, payload: dict) -> str | None:
    schema = _SCHEMAS[kind]
    expected = {name for name, _ in schema}
    if set(payload) != expected:
        return f"{kind.value} payload keys {sorted(payload)} != {sorted(expected)}"
    for name, check in schema:
        if not check(payload[name]):
            return f"{kind.value} field {name!r} has invalid value {payload[name]!r}"
    return None


def serialize_record(record: LogRecord) -> str:
    """Render one record as a single protocol line (no trailing newline).

    Raises ProtocolError when the payload does not match the kind's schema.
    """
    problem = _check_payload(record.kind, record.payload)
    if problem is not None:
        raise ProtocolError(problem)
    ordered = {name: record.payload[name] for name, _ in _SCHEMAS[record.kind]}
    body = json.dumps(ordered, ensure_ascii=False, separators=(",", ":"))
    return f"{PROTOCOL_TAG}\t{record.kind.value}\t{body}"


def parse_record(line: str) -> LogRecord | Skip:
    """Parse one line; anything unparseable yields a skip verdict, never an error."""
    if not line.startswith(PROTOCOL_TAG + "\t"):
        return Skip.NOT_PROTOCOL
    parts = line.split("\t", 2)
    if len(parts) != 3:
        return Skip.MALFORMED
    _, kind_name, body = parts
    try:
        kind = Kind(kind_name)
    except ValueError:
        return Skip.UNKNOWN_KIND
    try:
        payload = json.loads(body)
    except json.JSONDecodeError:
        return Skip.MALFORMED
    if not isinstance(payload, dict) or _check_payload(kind, payload) is not None:
        return Skip.MALFORMED
    return LogRecord(kind, payload)


def read_log(path: Path | str) -> tuple[list[LogRecord], ParseStats]:
    """Read a whole agent log, in file order, tolerating noise and truncation.

    A missing file reads as empty: a crashed child may never have opened
    its log.  An unreadable (but present) file raises OSError with path
    context.
    """
    path = Path(path)
    stats = ParseStats()
    records: list[LogRecord] = []
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except FileNotFoundError:
        return records, stats
    except OSError as exc:
        raise OSError(f"cannot read agent log {path}: {exc}") from exc
    # Split on LF only: JSON leaves Unicode line separators (U+0085,
    # U+2028...) unescaped inside payload strings, and splitlines() would
    # break a record apart on them.
    for line in text.split("\n"):
        if not line:
            continue
        parsed = parse_record(line)
        if isinstance(parsed, LogRecord):
            records.append(parsed)
            stats.records += 1
        else:
            stats.count(parsed)
    return records, stats


def write_log(path: Path | str, records: list[LogRecord]) -> None:
    """Write records as a complete log file (used for fixtures and replay tests)."""
    text = "".join(serialize_record(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")
