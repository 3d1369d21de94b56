"""Taint values, taint-event records, and source/sink matching.

The in-process agent mints marker strings at every polluted property
access and the sink wrappers report any argument containing the marker.
This module owns the marker format and the pure matching step that turns
per-run source and sink observations into flow pairs and orphans.  No
taint propagation happens here; propagation is the agent's job.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

# Marker chosen so it survives hex-number coercion and never occurs in
# legitimate corpus data (enforced by the corpus consistency check).
TAINT_MARKER = "0xEFFACED"

# Reserved property polluted by for-in probe runs.
FORIN_SENTINEL = "__ghunter_forin__"

_TAINT_RE = re.compile(re.escape(TAINT_MARKER) + r"(\d+)")

_FRAME_RE = re.compile(
    r"^\s*at\s+(?:(?P<func>.+?)\s+\()?(?P<file>[^()]+?):(?P<line>\d+):(?P<col>\d+)\)?\s*$"
)


class PollutionType(Enum):
    STRING = "string"
    OBJECT = "object"
    FORIN_PROBE = "forin"


class OrphanReason(Enum):
    NO_MATCHING_SOURCE = "no_matching_source"
    UNPARSABLE_ID = "unparsable_id"


@dataclass(frozen=True)
class StackFrame:
    """One call-stack frame as reported by the agent."""

    function: str
    file: str
    line: int = 0
    column: int = 0

    def normalized(self, strip_prefixes: tuple[str, ...] = (),
                   collapse_absolute: bool = False) -> "StackFrame":
        """Strip machine-specific path prefixes so traces compare equal
        across checkouts."""
        path = self.file
        for prefix in strip_prefixes:
            if path.startswith(prefix):
                path = path[len(prefix):].lstrip("/")
                break
        else:
            if collapse_absolute and path.startswith("/"):
                path = path.rsplit("/", 1)[-1]
        return StackFrame(self.function, path, self.line, self.column)

    def render(self) -> str:
        return f"{self.function}@{self.file}:{self.line}:{self.column}"


def parse_frame(text: str) -> StackFrame:
    """Parse one pre-rendered V8-style frame string.

    Unrecognized frame text is preserved verbatim as the file field so
    nothing is silently dropped from analyst-facing traces.
    """
    m = _FRAME_RE.match(text)
    if m is None:
        return StackFrame(function="", file=text.strip(), line=0, column=0)
    return StackFrame(
        function=m.group("func") or "<anonymous>",
        file=m.group("file"),
        line=int(m.group("line")),
        column=int(m.group("col")),
    )


@dataclass(frozen=True)
class SourceAccess:
    """One polluted-property read observed by the agent."""

    run_id: str
    property: str
    taint_id: int
    pollution_type: PollutionType
    stack: tuple[StackFrame, ...] = ()


@dataclass(frozen=True)
class SinkHit:
    """A marker-bearing value observed at a wrapped native sink."""

    run_id: str
    sink_name: str
    arg_index: int
    access_path: str
    observed_value: str
    stack: tuple[StackFrame, ...] = ()

    @property
    def taint_id(self) -> int | None:
        return parse_taint(self.observed_value)


@dataclass(frozen=True)
class EvalHit:
    """A marker-bearing code string observed at a function-from-string sink."""

    run_id: str
    observed_value: str
    stack: tuple[StackFrame, ...] = ()

    # All function-from-string interceptions report under one sink name.
    sink_name: str = field(default="function_from_string", init=False)
    arg_index: int = field(default=0, init=False)
    access_path: str = field(default="", init=False)

    @property
    def taint_id(self) -> int | None:
        return parse_taint(self.observed_value)


@dataclass(frozen=True)
class FlowPair:
    source: SourceAccess
    sink: SinkHit | EvalHit


@dataclass(frozen=True)
class OrphanSink:
    sink: SinkHit | EvalHit
    reason: OrphanReason


def mint_taint(index: int) -> str:
    """Render taint value number ``index`` (marker + decimal index)."""
    return f"{TAINT_MARKER}{index}"


def parse_taint(value: str) -> int | None:
    """Recover the taint id from a value containing a minted marker.

    Returns the integer after the first digit-followed marker occurrence,
    or None when the marker is absent or not followed by a digit.  A value
    carrying several taints resolves to the first; the raw value stays
    available to the analyst on the sink record.
    """
    m = _TAINT_RE.search(value)
    return int(m.group(1)) if m else None


def _stack_key(stack: tuple[StackFrame, ...]) -> tuple[str, ...]:
    return tuple(f.render() for f in stack)


def match_flows(
    sources: list[SourceAccess],
    sinks: list[SinkHit | EvalHit],
) -> tuple[list[FlowPair], list[OrphanSink]]:
    """Pair sink observations with the source access that minted their value.

    Sources that never reach a sink are dropped.  Sinks whose value has no
    parsable id, or an id no source minted, are returned as orphans for
    separate reporting.  Output order is deterministic (sink stack, then
    taint id) regardless of input order.

    Raises ValueError if the records mix run ids; matching is per-run.
    """
    run_ids = {s.run_id for s in sources} | {s.run_id for s in sinks}
    if len(run_ids) > 1:
        raise ValueError(f"match_flows called with mixed run ids: {sorted(run_ids)}")

    by_id: dict[int, SourceAccess] = {}
    for src in sources:
        by_id.setdefault(src.taint_id, src)

    pairs: list[FlowPair] = []
    orphans: list[OrphanSink] = []
    for sink in sinks:
        tid = sink.taint_id
        if tid is None:
            orphans.append(OrphanSink(sink, OrphanReason.UNPARSABLE_ID))
        elif tid in by_id:
            pairs.append(FlowPair(by_id[tid], sink))
        else:
            orphans.append(OrphanSink(sink, OrphanReason.NO_MATCHING_SOURCE))

    pairs.sort(key=lambda p: (_stack_key(p.sink.stack), p.sink.taint_id))
    orphans.sort(key=lambda o: (_stack_key(o.sink.stack), o.sink.taint_id or -1,
                                o.sink.observed_value))
    return pairs, orphans
