"""Deterministic SARIF 2.1.0 output for analyst triage.

One result per gadget candidate; candidates of one gadget share a
partial fingerprint so viewers co-locate them.  Orphan sinks get their
own rule.  No timestamps, fixed key order, sorted results: identical
inputs always produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__
from .reporter import Gadget, GadgetCandidate, ReportConfig
from .taint import OrphanSink, StackFrame

SARIF_SCHEMA_URI = (
    "https://raw.githubusercontent.com/oasis-tcs/sarif-spec/master/"
    "Schemata/sarif-schema-2.1.0.json"
)

RULE_FLOW = "pollution-flow"
RULE_TERMINATION = "unexpected-termination"
RULE_ORPHAN = "orphan-sink"

_RULES = [
    {
        "id": RULE_FLOW,
        "name": "PollutedPropertyReachesSink",
        "shortDescription": {"text": "A polluted property value reaches a native sink."},
    },
    {
        "id": RULE_TERMINATION,
        "name": "PollutionCausesUnexpectedTermination",
        "shortDescription": {"text": "Polluting a property makes the program terminate unexpectedly."},
    },
    {
        "id": RULE_ORPHAN,
        "name": "SinkValueWithoutSource",
        "shortDescription": {
            "text": "A marker-bearing sink value could not be matched to a recorded "
                    "property access (likely modified en route)."
        },
    },
]


def schema_path() -> Path:
    return Path(__file__).parent / "data" / "sarif-schema-2.1.0.json"


def _group_fingerprint(api: str, sink: str) -> str:
    return hashlib.sha256(f"{api}|{sink}".encode()).hexdigest()[:16]


def _location(frame: StackFrame) -> dict:
    phys: dict = {"artifactLocation": {"uri": frame.file or "unknown"}}
    if frame.line > 0:
        region: dict = {"startLine": frame.line}
        if frame.column > 0:
            region["startColumn"] = frame.column
        phys["region"] = region
    return {"physicalLocation": phys}


def _stack(label: str, frames: tuple[StackFrame, ...]) -> dict:
    return {
        "message": {"text": label},
        "frames": [
            {"location": {**_location(f), "message": {"text": f.function}}}
            for f in frames
        ],
    }


def _flow_result(cand: GadgetCandidate, cfg: ReportConfig) -> dict:
    pair = cand.flow
    src_stack = cfg.normalize_stack(pair.source.stack)
    sink_stack = cfg.normalize_stack(pair.sink.stack)
    where = f" at path {pair.sink.access_path!r}" if pair.sink.access_path else ""
    result: dict = {
        "ruleId": RULE_FLOW,
        "level": "warning",
        "message": {
            "text": (
                f"Polluted property '{cand.property}' of API '{cand.api}' reaches "
                f"sink '{cand.sink}' (argument {pair.sink.arg_index}{where}); "
                f"observed value: {cand.observed_value!r}."
            )
        },
        "locations": [_location(src_stack[0])] if src_stack else [],
        "stacks": [
            _stack("polluted property access", src_stack),
            _stack("sink call", sink_stack),
        ],
        "partialFingerprints": {"gadgetGroup/v1": _group_fingerprint(cand.api, cand.sink)},
        "properties": {
            "property": cand.property,
            "api": cand.api,
            "sink": cand.sink,
            "observedValue": cand.observed_value,
            "pollutionType": pair.source.pollution_type.value,
        },
    }
    return result


def _termination_result(cand: GadgetCandidate, cfg: ReportConfig) -> dict:
    ev = cand.termination
    return {
        "ruleId": RULE_TERMINATION,
        "level": "warning",
        "message": {
            "text": (
                f"Polluting property '{cand.property}' terminates test "
                f"'{ev.test}' unexpectedly ({ev.termination.verdict.value}): "
                f"{cfg.scrub_text(ev.termination.evidence)}"
            )
        },
        "locations": [{"physicalLocation": {"artifactLocation": {"uri": ev.test}}}],
        "partialFingerprints": {"gadgetGroup/v1": _group_fingerprint(cand.api, cand.sink)},
        "properties": {
            "property": cand.property,
            "api": cand.api,
            "sink": cand.sink,
            "verdict": ev.termination.verdict.value,
            "runId": ev.run_id,
        },
    }


def _orphan_result(orphan: OrphanSink, cfg: ReportConfig) -> dict:
    stack = cfg.normalize_stack(orphan.sink.stack)
    return {
        "ruleId": RULE_ORPHAN,
        "level": "note",
        "message": {
            "text": (
                f"Sink '{orphan.sink.sink_name}' observed marker-bearing value "
                f"{orphan.sink.observed_value!r} with no matching source "
                f"({orphan.reason.value})."
            )
        },
        "locations": [_location(stack[0])] if stack else [],
        "stacks": [_stack("sink call", stack)],
        "properties": {
            "sink": orphan.sink.sink_name,
            "observedValue": orphan.sink.observed_value,
            "reason": orphan.reason.value,
            "runId": orphan.sink.run_id,
        },
    }


def emit_sarif(
    gadgets: list[Gadget],
    orphans: list[OrphanSink],
    cfg: ReportConfig,
    tool_name: str = "ghunter",
) -> str:
    """Render the SARIF document as a deterministic JSON string."""
    results: list[dict] = []
    for gadget in gadgets:
        for cand in gadget.members:
            if cand.kind == "flow":
                results.append(_flow_result(cand, cfg))
            else:
                results.append(_termination_result(cand, cfg))
    results.sort(key=lambda r: (r["ruleId"], r["message"]["text"]))
    orphan_results = sorted(
        (_orphan_result(o, cfg) for o in orphans),
        key=lambda r: r["message"]["text"],
    )
    doc = {
        "$schema": SARIF_SCHEMA_URI,
        "version": "2.1.0",
        "runs": [
            {
                "tool": {
                    "driver": {
                        "name": tool_name,
                        "version": __version__,
                        "rules": _RULES,
                    }
                },
                "results": results + orphan_results,
                "columnKind": "utf16CodeUnits",
            }
        ],
    }
    try:
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    except (TypeError, ValueError) as exc:
        raise RuntimeError(f"SARIF serialization failed: {exc}") from exc
