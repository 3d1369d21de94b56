"""Turns raw run outcomes into deduplicated, denylisted gadget candidates.

The hunting stage produces one source/sink event stream per run; the crash
stage produces terminations.  This module matches, deduplicates, filters
and groups them into the (property, API, sink) findings an analyst triages,
and scores the result against a ground-truth manifest.  Everything here is
a pure transformation: byte-determinism of the final report depends on it.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .runner import Mode, RunOutcome, RuntimeProfile, TerminationClass, Verdict, classify_termination
from .taint import (
    EvalHit,
    FlowPair,
    OrphanSink,
    PollutionType,
    SinkHit,
    SourceAccess,
    StackFrame,
    match_flows,
    parse_frame,
)

log = logging.getLogger(__name__)

# Verdicts that count as reportable unexpected terminations.
_REPORTABLE = {Verdict.SEGFAULT, Verdict.PANIC, Verdict.OOM, Verdict.TIMEOUT, Verdict.UNEXPECTED_ERROR}

_DEFAULT_SCRUB: list[tuple[str, str]] = [
    (r"0x[0-9a-fA-F]+", "<addr>"),
    (r"(?:/[\w.\-]+)+/", "<path>/"),
    (r":\d+:\d+", ":<loc>"),
    (r"\b\d{4,}\b", "<n>"),
]


@dataclass
class ReportConfig:
    """Knobs that must be frozen for golden comparisons.

    api_paths decides API labeling: the innermost stack frame whose file
    starts with one of these prefixes names the public API; otherwise the
    test file name is used.
    """

    api_paths: list[str] = field(default_factory=list)
    strip_prefixes: list[str] = field(default_factory=list)
    collapse_absolute: bool = True
    scrub: list[tuple[str, str]] = field(default_factory=lambda: list(_DEFAULT_SCRUB))

    @classmethod
    def load(cls, path: Path | str) -> "ReportConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls()
        cfg.api_paths = raw.get("api_paths", [])
        cfg.strip_prefixes = raw.get("strip_prefixes", [])
        cfg.collapse_absolute = raw.get("collapse_absolute", True)
        if "scrub" in raw:
            cfg.scrub = [(p, r) for p, r in raw["scrub"]]
        return cfg

    def normalize_stack(self, stack: tuple[StackFrame, ...]) -> tuple[StackFrame, ...]:
        prefixes = tuple(self.strip_prefixes)
        return tuple(f.normalized(prefixes, self.collapse_absolute) for f in stack)

    def scrub_text(self, text: str) -> str:
        for pattern, repl in self.scrub:
            text = re.sub(pattern, repl, text)
        return text


@dataclass(frozen=True)
class DenyPattern:
    pattern: str
    rationale: str


@dataclass
class DenylistConfig:
    """Sink-name patterns for flows that cannot yield meaningful exploits
    (type checks, internal utils, async wrappers, error builders)."""

    patterns: list[DenyPattern] = field(default_factory=list)

    def __post_init__(self) -> None:
        for p in self.patterns:
            re.compile(p.pattern)

    @classmethod
    def load(cls, path: Path | str) -> "DenylistConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([DenyPattern(e["pattern"], e.get("rationale", "")) for e in raw])

    def match(self, sink_name: str) -> DenyPattern | None:
        for p in self.patterns:
            if re.search(p.pattern, sink_name):
                return p
        return None


def default_denylist() -> DenylistConfig:
    path = Path(__file__).parent / "data" / "denylist.json"
    return DenylistConfig.load(path)


@dataclass(frozen=True)
class TerminationEvent:
    run_id: str
    test: str
    polluted_property: str
    termination: TerminationClass


@dataclass(frozen=True)
class GadgetCandidate:
    property: str
    api: str
    sink: str
    kind: str  # "flow" | "termination"
    observed_value: str | None = None
    flow: FlowPair | None = None
    termination: TerminationEvent | None = None

    def triple(self) -> tuple[str, str, str]:
        return (self.property, self.api, self.sink)


@dataclass(frozen=True)
class Gadget:
    api: str
    sink: str
    properties: tuple[str, ...]
    members: tuple[GadgetCandidate, ...]


# --- extracting taint events from outcomes ---------------------------------


def _frames(raw: list[str]) -> tuple[StackFrame, ...]:
    return tuple(parse_frame(f) for f in raw)


def extract_events(outcome: RunOutcome) -> tuple[list[SourceAccess], list[SinkHit | EvalHit]]:
    """Lift a hunt run's log records into typed source/sink events."""
    rid = outcome.plan.run_id
    sources: list[SourceAccess] = []
    sinks: list[SinkHit | EvalHit] = []
    for rec in outcome.records:
        kind = rec.kind.value
        if kind == "SRC_ACCESS":
            sources.append(
                SourceAccess(
                    run_id=rid,
                    property=rec.payload["prop"],
                    taint_id=rec.payload["id"],
                    pollution_type=PollutionType(rec.payload["type"]),
                    stack=_frames(rec.payload["stack"]),
                )
            )
        elif kind == "SINK_HIT":
            sinks.append(
                SinkHit(
                    run_id=rid,
                    sink_name=rec.payload["sink"],
                    arg_index=rec.payload["arg"],
                    access_path=rec.payload["path"],
                    observed_value=rec.payload["value"],
                    stack=_frames(rec.payload["stack"]),
                )
            )
        elif kind == "EVAL_HIT":
            sinks.append(
                EvalHit(
                    run_id=rid,
                    observed_value=rec.payload["value"],
                    stack=_frames(rec.payload["stack"]),
                )
            )
    return sources, sinks


def match_outcomes(outcomes: list[RunOutcome]) -> tuple[list[FlowPair], list[OrphanSink]]:
    """Run per-run source/sink matching over all hunt outcomes."""
    pairs: list[FlowPair] = []
    orphans: list[OrphanSink] = []
    for outcome in outcomes:
        if outcome.plan.mode is not Mode.HUNT:
            continue
        sources, sinks = extract_events(outcome)
        p, o = match_flows(sources, sinks)
        pairs.extend(p)
        orphans.extend(o)
    return pairs, orphans


def extract_terminations(
    outcomes: list[RunOutcome],
    profile: RuntimeProfile,
    excluded_tests: set[str] | None = None,
) -> list[TerminationEvent]:
    """Reportable terminations from crash-mode runs.

    Crash runs execute with the polluter only (no wrappers), so a bad exit
    cannot be an instrumentation artifact.  Tests that already failed in
    the baseline pass are excluded.
    """
    events: list[TerminationEvent] = []
    for outcome in outcomes:
        if outcome.plan.mode is not Mode.CRASH:
            continue
        if excluded_tests and outcome.plan.test in excluded_tests:
            continue
        term = classify_termination(outcome, profile)
        if term.verdict in _REPORTABLE:
            events.append(
                TerminationEvent(
                    run_id=outcome.plan.run_id,
                    test=outcome.plan.test,
                    polluted_property=outcome.plan.polluted_property or "",
                    termination=term,
                )
            )
    return events


# --- deduplication ---------------------------------------------------------


def _stack_sig(stack: tuple[StackFrame, ...], cfg: ReportConfig) -> tuple[str, ...]:
    return tuple(f.render() for f in cfg.normalize_stack(stack))


def flow_key(pair: FlowPair, cfg: ReportConfig) -> tuple:
    """Dedup key: property + sink name + normalized sink stack, falling
    back to the source stack when the sink stack is empty.  The taint id
    is deliberately excluded: the same call site fires once per test run."""
    sig = _stack_sig(pair.sink.stack, cfg)
    if not sig:
        sig = _stack_sig(pair.source.stack, cfg)
    return (pair.source.property, pair.sink.sink_name, sig)


def dedup_flows(pairs: list[FlowPair], cfg: ReportConfig) -> list[FlowPair]:
    seen: set[tuple] = set()
    unique: list[FlowPair] = []
    for pair in pairs:
        key = flow_key(pair, cfg)
        if key not in seen:
            seen.add(key)
            unique.append(pair)
    return unique


def dedup_terminations(events: list[TerminationEvent], cfg: ReportConfig) -> list[TerminationEvent]:
    """Key: verdict + scrubbed evidence (addresses, paths and counters
    collapse so the same banner from two runs dedups)."""
    seen: set[tuple] = set()
    unique: list[TerminationEvent] = []
    for ev in events:
        key = (
            ev.termination.verdict.value,
            cfg.scrub_text(ev.termination.evidence),
        )
        if key not in seen:
            seen.add(key)
            unique.append(ev)
    return unique


# --- candidate assembly ----------------------------------------------------


def _label_api(stacks: list[tuple[StackFrame, ...]], test: str, cfg: ReportConfig) -> str:
    """Innermost frame in a configured public-API file names the API;
    the test file name is the fallback."""
    for stack in stacks:
        for frame in cfg.normalize_stack(stack):
            if any(frame.file.startswith(p) for p in cfg.api_paths):
                return frame.function
    return Path(test).stem


def termination_sink(verdict: Verdict) -> str:
    return f"termination:{verdict.value}"


def group_gadgets(candidates: list[GadgetCandidate]) -> list[Gadget]:
    """Group candidates by (api, sink) so co-pollutable properties sit together."""
    grouped: dict[tuple[str, str], list[GadgetCandidate]] = {}
    for cand in candidates:
        grouped.setdefault((cand.api, cand.sink), []).append(cand)
    return [
        Gadget(
            api=api,
            sink=sink,
            properties=tuple(sorted({m.property for m in members})),
            members=tuple(members),
        )
        for (api, sink), members in sorted(grouped.items())
    ]


def build_candidates(
    flows: list[FlowPair],
    terminations: list[TerminationEvent],
    cfg: ReportConfig,
    tests_by_run: dict[str, str] | None = None,
) -> tuple[list[GadgetCandidate], list[Gadget]]:
    """One candidate per deduplicated flow/termination, plus the gadget
    grouping over the full candidate set."""
    tests_by_run = tests_by_run or {}
    candidates: list[GadgetCandidate] = []
    for pair in flows:
        test = tests_by_run.get(pair.source.run_id, pair.source.run_id)
        api = _label_api([pair.source.stack, pair.sink.stack], test, cfg)
        candidates.append(
            GadgetCandidate(
                property=pair.source.property,
                api=api,
                sink=pair.sink.sink_name,
                kind="flow",
                observed_value=pair.sink.observed_value,
                flow=pair,
            )
        )
    for ev in terminations:
        candidates.append(
            GadgetCandidate(
                property=ev.polluted_property,
                api=Path(ev.test).stem,
                sink=termination_sink(ev.termination.verdict),
                kind="termination",
                observed_value=None,
                termination=ev,
            )
        )
    candidates.sort(key=lambda c: (c.api, c.sink, c.property, c.kind))
    return candidates, group_gadgets(candidates)


def apply_denylist(
    candidates: list[GadgetCandidate],
    config: DenylistConfig,
) -> tuple[list[GadgetCandidate], list[tuple[GadgetCandidate, DenyPattern]]]:
    """Suppress candidates whose sink matches an infrastructure pattern.

    Monotone: kept is always a subset of the input.  The first matching
    pattern wins and its rationale is reported with the suppression.
    """
    kept: list[GadgetCandidate] = []
    suppressed: list[tuple[GadgetCandidate, DenyPattern]] = []
    for cand in candidates:
        hit = config.match(cand.sink)
        if hit is None:
            kept.append(cand)
        else:
            suppressed.append((cand, hit))
            log.info("suppressed %s -> %s (%s)", cand.property, cand.sink, hit.rationale)
    return kept, suppressed


# --- whole-report pipeline -------------------------------------------------


@dataclass
class ReportResult:
    kept: list[GadgetCandidate]
    gadgets: list[Gadget]
    suppressed: list[tuple[GadgetCandidate, DenyPattern]]
    orphans: list[OrphanSink]


def generate(
    outcomes: list[RunOutcome],
    profile: RuntimeProfile,
    denylist: DenylistConfig,
    cfg: ReportConfig,
    excluded_tests: set[str] | None = None,
) -> ReportResult:
    """Full reporting pass: match, dedup, filter, group.

    Single-threaded by design; the output feeds byte-deterministic
    serialization.
    """
    pairs, orphans = match_outcomes(outcomes)
    unique_flows = dedup_flows(pairs, cfg)
    terminations = dedup_terminations(
        extract_terminations(outcomes, profile, excluded_tests), cfg
    )
    tests_by_run = {o.plan.run_id: o.plan.test for o in outcomes}
    candidates, _ = build_candidates(unique_flows, terminations, cfg, tests_by_run)
    kept, suppressed = apply_denylist(candidates, denylist)
    return ReportResult(
        kept=kept,
        gadgets=group_gadgets(kept),
        suppressed=suppressed,
        orphans=orphans,
    )


# --- scoring ---------------------------------------------------------------


@dataclass
class ScoreReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    per_gadget: list[dict]
    per_ground_truth: list[dict]

    @property
    def precision(self) -> float | None:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else None

    @property
    def recall(self) -> float | None:
        denom = self.true_positives + self.false_negatives
        return self.true_positives / denom if denom else None

    def to_json(self) -> dict:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "per_gadget": self.per_gadget,
            "per_ground_truth": self.per_ground_truth,
        }


def score(candidates: list[GadgetCandidate], truth: list[tuple[str, str, str]]) -> ScoreReport:
    """Gadget-candidate-per-property accounting against ground truth.

    ``truth`` holds (property, api, sink) triples.  A truth entry found by
    some kept candidate is a TP; kept candidates matching nothing are FPs;
    unmatched truth entries are FNs.
    """
    truth_set = set(truth)
    cand_triples = {c.triple() for c in candidates}
    tp = sorted(truth_set & cand_triples)
    fp = sorted(cand_triples - truth_set)
    fn = sorted(truth_set - cand_triples)
    per_gadget = [
        {"property": p, "api": a, "sink": s, "verdict": "tp" if (p, a, s) in truth_set else "fp"}
        for (p, a, s) in sorted(cand_triples)
    ]
    per_truth = [
        {"property": p, "api": a, "sink": s, "found": (p, a, s) in cand_triples}
        for (p, a, s) in sorted(truth_set)
    ]
    return ScoreReport(
        true_positives=len(tp),
        false_positives=len(fp),
        false_negatives=len(fn),
        per_gadget=per_gadget,
        per_ground_truth=per_truth,
    )


# --- serialization of candidates ------------------------------------------


def _frame_json(frame: StackFrame) -> dict:
    return {"function": frame.function, "file": frame.file,
            "line": frame.line, "column": frame.column}


def candidate_json(cand: GadgetCandidate, cfg: ReportConfig) -> dict:
    out: dict = {
        "kind": cand.kind,
        "property": cand.property,
        "api": cand.api,
        "sink": cand.sink,
    }
    if cand.kind == "flow":
        pair = cand.flow
        out["observed_value"] = cand.observed_value
        out["pollution_type"] = pair.source.pollution_type.value
        out["access_path"] = pair.sink.access_path
        out["arg_index"] = pair.sink.arg_index
        out["source_stack"] = [_frame_json(f) for f in cfg.normalize_stack(pair.source.stack)]
        out["sink_stack"] = [_frame_json(f) for f in cfg.normalize_stack(pair.sink.stack)]
    else:
        ev = cand.termination
        out["verdict"] = ev.termination.verdict.value
        out["evidence"] = cfg.scrub_text(ev.termination.evidence)
        out["run_id"] = ev.run_id
        out["test"] = ev.test
    return out


def candidates_document(
    kept: list[GadgetCandidate],
    gadgets: list[Gadget],
    suppressed: list[tuple[GadgetCandidate, DenyPattern]],
    orphans: list[OrphanSink],
    cfg: ReportConfig,
) -> dict:
    """The candidates.json payload: everything the analyst triages, in a
    deterministic order."""
    return {
        "candidates": [candidate_json(c, cfg) for c in kept],
        "gadgets": [
            {
                "api": g.api,
                "sink": g.sink,
                "properties": list(g.properties),
                "members": [m.property for m in g.members],
            }
            for g in gadgets
        ],
        "suppressed": [
            {
                "property": c.property,
                "api": c.api,
                "sink": c.sink,
                "pattern": p.pattern,
                "rationale": p.rationale,
            }
            for c, p in suppressed
        ],
        "orphans": [
            {
                "reason": o.reason.value,
                "sink": o.sink.sink_name,
                "observed_value": o.sink.observed_value,
                "run_id": o.sink.run_id,
                "stack": [_frame_json(f) for f in cfg.normalize_stack(o.sink.stack)],
            }
            for o in sorted(
                orphans,
                key=lambda o: (o.sink.run_id, o.sink.sink_name, o.sink.observed_value),
            )
        ],
    }
