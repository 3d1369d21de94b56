"""Ground-truth corpus manifest loading and golden-transcript consistency checks.

The corpus is the pipeline's oracle: a manifest of known gadgets per
fixture, frozen golden transcripts, and expected report/score outputs.
verify_corpus cross-checks every manifest claim against the goldens so a
drifted golden or a stale manifest is caught before it silently skews
scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .runner import Mode, RunOutcome, RuntimeProfile, classify_termination, replay
from .reporter import match_outcomes
from .taint import TAINT_MARKER

ATTACK_TYPES = (
    "ACE",
    "SSRF",
    "Privilege Escalation",
    "Cryptographic Downgrade",
    "Path Traversal",
    "Unauthorized Modifications",
    "Log Pollution",
    "DoS",
)


class ManifestError(ValueError):
    """The manifest violates its schema; message names fixture and field."""


@dataclass(frozen=True)
class GroundTruth:
    properties: tuple[str, ...]
    sink: str
    attack_type: str


@dataclass(frozen=True)
class Fixture:
    name: str
    test: str
    api: str
    ground_truth: tuple[GroundTruth, ...] = ()
    expected_terminations: tuple[str, ...] = ()
    expected_noise_sinks: tuple[str, ...] = ()
    expected_orphans: int = 0


@dataclass
class CorpusManifest:
    fixtures: list[Fixture] = field(default_factory=list)

    def truth_triples(self) -> list[tuple[str, str, str]]:
        """All (property, api, sink) ground-truth triples."""
        return [
            (prop, fx.api, gt.sink)
            for fx in self.fixtures
            for gt in fx.ground_truth
            for prop in gt.properties
        ]

    def fixture(self, name: str) -> Fixture:
        for fx in self.fixtures:
            if fx.name == name:
                return fx
        raise KeyError(name)


def load_manifest(path: Path | str) -> CorpusManifest:
    """Load and validate the corpus manifest; violations name the fixture
    and field they concern."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot load manifest {path}: {exc}") from exc

    fixtures: list[Fixture] = []
    seen: set[str] = set()
    for entry in raw.get("fixtures", []):
        name = entry.get("name")
        if not name:
            raise ManifestError("fixture without a name")
        if name in seen:
            raise ManifestError(f"duplicate fixture name {name!r}")
        seen.add(name)
        for fld in ("test", "api"):
            if not entry.get(fld):
                raise ManifestError(f"fixture {name!r}: missing field {fld!r}")
        truths = []
        for gt in entry.get("ground_truth", []):
            attack = gt.get("attack_type")
            if attack not in ATTACK_TYPES:
                raise ManifestError(
                    f"fixture {name!r}: unknown attack_type {attack!r}; "
                    f"allowed: {', '.join(ATTACK_TYPES)}"
                )
            if not gt.get("properties") or not gt.get("sink"):
                raise ManifestError(f"fixture {name!r}: ground_truth needs properties and sink")
            truths.append(GroundTruth(tuple(gt["properties"]), gt["sink"], attack))
        fixtures.append(
            Fixture(
                name=name,
                test=entry["test"],
                api=entry["api"],
                ground_truth=tuple(truths),
                expected_terminations=tuple(entry.get("expected_terminations", [])),
                expected_noise_sinks=tuple(entry.get("expected_noise_sinks", [])),
                expected_orphans=entry.get("expected_orphans", 0),
            )
        )
    return CorpusManifest(fixtures)


@dataclass
class ConsistencyReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)


def _fixture_outcomes(golden_root: Path, fx: Fixture) -> list[RunOutcome]:
    fdir = golden_root / fx.name
    if not fdir.is_dir():
        return []
    outcomes, errors = replay(fdir)
    return outcomes if not errors else outcomes


def verify_corpus(
    manifest: CorpusManifest,
    golden_root: Path | str,
    profile: RuntimeProfile,
    fixtures_root: Path | str | None = None,
) -> ConsistencyReport:
    """Check every manifest claim against the golden transcripts.

    Verified per fixture: goldens exist, every ground-truth sink shows up
    in a recorded sink/eval hit, declared terminations are reproduced by
    classification, orphan counts match, and the taint marker never occurs
    in the fixture program itself (it must only ever enter via pollution).
    """
    report = ConsistencyReport()
    golden_root = Path(golden_root)
    for fx in manifest.fixtures:
        outcomes = _fixture_outcomes(golden_root, fx)
        if not outcomes:
            report.add(f"{fx.name}: no golden transcripts under {golden_root / fx.name}")
            continue

        pairs, orphans = match_outcomes(outcomes)
        seen_sinks = {p.sink.sink_name for p in pairs}
        term_verdicts = {
            classify_termination(o, profile).verdict.value
            for o in outcomes
            if o.plan.mode is Mode.CRASH
        }
        for gt in fx.ground_truth:
            if gt.sink.startswith("termination:"):
                if gt.sink.removeprefix("termination:") not in term_verdicts:
                    report.add(f"{fx.name}: declared termination sink {gt.sink!r} not reproduced")
            elif gt.sink not in seen_sinks:
                report.add(f"{fx.name}: ground-truth sink {gt.sink!r} missing from golden sink hits")
        for verdict in fx.expected_terminations:
            if verdict not in term_verdicts:
                report.add(f"{fx.name}: expected termination {verdict!r} not reproduced "
                           f"(saw {sorted(term_verdicts)})")
        for noise in fx.expected_noise_sinks:
            if noise not in seen_sinks:
                report.add(f"{fx.name}: declared noise sink {noise!r} never observed")
        if len(orphans) != fx.expected_orphans:
            report.add(f"{fx.name}: {len(orphans)} orphans recorded, manifest declares "
                       f"{fx.expected_orphans}")

        if fixtures_root is not None:
            src = Path(fixtures_root) / fx.test
            if not src.exists():
                report.add(f"{fx.name}: fixture program {src} missing")
            elif TAINT_MARKER in src.read_text(encoding="utf-8"):
                report.add(f"{fx.name}: taint marker appears in fixture source {src}")
    return report
