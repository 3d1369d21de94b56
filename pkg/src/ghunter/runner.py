"""Test discovery, pollution-run planning, parallel execution, and replay.

A stage turns a set of test files into subprocess runs: one per test for
collection/baseline, one per (property x pollution type) for hunting and
crash probing.  Every run gets an isolated temp dir, its own agent log,
and a transcript directory on disk; replay reconstructs outcomes from
transcripts without launching anything, so the whole reporting side can
be exercised against frozen golden data.
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .protocol import LogRecord, read_log
from .taint import FORIN_SENTINEL, PollutionType

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 20.0

TEST_PLACEHOLDER = "{test}"

_SEGFAULT_SIGNALS = {signal.SIGSEGV, signal.SIGBUS}
_PANIC_SIGNALS = {signal.SIGABRT, signal.SIGILL, signal.SIGFPE, signal.SIGTRAP}


class ConfigurationError(RuntimeError):
    """A stage cannot run at all (bad profile, missing binary)."""


class Mode(Enum):
    COLLECT = "collect"
    HUNT = "hunt"
    CRASH = "crash"
    BASELINE = "baseline"


class Verdict(Enum):
    CLEAN = "clean"
    EXPECTED_FAILURE = "expected_failure"
    SEGFAULT = "segfault"
    PANIC = "panic"
    OOM = "oom"
    TIMEOUT = "timeout"
    UNEXPECTED_ERROR = "unexpected_error"


@dataclass(frozen=True)
class TerminationClass:
    verdict: Verdict
    evidence: str


@dataclass
class RuntimeProfile:
    """How to launch one test file and read its corpse.

    Crash banners differ across runtimes and versions, so segfault/panic/OOM
    patterns are configuration, not code; signal-coded exits are recognized
    directly.
    """

    name: str
    command: list[str]
    expected_failure: list[str] = field(default_factory=list)
    crash_patterns: dict[str, list[str]] = field(default_factory=dict)
    env_passthrough: list[str] = field(default_factory=lambda: ["PATH", "HOME", "LANG"])

    def __post_init__(self) -> None:
        holes = sum(arg.count(TEST_PLACEHOLDER) for arg in self.command)
        if holes != 1:
            raise ConfigurationError(
                f"profile {self.name!r}: command must contain {TEST_PLACEHOLDER} exactly once"
            )
        for pats in (self.expected_failure, *self.crash_patterns.values()):
            for pat in pats:
                re.compile(pat)

    @classmethod
    def load(cls, path: Path | str) -> "RuntimeProfile":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load runtime profile {path}: {exc}") from exc
        return cls(
            name=raw.get("name", Path(path).stem),
            command=raw["command"],
            expected_failure=raw.get("expected_failure", []),
            crash_patterns=raw.get("crash_patterns", {}),
            env_passthrough=raw.get("env_passthrough", ["PATH", "HOME", "LANG"]),
        )


@dataclass(frozen=True)
class RunPlan:
    run_id: str
    test: str
    mode: Mode
    polluted_property: str | None = None
    pollution_type: PollutionType | None = None
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        polluting = self.mode in (Mode.HUNT, Mode.CRASH)
        if polluting and (self.polluted_property is None or self.pollution_type is None):
            raise ValueError(f"{self.mode.value} plan {self.run_id} needs a polluted property")
        if not polluting and self.polluted_property is not None:
            raise ValueError(f"{self.mode.value} plan {self.run_id} must not pollute")

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "test": self.test,
            "mode": self.mode.value,
            "polluted_property": self.polluted_property,
            "pollution_type": self.pollution_type.value if self.pollution_type else None,
            "timeout": self.timeout,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "RunPlan":
        return cls(
            run_id=raw["run_id"],
            test=raw["test"],
            mode=Mode(raw["mode"]),
            polluted_property=raw.get("polluted_property"),
            pollution_type=PollutionType(raw["pollution_type"]) if raw.get("pollution_type") else None,
            timeout=raw.get("timeout", DEFAULT_TIMEOUT),
        )


@dataclass
class RunOutcome:
    plan: RunPlan
    exit_code: int
    timed_out: bool
    duration: float
    stdout: str
    stderr: str
    records: list[LogRecord] = field(default_factory=list)


def discover_tests(root: Path | str, include: list[str], exclude: list[str] | None = None) -> list[Path]:
    """Resolve include/exclude globs under ``root`` into a sorted file list.

    Excludes win over includes; overlapping globs never yield duplicates.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"test root {root} does not exist")
    found: set[Path] = set()
    for pattern in include:
        found.update(p for p in root.glob(pattern) if p.is_file())
    for pattern in exclude or []:
        found.difference_update(root.glob(pattern))
    tests = sorted(found)
    if not tests:
        log.warning("no tests matched %s under %s", include, root)
    return tests


_SHEBANG_RE = re.compile(r"^#!.*$")
_DIRECTIVE_RE = re.compile(r"""^\s*(["'])use [^"']*\1\s*;?\s*$""")
_LINE_COMMENT_RE = re.compile(r"^\s*//")
_BLOCK_COMMENT_RE = re.compile(r"^\s*/\*.*?\*/\s*$")


def inject(source: str, snippet: str) -> str:
    """Insert the agent snippet as early as legally possible.

    The snippet goes after (in order) a shebang, any directive prologue
    (so strict-mode semantics are preserved), and any leading comment
    block carrying runner flags; everything after the insertion point is
    byte-identical to the original.
    """
    lines = source.splitlines(keepends=True)
    i = 0
    if i < len(lines) and _SHEBANG_RE.match(lines[i].rstrip("\n")):
        i += 1
    while i < len(lines) and _DIRECTIVE_RE.match(lines[i]):
        i += 1
    # A leading comment block is only skipped when it carries runner flags;
    # ordinary header comments stay below the snippet.
    j = i
    while j < len(lines) and (_LINE_COMMENT_RE.match(lines[j]) or _BLOCK_COMMENT_RE.match(lines[j])):
        j += 1
    if j > i and "Flags:" in "".join(lines[i:j]):
        i = j
    prefix = "".join(lines[:i])
    rest = "".join(lines[i:])
    if snippet and not snippet.endswith("\n"):
        snippet += "\n"
    return prefix + snippet + rest


def _sanitize(name: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", name)
    return safe or "_"


def plan_stage2(
    test: Path | str,
    undef_props: set[str],
    types: set[PollutionType],
    forin_probe: bool,
    mode: Mode = Mode.HUNT,
    timeout: float = DEFAULT_TIMEOUT,
) -> list[RunPlan]:
    """One pollution plan per (property x type), plus one for-in probe run.

    Deterministic order: property lexicographic, then type; the probe run
    comes last.  The probe is planned whenever enabled, even for tests
    with no collected properties, since for-in gadgets are exactly the
    ones stage 1 cannot observe.
    """
    test = str(test)
    stem = Path(test).stem
    plain_types = sorted(
        (t for t in types if t is not PollutionType.FORIN_PROBE), key=lambda t: t.value
    )
    plans = [
        RunPlan(
            run_id=f"{stem}--{mode.value}--{_sanitize(prop)}--{ptype.value}",
            test=test,
            mode=mode,
            polluted_property=prop,
            pollution_type=ptype,
            timeout=timeout,
        )
        for prop in sorted(undef_props)
        for ptype in plain_types
    ]
    if forin_probe:
        plans.append(
            RunPlan(
                run_id=f"{stem}--{mode.value}--forin-probe",
                test=test,
                mode=mode,
                polluted_property=FORIN_SENTINEL,
                pollution_type=PollutionType.FORIN_PROBE,
                timeout=timeout,
            )
        )
    return plans


def execute(
    plan: RunPlan,
    profile: RuntimeProfile,
    workdir: Path | str,
    snippet: str | None = None,
    suppress_props: list[str] | None = None,
) -> RunOutcome:
    """Run one plan in an isolated subprocess and capture everything.

    The instrumented test is copied into a private temp dir; the child gets
    a fresh agent log via GHUNTER_LOG and is killed together with its whole
    process tree on timeout (the APIs under study spawn children).
    """
    rundir = Path(workdir) / plan.run_id
    rundir.mkdir(parents=True, exist_ok=True)

    source = Path(plan.test).read_text(encoding="utf-8")
    instrumented = inject(source, snippet) if snippet else source
    test_copy = rundir / Path(plan.test).name
    test_copy.write_text(instrumented, encoding="utf-8")

    log_path = rundir / "agent.log"
    env = {k: v for k, v in os.environ.items() if k in profile.env_passthrough}
    env["GHUNTER_LOG"] = str(log_path)
    if plan.polluted_property is not None:
        env["GHUNTER_PROP"] = plan.polluted_property
        env["GHUNTER_TYPE"] = plan.pollution_type.value
    if suppress_props:
        env["GHUNTER_SUPPRESS"] = ",".join(suppress_props)

    argv = [arg.replace(TEST_PLACEHOLDER, str(test_copy)) for arg in profile.command]
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=rundir,
            env=env,
            start_new_session=True,
            text=True,
            errors="replace",
        )
    except FileNotFoundError as exc:
        raise ConfigurationError(f"cannot launch {argv[0]!r}: {exc}") from exc

    timed_out = False
    try:
        stdout, stderr = proc.communicate(timeout=plan.timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_tree(proc)
        stdout, stderr = proc.communicate()
    duration = time.monotonic() - start
    if timed_out:
        duration = max(duration, plan.timeout)

    records, stats = read_log(log_path)
    if stats.malformed or stats.unknown_kind:
        log.warning(
            "run %s: %d malformed / %d unknown-kind log lines skipped",
            plan.run_id, stats.malformed, stats.unknown_kind,
        )
    return RunOutcome(
        plan=plan,
        exit_code=proc.returncode,
        timed_out=timed_out,
        duration=duration,
        stdout=stdout,
        stderr=stderr,
        records=records,
    )


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _signal_of(exit_code: int) -> int | None:
    return -exit_code if exit_code < 0 else None


def _match_any(patterns: list[str], text: str) -> str | None:
    for pat in patterns:
        m = re.search(pat, text, re.MULTILINE)
        if m:
            return m.group(0)
    return None


def classify_termination(outcome: RunOutcome, profile: RuntimeProfile) -> TerminationClass:
    """Map one run outcome to exactly one verdict.

    Precedence: Timeout > Segfault > Panic > OOM > ExpectedFailure >
    UnexpectedError > Clean.
    """
    if outcome.timed_out:
        return TerminationClass(
            Verdict.TIMEOUT, f"timed out after {outcome.plan.timeout:g}s"
        )
    output = outcome.stderr + "\n" + outcome.stdout
    sig = _signal_of(outcome.exit_code)
    for verdict, signals in (
        (Verdict.SEGFAULT, _SEGFAULT_SIGNALS),
        (Verdict.PANIC, _PANIC_SIGNALS),
        (Verdict.OOM, frozenset()),
    ):
        if sig is not None and sig in signals:
            return TerminationClass(verdict, f"killed by signal {sig}")
        hit = _match_any(profile.crash_patterns.get(verdict.value, []), output)
        if hit is not None:
            return TerminationClass(verdict, hit)
    if outcome.exit_code == 0:
        return TerminationClass(Verdict.CLEAN, "")
    hit = _match_any(profile.expected_failure, output)
    if hit is not None:
        return TerminationClass(Verdict.EXPECTED_FAILURE, hit)
    tail = [ln for ln in output.splitlines() if ln.strip()]
    evidence = tail[0][:200] if tail else f"exit code {outcome.exit_code}"
    return TerminationClass(Verdict.UNEXPECTED_ERROR, evidence)


@dataclass
class StageSummary:
    mode: Mode
    runs: int = 0
    verdicts: dict[str, int] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "runs": self.runs,
            "verdicts": dict(sorted(self.verdicts.items())),
            "errors": self.errors,
        }


def write_transcript(out_dir: Path, outcome: RunOutcome, agent_log_src: Path | None = None) -> Path:
    """Persist one run as meta.json + agent.log + stdout.txt + stderr.txt."""
    tdir = out_dir / outcome.plan.run_id
    tdir.mkdir(parents=True, exist_ok=True)
    meta = {
        "plan": outcome.plan.to_json(),
        "outcome": {
            "exit_code": outcome.exit_code,
            "timed_out": outcome.timed_out,
            "duration": round(outcome.duration, 4),
        },
    }
    (tdir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    (tdir / "stdout.txt").write_text(outcome.stdout, encoding="utf-8")
    (tdir / "stderr.txt").write_text(outcome.stderr, encoding="utf-8")
    if agent_log_src is not None and agent_log_src.exists():
        shutil.copyfile(agent_log_src, tdir / "agent.log")
    else:
        (tdir / "agent.log").touch()
    return tdir


def run_stage(
    plans: list[RunPlan],
    profile: RuntimeProfile,
    out_dir: Path | str,
    snippet: str | None = None,
    parallelism: int | None = None,
    suppress_props: list[str] | None = None,
) -> StageSummary:
    """Execute all plans on a bounded worker pool and persist transcripts.

    A single failing run is recorded and never aborts the stage.  The
    transcript multiset is independent of the parallelism degree because
    runs share no state and land in run-id-named directories.
    """
    if not plans:
        raise ValueError("run_stage called with no plans")
    modes = {p.mode for p in plans}
    if len(modes) > 1:
        raise ValueError("run_stage plans must share one mode")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = StageSummary(mode=plans[0].mode)
    jobs = parallelism or os.cpu_count() or 1

    def one(plan: RunPlan) -> tuple[RunPlan, RunOutcome | None, str | None]:
        with tempfile.TemporaryDirectory(prefix="ghunter-run-") as tmp:
            try:
                outcome = execute(plan, profile, tmp, snippet, suppress_props)
            except ConfigurationError:
                raise
            except Exception as exc:  # recorded per-run, stage continues
                return plan, None, f"{plan.run_id}: {exc}"
            write_transcript(out_dir, outcome, Path(tmp) / plan.run_id / "agent.log")
            return plan, outcome, None

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        for plan, outcome, error in pool.map(one, plans):
            summary.runs += 1
            if error is not None:
                summary.errors.append(error)
                continue
            verdict = classify_termination(outcome, profile).verdict.value
            summary.verdicts[verdict] = summary.verdicts.get(verdict, 0) + 1
    (out_dir / f"summary-{summary.mode.value}.json").write_text(
        json.dumps(summary.to_json(), indent=2) + "\n", encoding="utf-8"
    )
    return summary


def collected_props(transcripts: list[RunOutcome]) -> dict[str, set[str]]:
    """Union of UNDEF_PROP names per test, from collect-mode outcomes."""
    props: dict[str, set[str]] = {}
    for outcome in transcripts:
        if outcome.plan.mode is not Mode.COLLECT:
            continue
        bucket = props.setdefault(outcome.plan.test, set())
        for rec in outcome.records:
            if rec.kind.value == "UNDEF_PROP":
                bucket.add(rec.payload["prop"])
    return props


def failing_tests(transcripts: list[RunOutcome], profile: RuntimeProfile) -> set[str]:
    """Tests that fail before any pollution (baseline) — excluded from triage."""
    bad: set[str] = set()
    for outcome in transcripts:
        if outcome.plan.mode is Mode.BASELINE:
            if classify_termination(outcome, profile).verdict is not Verdict.CLEAN:
                bad.add(outcome.plan.test)
    return bad


def replay(transcript_dir: Path | str) -> tuple[list[RunOutcome], list[str]]:
    """Rebuild outcomes from transcript directories, launching nothing.

    Scans recursively for meta.json files; inconsistent transcripts are
    reported per-run, never fatal.  Deterministic order (by run id).
    """
    root = Path(transcript_dir)
    outcomes: list[RunOutcome] = []
    errors: list[str] = []
    for meta_path in sorted(root.rglob("meta.json")):
        tdir = meta_path.parent
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            plan = RunPlan.from_json(meta["plan"])
            out = meta["outcome"]
        except (OSError, KeyError, ValueError) as exc:
            errors.append(f"{tdir}: bad meta.json: {exc}")
            continue
        def read_or_empty(name: str) -> str:
            p = tdir / name
            return p.read_text(encoding="utf-8") if p.exists() else ""
        agent_log = tdir / "agent.log"
        if agent_log.exists():
            records, _ = read_log(agent_log)
        else:
            records = []
            log.warning("transcript %s has no agent.log; replaying 0 records", tdir)
        outcomes.append(
            RunOutcome(
                plan=plan,
                exit_code=out["exit_code"],
                timed_out=out["timed_out"],
                duration=out["duration"],
                stdout=read_or_empty("stdout.txt"),
                stderr=read_or_empty("stderr.txt"),
                records=records,
            )
        )
    outcomes.sort(key=lambda o: o.plan.run_id)
    return outcomes, errors
