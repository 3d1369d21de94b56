"""Command line entry points for the gadget hunting pipeline.

Stage commands (collect / baseline / hunt / crash) drive live subprocess
runs; replay / report / score work purely from transcripts on disk, so
the analysis side runs anywhere, including against the frozen corpus
goldens.  `all` chains the whole pipeline.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import load_manifest
from .reporter import (
    DenylistConfig,
    ReportConfig,
    candidates_document,
    default_denylist,
    generate,
    score,
)
from .runner import (
    DEFAULT_TIMEOUT,
    ConfigurationError,
    Mode,
    RunPlan,
    RuntimeProfile,
    collected_props,
    discover_tests,
    failing_tests,
    plan_stage2,
    replay,
    run_stage,
)
from .sarif import emit_sarif
from .taint import PollutionType

log = logging.getLogger(__name__)


def _add_stage_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--runtime-profile", required=True, help="runtime profile JSON")
    p.add_argument("--root", default=".", help="directory to resolve test globs in")
    p.add_argument("--tests", nargs="+", default=["*_test.*"], help="include globs")
    p.add_argument("--exclude", nargs="*", default=[], help="exclude globs (win over includes)")
    p.add_argument("--timeout-secs", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--jobs", type=int, default=None, help="worker count (default: CPUs)")
    p.add_argument("--out", required=True, help="transcript output directory")
    p.add_argument("--agent-dir", default="agent/dist", help="directory with agent snippets")
    p.add_argument("--suppress-props", default=None,
                   help="file with hot property names the agent must not report, one per line")


def _add_pollution_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--collect-dir", required=True, help="transcripts of the collect stage")
    p.add_argument("--pollution-types", default="string,object")
    p.add_argument("--forin-probe", choices=["on", "off"], default="on")


def _read_suppress(path: str | None) -> list[str]:
    if not path:
        return []
    return [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]


def _snippet(agent_dir: str, name: str) -> str:
    path = Path(agent_dir) / f"{name}.js"
    if not path.exists():
        raise ConfigurationError(f"agent snippet {path} not found")
    return path.read_text(encoding="utf-8")


def _stage_tests(args: argparse.Namespace) -> list[str]:
    return [str(t) for t in discover_tests(args.root, args.tests, args.exclude)]


def cmd_collect(args: argparse.Namespace) -> int:
    profile = RuntimeProfile.load(args.runtime_profile)
    tests = _stage_tests(args)
    if not tests:
        return 0
    plans = [
        RunPlan(run_id=f"{Path(t).stem}--collect", test=t, mode=Mode.COLLECT,
                timeout=args.timeout_secs)
        for t in tests
    ]
    summary = run_stage(plans, profile, args.out, _snippet(args.agent_dir, "collect"),
                        args.jobs, _read_suppress(args.suppress_props))
    print(json.dumps(summary.to_json(), indent=2))
    return 1 if summary.errors else 0


def cmd_baseline(args: argparse.Namespace) -> int:
    profile = RuntimeProfile.load(args.runtime_profile)
    tests = _stage_tests(args)
    if not tests:
        return 0
    plans = [
        RunPlan(run_id=f"{Path(t).stem}--baseline", test=t, mode=Mode.BASELINE,
                timeout=args.timeout_secs)
        for t in tests
    ]
    summary = run_stage(plans, profile, args.out, None, args.jobs)
    print(json.dumps(summary.to_json(), indent=2))
    return 1 if summary.errors else 0


def _pollution_plans(args: argparse.Namespace, mode: Mode) -> list[RunPlan]:
    outcomes, errors = replay(args.collect_dir)
    for err in errors:
        log.warning("collect transcript problem: %s", err)
    props_by_test = collected_props(outcomes)
    types = {PollutionType(t.strip()) for t in args.pollution_types.split(",") if t.strip()}
    tests = _stage_tests(args)
    plans: list[RunPlan] = []
    for test in tests:
        plans.extend(
            plan_stage2(
                test,
                props_by_test.get(test, set()),
                types,
                forin_probe=args.forin_probe == "on",
                mode=mode,
                timeout=args.timeout_secs,
            )
        )
    return plans


def cmd_hunt(args: argparse.Namespace) -> int:
    profile = RuntimeProfile.load(args.runtime_profile)
    plans = _pollution_plans(args, Mode.HUNT)
    if not plans:
        log.warning("nothing to hunt: no tests or no collected properties")
        return 0
    summary = run_stage(plans, profile, args.out, _snippet(args.agent_dir, "hunt"),
                        args.jobs, _read_suppress(args.suppress_props))
    print(json.dumps(summary.to_json(), indent=2))
    return 1 if summary.errors else 0


def cmd_crash(args: argparse.Namespace) -> int:
    # Crash probing pollutes on the uninstrumented execution path: polluter
    # snippet only, no collector, no sink wrappers.
    profile = RuntimeProfile.load(args.runtime_profile)
    plans = _pollution_plans(args, Mode.CRASH)
    if not plans:
        log.warning("nothing to probe: no tests or no collected properties")
        return 0
    summary = run_stage(plans, profile, args.out, _snippet(args.agent_dir, "crash"),
                        args.jobs, _read_suppress(args.suppress_props))
    print(json.dumps(summary.to_json(), indent=2))
    return 1 if summary.errors else 0


def cmd_replay(args: argparse.Namespace) -> int:
    outcomes, errors = replay(args.transcripts)
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    by_mode: dict[str, int] = {}
    for o in outcomes:
        by_mode[o.plan.mode.value] = by_mode.get(o.plan.mode.value, 0) + 1
    print(json.dumps({"outcomes": len(outcomes), "by_mode": by_mode,
                      "errors": len(errors)}, indent=2))
    return 1 if errors else 0


def _load_report_config(args: argparse.Namespace) -> ReportConfig:
    if args.report_config:
        return ReportConfig.load(args.report_config)
    return ReportConfig()


def cmd_report(args: argparse.Namespace) -> int:
    profile = RuntimeProfile.load(args.runtime_profile)
    cfg = _load_report_config(args)
    denylist = DenylistConfig.load(args.denylist) if args.denylist else default_denylist()

    outcomes = []
    for tdir in args.transcripts:
        part, errors = replay(tdir)
        outcomes.extend(part)
        for err in errors:
            log.warning("transcript problem: %s", err)
    excluded: set[str] = set()
    if args.baseline:
        base, _ = replay(args.baseline)
        excluded = failing_tests(base, profile)

    result = generate(outcomes, profile, denylist, cfg, excluded)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = candidates_document(result.kept, result.gadgets, result.suppressed,
                              result.orphans, cfg)
    (out / "candidates.json").write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out / "report.sarif").write_text(emit_sarif(result.gadgets, result.orphans, cfg),
                                      encoding="utf-8")
    print(f"{len(result.kept)} candidates, {len(result.gadgets)} gadgets, "
          f"{len(result.suppressed)} suppressed, {len(result.orphans)} orphans -> {out}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    raw = json.loads(Path(args.candidates).read_text(encoding="utf-8"))
    from .reporter import GadgetCandidate

    candidates = [
        GadgetCandidate(property=c["property"], api=c["api"], sink=c["sink"], kind=c["kind"])
        for c in raw["candidates"]
    ]
    report = score(candidates, manifest.truth_triples())
    payload = report.to_json()
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    prec = "n/a" if report.precision is None else f"{report.precision:.3f}"
    rec = "n/a" if report.recall is None else f"{report.recall:.3f}"
    print(f"TP={report.true_positives} FP={report.false_positives} "
          f"FN={report.false_negatives} precision={prec} recall={rec}",
          file=sys.stderr)
    return 0


def cmd_all(args: argparse.Namespace) -> int:
    out = Path(args.out)
    stages = {
        "baseline": out / "baseline",
        "collect": out / "collect",
        "hunt": out / "hunt",
        "crash": out / "crash",
    }
    ns = argparse.Namespace(**vars(args))
    ns.out = str(stages["baseline"])
    rc = cmd_baseline(ns)
    ns.out = str(stages["collect"])
    rc |= cmd_collect(ns)
    ns.out = str(stages["hunt"])
    ns.collect_dir = str(stages["collect"])
    rc |= cmd_hunt(ns)
    ns.out = str(stages["crash"])
    rc |= cmd_crash(ns)
    ns.transcripts = [str(stages["hunt"]), str(stages["crash"])]
    ns.baseline = str(stages["baseline"])
    ns.out = str(out / "report")
    rc |= cmd_report(ns)
    if args.manifest:
        ns.candidates = str(out / "report" / "candidates.json")
        ns.out = str(out / "report" / "score.json")
        rc |= cmd_score(ns)
    return rc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghunter", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, pollution in (
        ("collect", cmd_collect, False),
        ("baseline", cmd_baseline, False),
        ("hunt", cmd_hunt, True),
        ("crash", cmd_crash, True),
    ):
        p = sub.add_parser(name)
        _add_stage_args(p)
        if pollution:
            _add_pollution_args(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("replay", help="rebuild outcomes from transcripts, run nothing")
    p.add_argument("--transcripts", required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("report", help="transcripts -> SARIF + candidate listing")
    p.add_argument("--transcripts", nargs="+", required=True)
    p.add_argument("--runtime-profile", required=True)
    p.add_argument("--denylist", default=None, help="denylist JSON (default: built-in)")
    p.add_argument("--report-config", default=None)
    p.add_argument("--baseline", default=None, help="baseline transcripts for exclusion")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("score", help="candidates + manifest -> precision/recall")
    p.add_argument("--candidates", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("all", help="baseline + collect + hunt + crash + report (+ score)")
    _add_stage_args(p)
    p.add_argument("--pollution-types", default="string,object")
    p.add_argument("--forin-probe", choices=["on", "off"], default="on")
    p.add_argument("--denylist", default=None)
    p.add_argument("--report-config", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(fn=cmd_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
