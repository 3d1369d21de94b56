"""Record the frozen golden transcripts and expected outputs for the corpus.

Runs every pipeline stage over each corpus fixture, normalizes
machine-specific absolute paths out of the transcripts, and regenerates
corpus/expected from the result.  Run from the repository root:

    python3 tools/record_goldens.py
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ghunter.cli import main as ghunter_main  # noqa: E402
from ghunter.corpus import load_manifest  # noqa: E402

log = logging.getLogger("record_goldens")

# Shipped transcripts must not leak the recording checkout's layout.  The
# placeholder stays absolute so path collapsing treats golden and live
# stacks identically.
PLACEHOLDER = "/ghunter-golden"

PROFILE = "corpus/profile.json"
FIXTURES = "corpus/fixtures"
GOLDEN = REPO / "corpus" / "golden"
EXPECTED = REPO / "corpus" / "expected"


def run(argv: list[str]) -> None:
    rc = ghunter_main(argv)
    if rc != 0:
        raise SystemExit(f"ghunter {' '.join(argv[:1])} failed with rc={rc}: {argv}")


def record_fixture(name: str, test: str) -> None:
    out = GOLDEN / name
    if out.exists():
        shutil.rmtree(out)
    stage = [
        "--runtime-profile", PROFILE,
        "--root", FIXTURES,
        "--tests", test,
        "--out", str(out),
        "--jobs", "2",
    ]
    run(["baseline", *stage])
    run(["collect", *stage])
    pollution = ["--collect-dir", str(out)]
    run(["hunt", *stage, *pollution])
    run(["crash", *stage, *pollution])


def normalize() -> None:
    """Strip run byproducts and machine-specific paths from the goldens."""
    golden_abs = str(GOLDEN)
    for path in sorted(GOLDEN.rglob("*")):
        if not path.is_file():
            continue
        rundir = path.parent
        # The instrumented test copy and stage summaries are byproducts of
        # live execution; replay never reads them.
        if path.name.endswith(".js") or path.name.startswith("summary-"):
            path.unlink()
            continue
        if path.name not in ("agent.log", "stdout.txt", "stderr.txt"):
            continue
        text = path.read_text(encoding="utf-8")
        cleaned = text.replace(golden_abs, PLACEHOLDER)
        if cleaned != text:
            log.info("normalized paths in %s", path.relative_to(REPO))
            path.write_text(cleaned, encoding="utf-8")
        del rundir


def regenerate_expected() -> None:
    EXPECTED.mkdir(parents=True, exist_ok=True)
    run([
        "report",
        "--transcripts", str(GOLDEN),
        "--runtime-profile", PROFILE,
        "--report-config", "corpus/report-config.json",
        "--baseline", str(GOLDEN),
        "--out", str(EXPECTED),
    ])
    run([
        "score",
        "--candidates", str(EXPECTED / "candidates.json"),
        "--manifest", "corpus/manifest.json",
        "--out", str(EXPECTED / "score.json"),
    ])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fixture", default=None, help="record just one fixture")
    parser.add_argument("--skip-expected", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    manifest = load_manifest(REPO / "corpus" / "manifest.json")
    for fx in manifest.fixtures:
        if args.fixture and fx.name != args.fixture:
            continue
        log.info("recording fixture %s", fx.name)
        record_fixture(fx.name, fx.test)
    normalize()
    if not args.skip_expected:
        regenerate_expected()
    return 0


if __name__ == "__main__":
    sys.exit(main())
