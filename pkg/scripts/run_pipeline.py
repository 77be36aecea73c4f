#!/usr/bin/env python3
"""End-to-end experiment driver: synth -> ingest -> train -> value ->
explain -> report, with wall-clock timings per stage.

Defaults run a reduced league so a laptop finishes in a couple of minutes;
pass --full for the paper-shaped 45-match corpus (budget ~15 minutes).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from vdep.cli import main as vdep_main


def run(stage: str, argv: list[str]) -> None:
    t0 = time.perf_counter()
    code = vdep_main(argv)
    dt = time.perf_counter() - t0
    print(f"[{stage:7s}] {dt:7.1f}s  exit={code}")
    if code != 0:
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/demo", help="output root directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--full", action="store_true",
                        help="paper-shaped corpus and default training settings")
    args = parser.parse_args()

    root = Path(args.out)
    corpus, canon = root / "corpus", root / "canon"
    models, values = root / "models", root / "values"
    shap_dir, report = root / "shap", root / "report"

    synth_args = ["synth", "--out", str(corpus), "--seed", str(args.seed)]
    train_args = ["train", "--corpus", str(canon), "--out", str(models)]
    if not args.full:
        synth_args += ["--n-teams", "8", "--matches-per-week", "4",
                       "--events-per-match", "600"]
        train_args += ["--rounds", "30"]

    run("synth", synth_args)
    run("ingest", [
        "ingest",
        "--events", str(corpus / "events.jsonl"),
        "--tracking", str(corpus / "tracking.csv"),
        "--teams", str(corpus / "teams.csv"),
        "--matches", str(corpus / "matches.csv"),
        "--out", str(canon),
    ])
    run("train", train_args)
    run("value", ["value", "--corpus", str(canon), "--models", str(models),
                  "--out", str(values)])
    run("explain", ["explain", "--model", str(models / "recovery_fold0.json"),
                    "--corpus", str(canon), "--classifier", "recovery",
                    "--out", str(shap_dir), "--seed", str(args.seed)])
    run("report", ["report", "--values", str(values),
                   "--outcomes", str(corpus / "outcomes.csv"),
                   "--out", str(report)])
    print(f"outputs under {root}/")


if __name__ == "__main__":
    main()
