"""Command-line pipeline: synth, ingest, train, value, explain, report.

Every subcommand writes a run_manifest.txt into its output directory with
the exact command, configuration, seed, input/output file hashes and
timings, so any output can be reproduced byte for byte. All randomness sits
behind the single --seed flag (only `synth` and `explain` sampling use it).
Errors exit nonzero with a message on stderr; exit code 0 means the whole
subcommand succeeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, evaluation, gbdt, treeshap, valuation
from .features import FEATURE_NAMES, build_corpus_features, write_feature_table
from .ingestion import (
    EVENTS_FILENAME,
    IngestError,
    MATCHES_FILENAME,
    TEAMS_FILENAME,
    TRACKING_FILENAME,
    build_corpus,
    load_corpus,
    validate_corpus,
    write_corpus,
)
from .synthgen import GenConfig, generate, truth_label_rates, write_truth_labels


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Collects reproducibility facts for one run."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.lines: list[str] = [
            f"command={command}",
            f"argv={' '.join(sys.argv[1:])}",
            f"package_version={__version__}",
            f"python={sys.version.split()[0]}",
            f"numpy={np.__version__}",
        ]
        for key, value in sorted(vars(args).items()):
            if key != "func":
                self.lines.append(f"arg.{key}={value}")
        self._t0 = time.perf_counter()

    def add(self, key: str, value) -> None:
        self.lines.append(f"{key}={value}")

    def add_file(self, role: str, path: Path) -> None:
        self.lines.append(f"{role}.path={path}")
        self.lines.append(f"{role}.sha256={_sha256(path)}")

    def write(self, out_dir: Path) -> None:
        self.add("elapsed_seconds", f"{time.perf_counter() - self._t0:.3f}")
        with open(out_dir / "run_manifest.txt", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.lines) + "\n")


def _read_config_file(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _gen_config(args: argparse.Namespace) -> GenConfig:
    raw = _read_config_file(args.config)
    cfg = GenConfig()
    fields = {f.name: f.type for f in dataclasses.fields(GenConfig)}
    overrides: dict[str, object] = {}
    for key, value in raw.items():
        if key not in fields:
            raise ValueError(f"unknown synth config key: {key}")
        current = getattr(cfg, key)
        overrides[key] = type(current)(value)
    for key in fields:
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
    if args.seed is not None:
        overrides["seed"] = args.seed
    return dataclasses.replace(cfg, **overrides)


# --- subcommands ------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("synth", args)
    cfg = _gen_config(args)
    for f in dataclasses.fields(cfg):
        manifest.add(f"config.{f.name}", getattr(cfg, f.name))
    gen = generate(cfg)
    write_corpus(gen.corpus, out)
    write_truth_labels(gen, out / "truth_labels.csv")
    analysis.write_outcomes(gen.outcomes, out / "outcomes.csv")
    for name, rate in truth_label_rates(gen).items():
        manifest.add(f"rate.{name}", repr(rate))
    for fname in (EVENTS_FILENAME, TRACKING_FILENAME, TEAMS_FILENAME, MATCHES_FILENAME,
                  "truth_labels.csv", "outcomes.csv"):
        manifest.add_file(f"output.{fname}", out / fname)
    manifest.write(out)
    print(f"synth: wrote {len(gen.corpus.matches)} matches to {out}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("ingest", args)
    for role, p in (("events", args.events), ("tracking", args.tracking), ("teams", args.teams)):
        manifest.add_file(f"input.{role}", Path(p))
    corpus = build_corpus(args.events, args.tracking, args.teams, args.matches)
    violations = validate_corpus(corpus)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        print(f"ingest: {len(violations)} invariant violation(s); corpus rejected", file=sys.stderr)
        return 2
    write_corpus(corpus, out)
    manifest.add("matches", len(corpus.matches))
    manifest.add("events", sum(len(m.events) for m in corpus.matches))
    for fname in (EVENTS_FILENAME, TRACKING_FILENAME, TEAMS_FILENAME, MATCHES_FILENAME):
        manifest.add_file(f"output.{fname}", out / fname)
    manifest.write(out)
    print(f"ingest: wrote canonical corpus ({len(corpus.matches)} matches) to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("train", args)
    corpus = load_corpus(args.corpus)
    cfg = gbdt.TrainConfig(
        rounds=args.rounds, max_depth=args.max_depth, learning_rate=args.learning_rate,
        seed=args.seed if args.seed is not None else 0,
    )
    result = evaluation.cross_validate(
        corpus, k_vdep=args.k_vdep, k_vaep=args.k_vaep, train_cfg=cfg,
        threshold=args.threshold,
    )
    manifest.add("fold_plan.method", result.plan.method)
    manifest.add("folds", len(result.plan))
    for i, (cl, ce) in enumerate(zip(result.c_labels, result.c_events)):
        manifest.add(f"fold{i}.c_labels", repr(cl))
        manifest.add(f"fold{i}.c_events", repr(ce))
    for (name, fold), model in result.models.items():
        path = out / f"{name}_fold{fold}.json"
        gbdt.save_model(model, path)
        manifest.add_file(f"model.{name}_fold{fold}", path)
    evaluation.write_metrics_csv(result.report, out / "metrics.csv")
    evaluation.write_oof_csv(result, out / "oof_probs.csv")
    evaluation.write_fold_constants_csv(result, out / "fold_c.csv")
    write_feature_table(out / "features.csv")
    for fname in ("metrics.csv", "oof_probs.csv", "fold_c.csv", "features.csv"):
        manifest.add_file(f"output.{fname}", out / fname)
    manifest.write(out)
    for name in evaluation.CLASSIFIERS:
        m_auc, s_auc = result.report.mean_std(name, "auc")
        m_f1, s_f1 = result.report.mean_std(name, "f1")
        print(f"train: {name}: AUC {m_auc:.3f}+-{s_auc:.3f}  F1 {m_f1:.3f}+-{s_f1:.3f}")
    return 0


def _load_fold_models(models_dir: Path, n_folds: int) -> dict[tuple[str, int], gbdt.TreeEnsemble]:
    models = {}
    for name in evaluation.CLASSIFIERS:
        for fold in range(n_folds):
            path = models_dir / f"{name}_fold{fold}.json"
            if not path.exists():
                raise FileNotFoundError(f"missing model file: {path}")
            models[(name, fold)] = gbdt.load_model(path)
    return models


def cmd_value(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("value", args)
    corpus = load_corpus(args.corpus)
    plan = evaluation.fold_plan(corpus)
    models = _load_fold_models(Path(args.models), len(plan))
    labels = evaluation.corpus_labels(corpus, args.k_vdep, args.k_vaep)
    feats = build_corpus_features(corpus)

    fold_of_match = {}
    for fold_idx, (_, test_ids) in enumerate(plan.folds):
        for mid in test_ids:
            fold_of_match[mid] = fold_idx
    fold_of_event = np.array([fold_of_match[int(m)] for m in feats.match_id])

    c_by_fold = []
    for fold_idx, (train_ids, _) in enumerate(plan.folds):
        train_mask = np.isin(feats.match_id, train_ids)
        c_by_fold.append(
            valuation.estimate_C(labels["recovery"][train_mask], labels["attacked"][train_mask])
        )
        manifest.add(f"fold{fold_idx}.c_labels", repr(c_by_fold[-1]))

    probs = {name: np.empty(len(feats)) for name in evaluation.CLASSIFIERS}
    for fold_idx in range(len(plan)):
        mask = fold_of_event == fold_idx
        X = feats.X[mask]
        for name in evaluation.CLASSIFIERS:
            probs[name][mask] = gbdt.predict_proba(models[(name, fold_idx)], X)

    valued = valuation.value_events(
        feats.match_id, feats.event_id, feats.attacking, feats.defending,
        probs["recovery"], probs["attacked"], probs["scores"], probs["concedes"],
        np.array([c_by_fold[f] for f in fold_of_event]), fold_of_event,
    )
    match_rows = valuation.aggregate_all_team_matches(valued)
    season_rows = valuation.season_table(match_rows)

    valuation.write_valued_events_csv(valued, out / "valued_events.csv")
    valuation.write_team_match_csv(match_rows, out / "team_match.csv")
    valuation.write_team_season_csv(season_rows, out / "team_season.csv")
    analysis.write_outcomes(analysis.match_outcome_means(corpus), out / "match_outcomes.csv")
    with open(out / "team_names.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("team_id,name\n")
        for tid in sorted(corpus.team_table):
            fh.write(f"{tid},{corpus.team_table[tid].name}\n")
    for fname in ("valued_events.csv", "team_match.csv", "team_season.csv",
                  "match_outcomes.csv", "team_names.csv"):
        manifest.add_file(f"output.{fname}", out / fname)
    manifest.write(out)
    print(f"value: {len(valued)} events, {len(match_rows)} team-matches -> {out}")
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("explain", args)
    if args.classifier not in ("recovery", "attacked"):
        raise ValueError(f"--classifier must be recovery or attacked, got {args.classifier}")
    model = gbdt.load_model(args.model)
    manifest.add_file("input.model", Path(args.model))
    corpus = load_corpus(args.corpus)
    feats = build_corpus_features(corpus)
    n = len(feats)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    if args.sample and args.sample < n:
        rows = np.sort(rng.choice(n, size=args.sample, replace=False))
    else:
        rows = np.arange(n)
    X = np.ascontiguousarray(feats.X[rows])
    phis, base = treeshap.shap_values(model, X)
    summary = treeshap.summarize(phis, model.feature_names or FEATURE_NAMES)
    treeshap.write_summary_csv(summary, out / "shap_summary.csv")
    treeshap.write_points_csv(phis, X, feats.event_id[rows], summary, out / "shap_points.csv")
    manifest.add("classifier", args.classifier)
    manifest.add("instances", len(rows))
    manifest.add("base_value", repr(float(base)))
    for fname in ("shap_summary.csv", "shap_points.csv"):
        manifest.add_file(f"output.{fname}", out / fname)
    manifest.write(out)
    top = ", ".join(name for name, _ in summary.top(5))
    print(f"explain: top features for {args.classifier}: {top}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("report", args)
    values_dir = Path(args.values)

    season_rows = _read_team_season(values_dir / "team_season.csv")
    match_means = analysis.load_outcomes(values_dir / "match_outcomes.csv")
    season_outcomes = analysis.load_outcomes(args.outcomes)
    manifest.add_file("input.team_season", values_dir / "team_season.csv")
    manifest.add_file("input.outcomes", Path(args.outcomes))

    rows = analysis.correlation_report(season_rows, match_means, level="match")
    rows += analysis.correlation_report(season_rows, season_outcomes, level="season")
    undefined = [r for r in rows if r.band == "undefined"]
    for r in undefined:
        print(f"warning: correlation undefined for {r.level}/{r.index}/{r.outcome}", file=sys.stderr)
    analysis.write_correlations_csv(rows, out / "correlations.csv")

    names_path = values_dir / "team_names.csv"
    names = {}
    if names_path.exists():
        for line in names_path.read_text(encoding="utf-8").splitlines()[1:]:
            tid, _, name = line.partition(",")
            names[int(tid)] = name
    analysis.write_scatter_csv(season_rows, names, out / "scatter.csv")
    for fname in ("correlations.csv", "scatter.csv"):
        manifest.add_file(f"output.{fname}", out / fname)
    manifest.write(out)
    print(f"report: {len(rows)} correlations ({len(undefined)} undefined) -> {out}")
    return 0


def _read_team_season(path: Path) -> list[valuation.TeamSeasonValue]:
    import csv as _csv

    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        expected = ["team_id", "n_matches", "r_vdep", "r_recoveries", "r_attacked",
                    "s_vaep", "s_scores", "s_concedes"]
        if header != expected:
            raise ValueError(f"{path}: unexpected team_season header: {header}")
        for row in reader:
            if not row or row[0] == "league":
                continue
            rows.append(
                valuation.TeamSeasonValue(
                    team_id=int(row[0]), n_matches=int(row[1]), r_vdep=float(row[2]),
                    r_recoveries=float(row[3]), r_attacked=float(row[4]),
                    s_vaep=float(row[5]), s_scores=float(row[6]), s_concedes=float(row[7]),
                )
            )
    return rows


# --- argument wiring --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdep",
        description="Value soccer team defense from event and tracking streams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("--config", help="key=value config file (GenConfig fields)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-teams", dest="n_teams", type=int)
    p.add_argument("--n-weeks", dest="n_weeks", type=int)
    p.add_argument("--matches-per-week", dest="matches_per_week", type=int)
    p.add_argument("--events-per-match", dest="events_per_match", type=int)
    p.add_argument("--signal-recovery", dest="signal_recovery", type=float)
    p.add_argument("--signal-attacked", dest="signal_attacked", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate raw files and write a canonical corpus")
    p.add_argument("--events", required=True)
    p.add_argument("--tracking", required=True)
    p.add_argument("--teams", required=True)
    p.add_argument("--matches", help="optional schedule metadata csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="five-fold cross-validated training")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-vdep", dest="k_vdep", type=int, default=5)
    p.add_argument("--k-vaep", dest="k_vaep", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=6)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=0.3)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("value", help="turn fold models into defensive values")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-vdep", dest="k_vdep", type=int, default=5)
    p.add_argument("--k-vaep", dest="k_vaep", type=int, default=10)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("explain", help="per-feature attribution report")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--classifier", required=True, choices=["recovery", "attacked"])
    p.add_argument("--out", required=True)
    p.add_argument("--sample", type=int, default=2000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", help="outcome correlations and scatter table")
    p.add_argument("--values", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, gbdt.ModelFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
