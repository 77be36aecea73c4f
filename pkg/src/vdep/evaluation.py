"""Classifier validation: metrics, confusion counts and week-grouped CV.

The cross-validation harness trains the four classifiers (recovery,
attacked, scores, concedes) once per fold, holding out one schedule week
at a time, and collects out-of-fold probabilities so every event is scored
by a model that never saw its week. Metrics are deliberately hand-rolled
against their textbook definitions; the test suite checks them against
brute-force oracles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gbdt
from .features import FEATURE_NAMES, build_corpus_features
from .ingestion import Corpus
from .labeling import K_VAEP_DEFAULT, K_VDEP_DEFAULT, label_match

CLASSIFIERS = ("recovery", "attacked", "scores", "concedes")
DEFAULT_THRESHOLD = 0.5


class UndefinedMetricError(ValueError):
    """A metric has no defined value on this input (e.g. single-class AUC)."""


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic.

    Equals P(score+ > score-) + 0.5 * P(tie) over all positive/negative
    pairs; ties get half credit through average ranks.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    new_group = np.r_[True, ss[1:] != ss[:-1]]
    group_of = np.cumsum(new_group) - 1
    starts = np.nonzero(new_group)[0]
    counts = np.diff(np.r_[starts, len(ss)])
    group_rank = starts + (counts - 1) / 2.0 + 1.0
    ranks = np.empty(len(ss))
    ranks[order] = group_rank[group_of]
    r_pos = ranks[y == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def brier(probs, labels) -> float:
    """Mean squared error between predicted probability and outcome."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.size == 0:
        raise UndefinedMetricError("Brier score of an empty set")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return float(np.mean((p - y) ** 2))


def confusion(preds, labels) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) from binary predictions."""
    p = np.asarray(preds).astype(bool)
    y = np.asarray(labels).astype(bool)
    tp = int(np.sum(p & y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    tn = int(np.sum(~p & ~y))
    return tp, fp, fn, tn


def f1(preds, labels) -> float:
    """Harmonic mean of precision and recall; 0.0 when there are no TPs."""
    tp, fp, fn, _ = confusion(preds, labels)
    return f1_from_confusion(tp, fp, fn)


def f1_from_confusion(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def threshold_preds(probs, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    return np.asarray(probs) >= threshold


# --- fold plan ------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Per-fold train/test match-id partition, grouped by schedule week."""

    folds: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]  # (train_ids, test_ids)
    method: str  # "weeks" or "round-robin"

    def __len__(self) -> int:
        return len(self.folds)


def fold_plan(corpus: Corpus, n_folds: int = 5) -> FoldPlan:
    """One test fold per week when the corpus spans exactly `n_folds` weeks;
    otherwise whole weeks are dealt round-robin into up to `n_folds` groups.
    A corpus with a single week cannot be folded at all."""
    weeks = sorted({m.week for m in corpus.matches})
    if len(weeks) == n_folds:
        groups = {w: [m.match_id for m in corpus.matches if m.week == w] for w in weeks}
        method = "weeks"
    else:
        week_group = {w: i % n_folds for i, w in enumerate(weeks)}
        groups = {}
        for m in corpus.matches:
            groups.setdefault(week_group[m.week], []).append(m.match_id)
        method = "week-round-robin"
    if len(groups) < 2:
        raise ValueError(
            f"cannot build cross-validation folds: only {len(groups)} week group(s) available"
        )
    all_ids = {m.match_id for m in corpus.matches}
    folds = []
    for key in sorted(groups):
        test = tuple(sorted(groups[key]))
        train = tuple(sorted(all_ids - set(test)))
        folds.append((train, test))
    return FoldPlan(folds=tuple(folds), method=method)


# --- cross-validation -----------------------------------------------------

@dataclass(frozen=True)
class MetricRow:
    classifier: str
    fold: int
    auc: float
    brier: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)

    def of(self, classifier: str) -> list[MetricRow]:
        return [r for r in self.rows if r.classifier == classifier]

    def mean_std(self, classifier: str, metric: str) -> tuple[float, float]:
        vals = np.array([getattr(r, metric) for r in self.of(classifier)])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        return float(vals.mean()), std


@dataclass
class CVResult:
    report: MetricReport
    oof: dict[str, np.ndarray]  # classifier -> per-event out-of-fold probability
    match_id: np.ndarray
    event_id: np.ndarray
    attacking: np.ndarray
    defending: np.ndarray
    week: np.ndarray
    fold_of_event: np.ndarray
    c_labels: list[float]  # per-fold trade-off constant from label counts
    c_events: list[float]  # same ratio from raw event-flag counts
    models: dict[tuple[str, int], gbdt.TreeEnsemble]
    labels: dict[str, np.ndarray]
    plan: FoldPlan


def corpus_labels(corpus: Corpus, k_vdep: int, k_vaep: int) -> dict[str, np.ndarray]:
    cols = {name: [] for name in CLASSIFIERS}
    for m in corpus.matches:
        ls = label_match(m.events, k_vdep=k_vdep, k_vaep=k_vaep)
        cols["recovery"].append(np.array(ls.recovery))
        cols["attacked"].append(np.array(ls.attacked))
        cols["scores"].append(np.array(ls.scores))
        cols["concedes"].append(np.array(ls.concedes))
    return {k: np.concatenate(v) for k, v in cols.items()}


def event_flag_counts(corpus: Corpus, match_ids: set[int]) -> tuple[int, int]:
    """Raw recovery-boundary and effective-attack event counts."""
    rec = att = 0
    for m in corpus.matches:
        if m.match_id not in match_ids:
            continue
        for e in m.events:
            rec += e.is_ball_recovery_boundary
            att += e.is_effective_attack
    return rec, att


def cross_validate(
    corpus: Corpus,
    k_vdep: int = K_VDEP_DEFAULT,
    k_vaep: int = K_VAEP_DEFAULT,
    train_cfg: gbdt.TrainConfig = gbdt.TrainConfig(),
    threshold: float = DEFAULT_THRESHOLD,
) -> CVResult:
    """Train each classifier per fold and score every event out of fold."""
    from .valuation import estimate_C  # local import to avoid a module cycle

    feats = build_corpus_features(corpus)
    labels = corpus_labels(corpus, k_vdep, k_vaep)
    plan = fold_plan(corpus)

    n = len(feats)
    report = MetricReport()
    oof = {name: np.full(n, np.nan) for name in CLASSIFIERS}
    fold_of_event = np.full(n, -1, dtype=np.int64)
    models: dict[tuple[str, int], gbdt.TreeEnsemble] = {}
    c_labels: list[float] = []
    c_events: list[float] = []

    for fold_idx, (train_ids, test_ids) in enumerate(plan.folds):
        train_mask = np.isin(feats.match_id, train_ids)
        test_mask = np.isin(feats.match_id, test_ids)
        X_train = np.ascontiguousarray(feats.X[train_mask])
        X_test = np.ascontiguousarray(feats.X[test_mask])
        presort = gbdt.presort_matrix(X_train)
        fold_of_event[test_mask] = fold_idx

        c_labels.append(
            estimate_C(labels["recovery"][train_mask], labels["attacked"][train_mask])
        )
        rec_ev, att_ev = event_flag_counts(corpus, set(train_ids))
        c_events.append(rec_ev / att_ev if att_ev else float("nan"))

        for name in CLASSIFIERS:
            y = labels[name]
            model = gbdt.train(
                X_train, y[train_mask], train_cfg,
                feature_names=FEATURE_NAMES, presort=presort,
            )
            models[(name, fold_idx)] = model
            probs = gbdt.predict_proba(model, X_test)
            oof[name][test_mask] = probs
            preds = threshold_preds(probs, threshold)
            tp, fp, fn, tn = confusion(preds, y[test_mask])
            try:
                fold_auc = auc(probs, y[test_mask])
            except UndefinedMetricError:
                fold_auc = float("nan")  # single-class test fold; visible in reports
            report.rows.append(
                MetricRow(
                    classifier=name,
                    fold=fold_idx,
                    auc=fold_auc,
                    brier=brier(probs, y[test_mask]),
                    f1=f1_from_confusion(tp, fp, fn),
                    tp=tp, fp=fp, fn=fn, tn=tn,
                )
            )

    return CVResult(
        report=report,
        oof=oof,
        match_id=feats.match_id,
        event_id=feats.event_id,
        attacking=feats.attacking,
        defending=feats.defending,
        week=feats.week,
        fold_of_event=fold_of_event,
        c_labels=c_labels,
        c_events=c_events,
        models=models,
        labels=labels,
        plan=plan,
    )


# --- reports --------------------------------------------------------------

def write_metrics_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["classifier", "fold", "auc", "brier", "f1", "tp", "fp", "fn", "tn"])
        for r in report.rows:
            writer.writerow(
                [r.classifier, r.fold, repr(r.auc), repr(r.brier), repr(r.f1),
                 r.tp, r.fp, r.fn, r.tn]
            )
        for name in CLASSIFIERS:
            if not report.of(name):
                continue
            for stat in ("mean", "std"):
                row = [name, stat]
                for metric in ("auc", "brier", "f1"):
                    m, s = report.mean_std(name, metric)
                    row.append(repr(m if stat == "mean" else s))
                writer.writerow(row + ["", "", "", ""])


def write_oof_csv(result: CVResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["match_id", "event_id", "p_recovery", "p_attacked", "p_scores", "p_concedes"]
        )
        for i in range(len(result.event_id)):
            writer.writerow(
                [int(result.match_id[i]), int(result.event_id[i])]
                + [repr(float(result.oof[name][i])) for name in CLASSIFIERS]
            )


def write_fold_constants_csv(result: CVResult, path: str | Path) -> None:
    """Per-fold trade-off constants, from label counts and raw event counts."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fold", "c_labels", "c_events"])
        for i, (cl, ce) in enumerate(zip(result.c_labels, result.c_events)):
            writer.writerow([i, repr(cl), repr(ce)])
