"""Acceptance suite: every release criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one PASS/FAIL line per
criterion. The heavy fixture (full-shape synthetic corpus plus five-fold
cross-validation at default training settings) is built once and shared.
"""

import time

import numpy as np
import pytest

from vdep import gbdt, treeshap, valuation
from vdep.cli import main as cli_main
from vdep.evaluation import CLASSIFIERS, auc, brier, cross_validate, f1_from_confusion
from vdep.features import FEATURE_NAMES, build_match_features
from vdep.labeling import label_attacked, label_goals, label_recovery
from vdep.synthgen import GenConfig, generate, truth_label_rates

from conftest import random_event_stream
from test_evaluation import auc_pair_oracle
from test_gbdt import brute_force_best_split, exhaustive_depth2_accuracy
from test_labeling import oracle_attacked, oracle_goals, oracle_recovery
from test_treeshap import ensemble_of, random_tree, shapley_oracle


def check(num: int, desc: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {num} {status}: {desc}"
    if detail:
        line += f" [{detail}]"
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def paper_run():
    """Default paper-shaped corpus and its full five-fold cross-validation."""
    t0 = time.perf_counter()
    gen = generate(GenConfig())
    result = cross_validate(gen.corpus, train_cfg=gbdt.TrainConfig())
    elapsed = time.perf_counter() - t0
    return {"gen": gen, "cv": result, "elapsed": elapsed}


def test_criterion_1_imbalance_ordering(paper_run):
    gen, cv, elapsed = paper_run["gen"], paper_run["cv"], paper_run["elapsed"]

    rates = truth_label_rates(gen)
    cfg = gen.config
    rates_ok = all(
        abs(rates[k] / target - 1.0) <= 0.10
        for k, target in (
            ("recovery", cfg.recovery_pos), ("attacked", cfg.attacked_pos),
            ("scores", cfg.scores_pos), ("concedes", cfg.concedes_pos),
        )
    )
    n_events = sum(len(m.events) for m in gen.corpus.matches)

    f1s = {name: cv.report.mean_std(name, "f1")[0] for name in CLASSIFIERS}
    ok = (
        rates_ok
        and n_events > 90_000
        and f1s["recovery"] >= f1s["scores"] + 0.15
        and f1s["attacked"] >= f1s["scores"] + 0.15
        and f1s["concedes"] < 0.05
        and elapsed < 900.0
    )
    check(
        1,
        "imbalance ordering on the default corpus within the runtime budget",
        ok,
        f"F1 rec {f1s['recovery']:.3f} att {f1s['attacked']:.3f} "
        f"sco {f1s['scores']:.3f} con {f1s['concedes']:.3f}; "
        f"{n_events} events in {elapsed:.0f}s",
    )


def test_criterion_2_metric_oracles():
    rng = np.random.default_rng(42)
    auc_ok = True
    for _ in range(50):
        scores = np.round(rng.random(100), 2)
        labels = (rng.random(100) < rng.uniform(0.2, 0.8)).astype(int)
        if labels.sum() in (0, 100):
            labels[0] = 1 - labels[0]
        if abs(auc(scores, labels) - auc_pair_oracle(scores, labels)) > 1e-12:
            auc_ok = False
            break

    hand_ok = True
    for _ in range(20):
        tp, fp, fn, tn = (int(rng.integers(0, 40)) for _ in range(4))
        got = f1_from_confusion(tp, fp, fn)
        if tp == 0:
            hand_ok &= got == 0.0
        else:
            p, r = tp / (tp + fp), tp / (tp + fn)
            hand_ok &= abs(got - 2 * p * r / (p + r)) < 1e-12
        n = max(tp + fp + fn + tn, 1)
        probs = np.concatenate([np.ones(tp + fp), np.zeros(fn + tn)])[:n]
        labels = np.concatenate([np.ones(tp), np.zeros(fp), np.ones(fn), np.zeros(tn)])[:n]
        hand_ok &= abs(brier(probs, labels) - np.mean((probs - labels) ** 2)) < 1e-15

    degenerate_ok = True
    try:
        auc([0.1, 0.2], [1, 1])
        degenerate_ok = False
    except Exception:
        pass
    degenerate_ok &= auc([0.5] * 6, [0, 1] * 3) == 0.5

    check(
        2, "metrics match brute-force oracles and degenerate-case contracts",
        auc_ok and hand_ok and degenerate_ok,
        f"auc_oracle={auc_ok} hand_formulas={hand_ok} degenerate={degenerate_ok}",
    )


def test_criterion_3_boosting_correctness():
    rng = np.random.default_rng(7)
    loss_ok = True
    gain_ok = True
    for _ in range(10):
        n = int(rng.integers(40, 200))
        n_feat = int(rng.integers(2, 7))
        X = rng.normal(size=(n, n_feat))
        if rng.random() < 0.4:
            X[:, 0] = np.round(X[:, 0])
        y = (X @ rng.normal(size=n_feat) + rng.normal(size=n) * 0.5 > 0).astype(float)
        model = gbdt.train(X, y, gbdt.TrainConfig(rounds=20, max_depth=4))
        loss_ok &= all(
            b <= a + 1e-12 for a, b in zip(model.train_loss, model.train_loss[1:])
        )
        p = rng.uniform(0.05, 0.95, size=n)
        g, h = p - y, p * (1 - p)
        expected = brute_force_best_split(X, g, h)
        got = gbdt.best_split(X, g, h)
        if expected is None:
            gain_ok &= got is None
        else:
            gain_ok &= (
                got is not None
                and got[1] == expected[1]
                and abs(got[2] - expected[2]) < 1e-12
                and abs(got[0] - expected[0]) < 1e-9
            )

    X = rng.random((200, 2))
    y = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5)).astype(float)
    oracle_acc = exhaustive_depth2_accuracy(X, y)
    model = gbdt.train(X, y, gbdt.TrainConfig(rounds=100, max_depth=2))
    xor_acc = float(((gbdt.predict_proba(model, X) > 0.5) == y).mean())

    check(
        3, "boosting: monotone loss, oracle-exact gains, XOR at depth 2",
        loss_ok and gain_ok and oracle_acc == 1.0 and xor_acc == 1.0,
        f"loss={loss_ok} gain={gain_ok} xor={xor_acc:.3f}",
    )


def test_criterion_4_shap_exactness(paper_run):
    cv = paper_run["cv"]
    gen = paper_run["gen"]
    rng = np.random.default_rng(11)

    model = cv.models[("recovery", 0)]
    feats = build_match_features(gen.corpus.matches[0], gen.corpus.team_table)
    lo, hi = feats.X.min(axis=0), feats.X.max(axis=0)
    instances = rng.uniform(lo, hi, size=(1000, model.n_features))
    phi, base = treeshap.shap_values(model, instances)
    margins = gbdt.margin(model, instances)
    local_err = float(np.abs(base + phi.sum(axis=1) - margins).max())

    oracle_ok = True
    for _ in range(25):
        n_feat = int(rng.integers(1, 5))
        depth = int(rng.integers(1, 3))
        tree = random_tree(rng, n_features=n_feat, depth=depth)
        x = rng.normal(size=n_feat)
        got, _ = treeshap.shap_values(ensemble_of([tree], n_features=n_feat), x)
        if np.abs(got - shapley_oracle(tree, x, n_feat)).max() > 1e-9:
            oracle_ok = False
            break

    sample = np.sort(rng.choice(len(cv.event_id), size=2000, replace=False))
    from vdep.features import build_corpus_features

    X = build_corpus_features(gen.corpus).X[sample]
    phis, _ = treeshap.shap_values(model, np.ascontiguousarray(X))
    summary = treeshap.summarize(phis, FEATURE_NAMES)
    top3 = [summary.names[int(f)] for f in summary.order[:3]]

    check(
        4, "attribution: local accuracy 1e-9, subset-oracle exact, planted signal in top 3",
        local_err < 1e-9 and oracle_ok and "defense_p1_a0" in top3,
        f"local_err={local_err:.1e} top3={top3}",
    )


def test_criterion_5_valuation_consistency(paper_run):
    cv = paper_run["cv"]
    c_of_event = np.array([cv.c_labels[f] for f in cv.fold_of_event])
    valued = valuation.value_events(
        cv.match_id, cv.event_id, cv.attacking, cv.defending,
        cv.oof["recovery"], cv.oof["attacked"], cv.oof["scores"], cv.oof["concedes"],
        c_of_event, cv.fold_of_event,
    )
    rows = valuation.aggregate_all_team_matches(valued)
    identity_err = max(
        abs(r.r_vdep - (r.r_recoveries - r.c * r.r_attacked)) for r in rows
    )

    c_events = round(valuation.estimate_C(9408, 3701), 3)
    c_labels = round(valuation.estimate_C(35286, 13353), 3)

    triples_ok = True
    for r_rec, r_att, r_vdep in ((0.348, 0.116, 0.049), (0.371, 0.159, -0.040)):
        implied = (r_rec - r_vdep) / r_att
        triples_ok &= 2.5 <= implied <= 2.7

    check(
        5, "valuation identity 1e-12; paper constants 2.542/2.643; published triples fit",
        identity_err < 1e-12 and c_events == 2.542 and c_labels == 2.643 and triples_ok,
        f"max_identity_err={identity_err:.1e} C={c_events}/{c_labels} "
        f"({len(rows)} team-matches)",
    )


def test_criterion_6_labeling_oracle():
    rng = np.random.default_rng(3)
    scans_ok = True
    checked = 0
    for _ in range(10_000):
        n = int(rng.integers(2, 24))
        events = random_event_stream(rng, n, period_split=int(rng.integers(0, n + 1)))
        k = int(rng.integers(1, 11))
        i = int(rng.integers(0, n))
        scans_ok &= label_recovery(events, i, k) == oracle_recovery(events, i, k)
        scans_ok &= label_attacked(events, i, k) == oracle_attacked(events, i, k)
        scans_ok &= label_goals(events, i, k) == oracle_goals(events, i, k)
        checked += 1
        if not scans_ok:
            break

    mono_ok = True
    for _ in range(300):
        n = int(rng.integers(2, 24))
        events = random_event_stream(rng, n, period_split=int(rng.integers(0, n + 1)))
        i = int(rng.integers(0, n))
        seq_r = [label_recovery(events, i, k) for k in range(1, 11)]
        seq_a = [label_attacked(events, i, k) for k in range(1, 11)]
        mono_ok &= seq_r == sorted(seq_r) and seq_a == sorted(seq_a)

    check(
        6, "labels equal the exhaustive window scan; monotone in k",
        scans_ok and mono_ok,
        f"{checked} random streams, monotonicity over k=1..10",
    )


def test_criterion_7_determinism(tmp_path):
    tiny = ["--n-teams", "4", "--matches-per-week", "2", "--n-weeks", "5",
            "--events-per-match", "100", "--seed", "23"]
    blobs = {}
    for run in ("a", "b"):
        root = tmp_path / run
        assert cli_main(["synth", "--out", str(root / "corpus")] + tiny) == 0
        assert cli_main([
            "ingest",
            "--events", str(root / "corpus" / "events.jsonl"),
            "--tracking", str(root / "corpus" / "tracking.csv"),
            "--teams", str(root / "corpus" / "teams.csv"),
            "--matches", str(root / "corpus" / "matches.csv"),
            "--out", str(root / "canon"),
        ]) == 0
        assert cli_main(["train", "--corpus", str(root / "canon"),
                         "--out", str(root / "models"), "--rounds", "5",
                         "--max-depth", "3"]) == 0
        assert cli_main(["value", "--corpus", str(root / "canon"),
                         "--models", str(root / "models"),
                         "--out", str(root / "values")]) == 0
        assert cli_main(["report", "--values", str(root / "values"),
                         "--outcomes", str(root / "corpus" / "outcomes.csv"),
                         "--out", str(root / "report")]) == 0
        blobs[run] = sorted(
            (p.relative_to(root), p.read_bytes())
            for p in root.rglob("*")
            if p.suffix in (".csv", ".jsonl", ".json")
        )
    identical = blobs["a"] == blobs["b"]

    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 7))
    y = (X[:, 1] > 0).astype(float)
    model = gbdt.train(X, y, gbdt.TrainConfig(rounds=10, max_depth=4))
    clone = gbdt.deserialize(gbdt.serialize(model))
    pts = rng.normal(size=(1000, 7))
    round_trip_err = float(
        np.abs(gbdt.predict_proba(model, pts) - gbdt.predict_proba(clone, pts)).max()
    )

    check(
        7, "same-seed pipelines byte-identical; serialization round-trips",
        identical and round_trip_err < 1e-12,
        f"files={len(blobs['a'])} round_trip_err={round_trip_err:.1e}",
    )


def test_criterion_8_throughput(paper_run):
    gen, cv = paper_run["gen"], paper_run["cv"]
    match = gen.corpus.matches[0]
    models = [cv.models[(name, 0)] for name in CLASSIFIERS]

    # warm any lazy state, then time the real pass
    feats = build_match_features(match, gen.corpus.team_table)
    for m in models:
        gbdt.predict_proba(m, feats.X[:8])

    t0 = time.perf_counter()
    feats = build_match_features(match, gen.corpus.team_table)
    for m in models:
        gbdt.predict_proba(m, feats.X)
    elapsed = time.perf_counter() - t0

    check(
        8, "one paper-shaped match valued in under a second",
        len(feats.X) > 2000 and elapsed < 1.0,
        f"{len(feats.X)} events in {elapsed * 1000:.0f} ms",
    )
