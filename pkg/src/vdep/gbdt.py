"""Gradient-boosted decision trees for binary targets, built from scratch.

Second-order boosting on the logistic loss: with margin m, p = sigmoid(m),
per-row gradients are g = p - y and h = p(1 - p). Each tree is grown
depth-wise by exact greedy search over presorted feature columns; a split's
quality is the regularized objective reduction

    gain = 1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda) ] - gamma

and a finalized leaf weighs -G/(H+lambda). Candidates that would leave a
child below `min_child_weight` hessian mass are skipped; a node with no
positive-gain candidate becomes a leaf.

Determinism contract: equal-gain candidates resolve to the lowest feature
index, then the lowest threshold, and rows are presorted with ties broken
by a canonical whole-row ordering, so training is invariant to permuting
the input rows (bit for bit, provided no two rows share every feature value
while carrying different labels). The hot scan compares candidate scores by
cross-multiplication, so no division happens inside the row loop; the
reported gain of the winning candidate is then computed with the formula
above.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

FORMAT_NAME = "vdep-gbdt"
FORMAT_VERSION = 1


class ModelFormatError(Exception):
    """Raised for unreadable, truncated or wrong-version model files."""


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters; defaults mirror the common library defaults."""

    rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    base_score: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 < self.base_score < 1.0:
            raise ValueError("base_score must be a probability in (0, 1)")
        if self.reg_lambda < 0.0 or self.gamma < 0.0 or self.min_child_weight < 0.0:
            raise ValueError("regularizers must be non-negative")


@dataclass
class Tree:
    """One tree as parallel node arrays; negative feature marks a leaf."""

    feature: np.ndarray  # int32; -1 on leaves
    threshold: np.ndarray  # float64; split is x[feature] < threshold
    left: np.ndarray  # int32 child node index; -1 on leaves
    right: np.ndarray
    default_left: np.ndarray  # bool; branch taken when the feature is NaN
    value: np.ndarray  # float64 leaf weight; 0 on internal nodes
    cover: np.ndarray  # float64 hessian mass routed through the node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def expected_value(self) -> float:
        """Cover-weighted mean leaf value (the tree's output on average)."""
        leaves = self.feature < 0
        total = self.cover[0]
        return float(np.sum(self.value[leaves] * self.cover[leaves]) / total)


@dataclass
class TreeEnsemble:
    """A trained booster: margin(x) = logit(base_score) + sum lr * tree(x)."""

    config: TrainConfig
    base_score: float
    learning_rate: float
    n_features: int
    trees: list[Tree] = field(default_factory=list)
    feature_names: list[str] | None = None
    train_loss: list[float] = field(default_factory=list)

    def base_margin(self) -> float:
        return math.log(self.base_score / (1.0 - self.base_score))


def sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m, dtype=np.float64)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    eps = 1e-15
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


# --- presorting -----------------------------------------------------------

@dataclass
class Presort:
    """Per-feature row orderings, shareable across boosters on the same X."""

    orders: np.ndarray  # int32 (n_features, n_rows)
    values: np.ndarray  # float64 (n_features, n_rows), X gathered in order


def _canonical_key(X: np.ndarray) -> np.ndarray:
    """Permutation-invariant per-row scalar used to break sorting ties.

    A fixed pseudo-random projection of the whole row: two rows get the same
    key only when they are identical (up to measure-zero collisions), and
    identical rows are interchangeable during training, so accumulation
    order stays canonical under any input permutation.
    """
    w = np.random.default_rng(0x5EED).standard_normal(X.shape[1])
    return X @ w


def presort_matrix(X: np.ndarray) -> Presort:
    n, n_feat = X.shape
    korder = np.argsort(_canonical_key(X), kind="stable").astype(np.int32)
    Xk = np.asfortranarray(X[korder])
    orders = np.empty((n_feat, n), dtype=np.int32)
    values = np.empty((n_feat, n), dtype=np.float64)
    for f in range(n_feat):
        col = Xk[:, f]
        idx = np.argsort(col, kind="stable")  # stable keeps canonical tie order
        orders[f] = korder[idx]
        values[f] = col[idx]
    return Presort(orders=orders, values=values)


# --- numba kernels --------------------------------------------------------

@njit(cache=True)
def _scan_level(orders, values, gh, positions, node_g, node_h, lam, min_child_weight,
                best_num, best_den, best_feat, best_thr, best_gl, best_hl):
    """Best split candidate per active node across every feature.

    Scores are compared as fractions num/den via cross-multiplication, so no
    division runs inside the row loop; the caller turns the winner into a
    gain. Strict `>` comparisons under the ascending feature/threshold scan
    give the lowest-feature-then-lowest-threshold tie-break. A NaN sentinel
    in `prev` makes a node's first row produce a NaN midpoint, which the
    threshold guard rejects, so no explicit first-row bookkeeping is needed.
    """
    n_feat, n_rows = orders.shape
    n_nodes = node_g.shape[0]
    gl = np.empty(n_nodes, dtype=np.float64)
    hl = np.empty(n_nodes, dtype=np.float64)
    prev = np.empty(n_nodes, dtype=np.float64)
    for f in range(n_feat):
        for n in range(n_nodes):
            gl[n] = 0.0
            hl[n] = 0.0
            prev[n] = np.nan
        ordf = orders[f]
        valf = values[f]
        for ii in range(n_rows):
            r = ordf[ii]
            n = positions[r]
            if n < 0:
                continue
            v = valf[ii]
            pv = prev[n]
            if v != pv:  # run boundary (always true on a node's first row)
                hl_n = hl[n]
                gl_n = gl[n]
                hr_n = node_h[n] - hl_n
                gr_n = node_g[n] - gl_n
                dl = hl_n + lam
                dr = hr_n + lam
                num = gl_n * gl_n * dr + gr_n * gr_n * dl
                den = dl * dr
                if num * best_den[n] > best_num[n] * den:
                    # only now pay for the validity guards
                    thr = 0.5 * (pv + v)
                    if (
                        thr > pv  # rejects NaN first rows and degenerate midpoints
                        and hl_n >= min_child_weight
                        and hr_n >= min_child_weight
                    ):
                        best_num[n] = num
                        best_den[n] = den
                        best_feat[n] = f
                        best_thr[n] = thr
                        best_gl[n] = gl_n
                        best_hl[n] = hl_n
                prev[n] = v
            gl[n] += gh[r, 0]
            hl[n] += gh[r, 1]


@njit(cache=True)
def _apply_level(X, positions, leaf_of_row, act_feat, act_thr, act_left, act_right,
                 act_leaf, child_count):
    """Route rows one level down, or park them on their finalized leaf."""
    n_rows = positions.shape[0]
    for r in range(n_rows):
        n = positions[r]
        if n < 0:
            continue
        f = act_feat[n]
        if f < 0:
            leaf_of_row[r] = act_leaf[n]
            positions[r] = -1
        else:
            if X[r, f] < act_thr[n]:
                positions[r] = act_left[n]
                child_count[act_left[n]] += 1
            else:
                positions[r] = act_right[n]
                child_count[act_right[n]] += 1


def _gain_from_parts(gl, hl, gr, hr, g, h, lam, gamma) -> float:
    return 0.5 * (
        gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam)
    ) - gamma


def best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    lam: float = 1.0,
    gamma: float = 0.0,
    min_child_weight: float = 1.0,
    presort: Presort | None = None,
) -> tuple[float, int, float, float, float] | None:
    """Exact greedy best split of all rows; None when nothing beats gain 0.

    Returns (gain, feature, threshold, left_gradient_sum, left_hessian_sum).
    Shares the level-scan kernel with training, so the two cannot drift.
    """
    if presort is None:
        presort = presort_matrix(X)
    gh = np.ascontiguousarray(np.stack([g, h], axis=1))
    positions = np.zeros(len(g), dtype=np.int16)
    order0 = presort.orders[0]
    node_g = np.array([g[order0].sum()])
    node_h = np.array([h[order0].sum()])
    best_num = np.full(1, -np.inf)
    best_den = np.ones(1)
    best_feat = np.full(1, -1, dtype=np.int64)
    best_thr = np.zeros(1)
    best_gl = np.zeros(1)
    best_hl = np.zeros(1)
    _scan_level(
        presort.orders, presort.values, gh, positions, node_g, node_h,
        lam, min_child_weight, best_num, best_den, best_feat, best_thr,
        best_gl, best_hl,
    )
    if best_feat[0] < 0:
        return None
    gl, hl = best_gl[0], best_hl[0]
    gain = _gain_from_parts(
        gl, hl, node_g[0] - gl, node_h[0] - hl, node_g[0], node_h[0], lam, gamma
    )
    if gain <= 0.0:
        return None
    return (gain, int(best_feat[0]), float(best_thr[0]), float(gl), float(hl))


# --- training -------------------------------------------------------------

def _grow_tree(
    X: np.ndarray,
    gh: np.ndarray,
    presort: Presort,
    cfg: TrainConfig,
    leaf_of_row: np.ndarray,
) -> Tree:
    n_rows = X.shape[0]
    lam, gamma, mcw = cfg.reg_lambda, cfg.gamma, cfg.min_child_weight

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    cover: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(0.0)
        return len(feature) - 1

    positions = np.zeros(n_rows, dtype=np.int16)
    order0 = presort.orders[0]
    root_g = float(gh[order0, 0].sum())
    root_h = float(gh[order0, 1].sum())

    # per-level bookkeeping: active node slots map to tree node ids
    level_nodes = [new_node()]
    level_g = np.array([root_g])
    level_h = np.array([root_h])
    cover[0] = root_h

    for depth in range(cfg.max_depth + 1):
        n_active = len(level_nodes)
        if n_active == 0:
            break
        splittable = depth < cfg.max_depth
        chosen: list[tuple[float, int, float, float, float] | None] = [None] * n_active
        if splittable:
            best_num = np.full(n_active, -np.inf)
            best_den = np.ones(n_active)
            best_feat = np.full(n_active, -1, dtype=np.int64)
            best_thr = np.zeros(n_active)
            best_gl = np.zeros(n_active)
            best_hl = np.zeros(n_active)
            _scan_level(
                presort.orders, presort.values, gh, positions, level_g, level_h,
                lam, mcw, best_num, best_den, best_feat, best_thr, best_gl, best_hl,
            )
            for s in range(n_active):
                if best_feat[s] < 0:
                    continue
                gl, hl = float(best_gl[s]), float(best_hl[s])
                gain = _gain_from_parts(
                    gl, hl, level_g[s] - gl, level_h[s] - hl,
                    float(level_g[s]), float(level_h[s]), lam, gamma,
                )
                if gain > 0.0:
                    chosen[s] = (gain, int(best_feat[s]), float(best_thr[s]), gl, hl)

        act_feat = np.full(n_active, -1, dtype=np.int64)
        act_thr = np.zeros(n_active)
        act_left = np.full(n_active, -1, dtype=np.int64)
        act_right = np.full(n_active, -1, dtype=np.int64)
        act_leaf = np.full(n_active, -1, dtype=np.int64)

        next_nodes: list[int] = []
        next_g: list[float] = []
        next_h: list[float] = []
        for s, node_id in enumerate(level_nodes):
            pick = chosen[s]
            if pick is None:
                g_n, h_n = float(level_g[s]), float(level_h[s])
                value[node_id] = -g_n / (h_n + lam)
                act_leaf[s] = node_id
                continue
            _, f, thr, gl, hl = pick
            lid, rid = new_node(), new_node()
            feature[node_id] = f
            threshold[node_id] = thr
            left[node_id] = lid
            right[node_id] = rid
            cover[lid] = hl
            cover[rid] = float(level_h[s]) - hl
            act_feat[s] = f
            act_thr[s] = thr
            act_left[s] = len(next_nodes)
            act_right[s] = len(next_nodes) + 1
            next_nodes.extend((lid, rid))
            next_g.extend((gl, float(level_g[s]) - gl))
            next_h.extend((hl, float(level_h[s]) - hl))

        child_count = np.zeros(max(len(next_nodes), 1), dtype=np.int64)
        _apply_level(
            X, positions, leaf_of_row, act_feat, act_thr, act_left, act_right,
            act_leaf, child_count,
        )
        # a split that fails to move any row would loop forever at this depth;
        # the midpoint guard in the scan makes this unreachable
        level_nodes = next_nodes
        level_g = np.array(next_g)
        level_h = np.array(next_h)
        # node ids double as leaf ids in leaf_of_row
    return Tree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        default_left=np.ones(len(feature), dtype=bool),
        value=np.array(value),
        cover=np.array(cover),
    )


def train(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    feature_names: list[str] | None = None,
    presort: Presort | None = None,
) -> TreeEnsemble:
    """Fit cfg.rounds trees; records the per-round training log loss."""
    cfg.validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training matrix must be non-empty and 2-D")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"row mismatch: X has {X.shape[0]}, y has {y.shape[0]}")
    if np.isnan(X).any():
        raise ValueError("NaN features are not accepted at training time")
    if feature_names is not None and len(feature_names) != X.shape[1]:
        raise ValueError("feature_names length must match the matrix width")

    if presort is None:
        presort = presort_matrix(X)
    model = TreeEnsemble(
        config=cfg,
        base_score=cfg.base_score,
        learning_rate=cfg.learning_rate,
        n_features=X.shape[1],
        feature_names=list(feature_names) if feature_names else None,
    )

    n = X.shape[0]
    margins = np.full(n, model.base_margin())
    leaf_of_row = np.zeros(n, dtype=np.int64)
    model.train_loss.append(log_loss(y, sigmoid(margins)))
    for _ in range(cfg.rounds):
        p = sigmoid(margins)
        gh = np.ascontiguousarray(np.stack([p - y, p * (1.0 - p)], axis=1))
        tree = _grow_tree(X, gh, presort, cfg, leaf_of_row)
        model.trees.append(tree)
        margins += cfg.learning_rate * tree.value[leaf_of_row]
        model.train_loss.append(log_loss(y, sigmoid(margins)))
    return model


# --- prediction -----------------------------------------------------------

def _tree_leaf_index(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        feat = tree.feature[node]
        active = feat >= 0
        if not active.any():
            return node
        rows = np.nonzero(active)[0]
        f = feat[rows]
        xv = X[rows, f]
        go_left = np.where(
            np.isnan(xv), tree.default_left[node[rows]], xv < tree.threshold[node[rows]]
        )
        node[rows] = np.where(go_left, tree.left[node[rows]], tree.right[node[rows]])


def _as_batch(model: TreeEnsemble, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(
            f"input has {x.shape[-1] if x.ndim else 0} features, model expects {model.n_features}"
        )
    return x, single


def margin(model: TreeEnsemble, x: np.ndarray) -> np.ndarray | float:
    """Raw additive score before the sigmoid."""
    X, single = _as_batch(model, x)
    out = np.full(X.shape[0], model.base_margin())
    for tree in model.trees:
        out += model.learning_rate * tree.value[_tree_leaf_index(tree, X)]
    return float(out[0]) if single else out


def predict_proba(model: TreeEnsemble, x: np.ndarray) -> np.ndarray | float:
    """Probability of the positive class, in (0, 1)."""
    m = margin(model, x)
    if isinstance(m, float):
        return float(sigmoid(np.array([m]))[0])
    return sigmoid(m)


# --- serialization --------------------------------------------------------

def _render(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ModelFormatError(f"non-finite number in model: {obj}")
        return format(obj, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_render(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_render(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _preorder(tree: Tree) -> list[list]:
    """Node rows [feature, threshold, left, right, default_left, value, cover]
    with children reindexed into preorder positions."""
    rows: list[list] = []

    def visit(old: int) -> int:
        new = len(rows)
        rows.append(None)  # reserve
        if tree.feature[old] < 0:
            rows[new] = [-1, 0.0, -1, -1, True, float(tree.value[old]), float(tree.cover[old])]
        else:
            lid = visit(tree.left[old])
            rid = visit(tree.right[old])
            rows[new] = [
                int(tree.feature[old]), float(tree.threshold[old]), lid, rid,
                bool(tree.default_left[old]), 0.0, float(tree.cover[old]),
            ]
        return new

    visit(0)
    return rows


def serialize(model: TreeEnsemble) -> str:
    cfg = model.config
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": {
            "rounds": cfg.rounds,
            "max_depth": cfg.max_depth,
            "learning_rate": cfg.learning_rate,
            "min_child_weight": cfg.min_child_weight,
            "reg_lambda": cfg.reg_lambda,
            "gamma": cfg.gamma,
            "base_score": cfg.base_score,
            "seed": cfg.seed,
        },
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "n_features": model.n_features,
        "feature_names": model.feature_names,
        "trees": [{"nodes": _preorder(t)} for t in model.trees],
    }
    return _render(doc) + "\n"


def deserialize(text: str | bytes) -> TreeEnsemble:
    try:
        if isinstance(text, bytes):
            text = text.decode("utf-8", errors="strict")
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"unreadable model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a model file (missing format marker)")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"model file version {doc.get('version')!r} unsupported (expected {FORMAT_VERSION})"
        )
    try:
        cfg = TrainConfig(**doc["config"])
        trees = []
        for td in doc["trees"]:
            nodes = td["nodes"]
            k = len(nodes)
            tree = Tree(
                feature=np.array([n[0] for n in nodes], dtype=np.int32),
                threshold=np.array([float(n[1]) for n in nodes]),
                left=np.array([n[2] for n in nodes], dtype=np.int32),
                right=np.array([n[3] for n in nodes], dtype=np.int32),
                default_left=np.array([bool(n[4]) for n in nodes]),
                value=np.array([float(n[5]) for n in nodes]),
                cover=np.array([float(n[6]) for n in nodes]),
            )
            if k == 0:
                raise ValueError("tree with no nodes")
            trees.append(tree)
        model = TreeEnsemble(
            config=cfg,
            base_score=float(doc["base_score"]),
            learning_rate=float(doc["learning_rate"]),
            n_features=int(doc["n_features"]),
            feature_names=doc.get("feature_names"),
            trees=trees,
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"truncated or inconsistent model file: {exc}") from None
    return model


def save_model(model: TreeEnsemble, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(model))


def load_model(path) -> TreeEnsemble:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())
