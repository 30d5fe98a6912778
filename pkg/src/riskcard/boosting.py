"""Newton-boosted regression trees with exact greedy splits.

Supports binary logistic, squared error and Cox partial likelihood
(Breslow ties) objectives, native missing-value routing and monotone
constraints via leaf-value clamping. Split search is vectorized across
features; child nodes inherit per-column sort order instead of
re-sorting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from .data import Dataset, TaskKind

# splits below this gain are float noise, not structure
MIN_GAIN = 1e-12
_PROB_CLAMP = 1e-6


class Objective(str, Enum):
    LOGISTIC = "binary-logistic"
    SQUARED = "squared-error"
    COX = "cox-partial-likelihood"


def objective_for_task(task: TaskKind) -> Objective:
    return {
        TaskKind.CLASSIFICATION: Objective.LOGISTIC,
        TaskKind.REGRESSION: Objective.SQUARED,
        TaskKind.SURVIVAL: Objective.COX,
    }[task]


def _sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m, dtype=np.float64)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _cox_breslow_terms(times, events, margin):
    """Per-row A_i, B_i sums and the shifted exp(margin), sorted back.

    A_i = sum over event times s <= t_i of d_s / R(s),
    B_i = same with R(s)^2, R(s) = sum of exp(margin) over rows with
    t_j >= s. Everything is computed with margin shifted by its max;
    the g/h and loss formulas are invariant to that shift.
    """
    order = np.argsort(times, kind="stable")
    ts, ev, ms = times[order], events[order], margin[order]
    e = np.exp(ms - ms.max())
    risk = np.cumsum(e[::-1])[::-1]  # risk[i] = sum_{j>=i} e_j
    uniq, start, inv = np.unique(ts, return_index=True, return_inverse=True)
    r_group = risk[start]  # R(s) per distinct time, ties share the set
    d_group = np.bincount(inv, weights=ev.astype(np.float64), minlength=len(uniq))
    a_cum = np.cumsum(d_group / r_group)
    b_cum = np.cumsum(d_group / r_group**2)
    res = []
    for v in (a_cum[inv], b_cum[inv], e, np.log(r_group)[inv]):
        out = np.empty(len(times))
        out[order] = v
        res.append(out)
    return tuple(res)  # A, B, shifted exp, log R(t_i)


def loss(objective: Objective, y, margin, events=None) -> float:
    """Total training loss; the quantity fit() drives down per round."""
    y = np.asarray(y, dtype=np.float64)
    margin = np.asarray(margin, dtype=np.float64)
    if objective == Objective.LOGISTIC:
        # log(1 + exp(-z)) with the stable branch, z = (2y-1) * margin
        z = np.where(y > 0.5, margin, -margin)
        return float(np.sum(np.logaddexp(0.0, -z)))
    if objective == Objective.SQUARED:
        return float(0.5 * np.sum((margin - y) ** 2))
    if objective == Objective.COX:
        if events is None:
            raise ValueError("cox loss requires an event indicator")
        events = np.asarray(events)
        if events.sum() == 0:
            raise ValueError("no events observed")
        shifted = margin - margin.max()
        _, _, _, logr = _cox_breslow_terms(y, events, margin)
        return float(-np.sum(events * (shifted - logr)))
    raise ValueError(f"unknown objective {objective}")


def grad_hess(objective: Objective, y, margin, events=None):
    """First and second derivatives of the loss w.r.t. the margin."""
    y = np.asarray(y, dtype=np.float64)
    margin = np.asarray(margin, dtype=np.float64)
    if objective == Objective.LOGISTIC:
        p = _sigmoid(margin)
        return p - y, p * (1.0 - p)
    if objective == Objective.SQUARED:
        return margin - y, np.ones_like(margin)
    if objective == Objective.COX:
        if events is None:
            raise ValueError("cox gradients require an event indicator")
        events = np.asarray(events, dtype=np.float64)
        if events.sum() == 0:
            raise ValueError("no events observed")
        A, B, e, _ = _cox_breslow_terms(y, events, margin)
        g = e * A - events
        h = e * A - e**2 * B
        return g, h
    raise ValueError(f"unknown objective {objective}")


def base_score(objective: Objective, y, events=None) -> float:
    y = np.asarray(y, dtype=np.float64)
    if objective == Objective.LOGISTIC:
        p = float(np.clip(y.mean(), _PROB_CLAMP, 1.0 - _PROB_CLAMP))
        return math.log(p / (1.0 - p))
    if objective == Objective.SQUARED:
        return float(y.mean())
    if objective == Objective.COX:
        if events is None or np.asarray(events).sum() == 0:
            raise ValueError("no events observed")
        return 0.0
    raise ValueError(f"unknown objective {objective}")


@dataclass
class Hyperparameters:
    n_estimators: int = 300
    max_depth: int = 6
    learning_rate: float = 0.1
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    monotone_constraints: dict = field(default_factory=dict)  # name -> -1|0|+1

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        for name in ("subsample", "colsample_bytree"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be non-negative")
        bad = {k: v for k, v in self.monotone_constraints.items() if v not in (-1, 0, 1)}
        if bad:
            raise ValueError(f"monotone constraints must be -1, 0 or +1: {bad}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        return cls(**d)


# search space for random_search_tune
TUNE_RANGES = {
    "n_estimators": (100, 1000),
    "max_depth": (3, 10),
    "learning_rate": (0.01, 0.3),
    "subsample": (0.8, 1.0),
    "colsample_bytree": (0.8, 1.0),
}


@dataclass
class TreeNode:
    """One node of a regression tree; leaves have feature None."""

    feature: int | None = None
    threshold: float = math.nan
    default_left: bool = False
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    leaf_value: float = 0.0
    cover: float = 0.0
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()

    def n_splits(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + self.left.n_splits() + self.right.n_splits()


@dataclass
class TreeArrays:
    """Preorder-flattened tree for vectorized routing."""

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    is_leaf: np.ndarray


def flatten_tree(root: TreeNode) -> TreeArrays:
    nodes: list[TreeNode] = []

    def visit(node):
        nodes.append(node)
        if not node.is_leaf:
            visit(node.left)
            visit(node.right)

    visit(root)
    index = {id(n): i for i, n in enumerate(nodes)}
    n = len(nodes)
    ta = TreeArrays(
        feature=np.full(n, -1, dtype=np.int32),
        threshold=np.full(n, np.nan),
        default_left=np.zeros(n, dtype=bool),
        left=np.full(n, -1, dtype=np.int32),
        right=np.full(n, -1, dtype=np.int32),
        value=np.zeros(n),
        cover=np.zeros(n),
        is_leaf=np.zeros(n, dtype=bool),
    )
    for i, node in enumerate(nodes):
        ta.cover[i] = node.cover
        if node.is_leaf:
            ta.is_leaf[i] = True
            ta.value[i] = node.leaf_value
        else:
            ta.feature[i] = node.feature
            ta.threshold[i] = node.threshold
            ta.default_left[i] = node.default_left
            ta.left[i] = index[id(node.left)]
            ta.right[i] = index[id(node.right)]
    return ta


def route_tree(ta: TreeArrays, X: np.ndarray) -> np.ndarray:
    """Leaf index (into the flat node list) for every row of X."""
    node = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        pending = np.flatnonzero(~ta.is_leaf[node])
        if pending.size == 0:
            return node
        nid = node[pending]
        xv = X[pending, ta.feature[nid]]
        go_left = np.where(np.isnan(xv), ta.default_left[nid], xv < ta.threshold[nid])
        node[pending] = np.where(go_left, ta.left[nid], ta.right[nid])


def _neg_obj(G, H, lam, lo, hi):
    """Structure score term G*w + (H+lam)*w^2/2 at the clamped optimum."""
    w = np.clip(-G / (H + lam), lo, hi)
    return G * w + 0.5 * (H + lam) * w * w, w


class _TreeGrower:
    """Grows one tree on pre-sorted columns; records leaf row sets."""

    def __init__(self, X, g, h, hp: Hyperparameters, constraints, col_map):
        self.X = X
        self.g = g
        self.h = h
        self.hp = hp
        self.constraints = constraints  # aligned to X columns
        self.col_map = col_map  # X column -> model feature index
        self.leaf_rows: list[tuple[np.ndarray, TreeNode]] = []

    def grow(self, sorted_idx) -> TreeNode:
        G = float(self.g.sum())
        H = float(self.h.sum())
        return self._node(sorted_idx, 0, G, H, -math.inf, math.inf)

    def _leaf(self, sorted_idx, G, H, lo, hi) -> TreeNode:
        lam = self.hp.reg_lambda
        w = float(np.clip(-G / (H + lam), lo, hi))
        node = TreeNode(leaf_value=self.hp.learning_rate * w, cover=H)
        self.leaf_rows.append((sorted_idx[:, 0].copy(), node))
        return node

    def _node(self, sorted_idx, depth, G, H, lo, hi) -> TreeNode:
        hp = self.hp
        m, pt = sorted_idx.shape
        if depth >= hp.max_depth or m < 2 or H < 2 * hp.min_child_weight:
            return self._leaf(sorted_idx, G, H, lo, hi)

        cols = np.arange(pt)
        Xs = self.X[sorted_idx, cols]  # (m, pt), each column value-sorted
        gs = self.g[sorted_idx]
        hs = self.h[sorted_idx]
        nan_mask = np.isnan(Xs)
        g_miss = np.where(nan_mask, gs, 0.0).sum(axis=0)
        h_miss = np.where(nan_mask, hs, 0.0).sum(axis=0)
        n_valid = m - nan_mask.sum(axis=0)

        cg = np.cumsum(gs, axis=0)
        ch = np.cumsum(hs, axis=0)
        lam = hp.reg_lambda
        parent_obj, _ = _neg_obj(np.float64(G), np.float64(H), lam, lo, hi)

        # candidate i splits between sorted positions i and i+1
        mids = 0.5 * (Xs[:-1] + Xs[1:])
        pos = np.arange(m - 1)[:, None]
        valid = (pos + 1 < n_valid[None, :]) & (mids > Xs[:-1]) & (mids < Xs[1:])

        best_gain = -math.inf
        best = None
        # option True: missing rows go left; option False: missing go right.
        # evaluated in (False, True) order so exact ties keep missing->right
        with np.errstate(all="ignore"):
            for missing_left in (False, True):
                GL = cg[:-1] + (g_miss[None, :] if missing_left else 0.0)
                HL = ch[:-1] + (h_miss[None, :] if missing_left else 0.0)
                GR = G - GL
                HR = H - HL
                ok = valid & (HL >= hp.min_child_weight) & (HR >= hp.min_child_weight)
                left_obj, wL = _neg_obj(GL, HL, lam, lo, hi)
                right_obj, wR = _neg_obj(GR, HR, lam, lo, hi)
                if self.constraints is not None:
                    c = self.constraints[None, :]
                    ok = ok & ~((c > 0) & (wL > wR)) & ~((c < 0) & (wL < wR))
                gain = np.where(ok, parent_obj - left_obj - right_obj, -math.inf)
                j_best = np.argmax(gain.max(axis=0))
                i_best = np.argmax(gain[:, j_best])
                gn = gain[i_best, j_best]
                if gn > best_gain:
                    best_gain = gn
                    best = (i_best, j_best, missing_left, wL[i_best, j_best], wR[i_best, j_best],
                            HL[i_best, j_best], HR[i_best, j_best])

        if best is None or best_gain <= MIN_GAIN:
            return self._leaf(sorted_idx, G, H, lo, hi)

        i, j, missing_left, wl, wr, hl, hr = best
        threshold = float(mids[i, j])
        gl = float(cg[i, j] + (g_miss[j] if missing_left else 0.0))
        gr = G - gl

        # membership of the left child in tree-row space
        goes_left = np.zeros(self.X.shape[0], dtype=bool)
        goes_left[sorted_idx[: i + 1, j]] = True
        if missing_left and n_valid[j] < m:
            goes_left[sorted_idx[n_valid[j]:, j]] = True
        mask = goes_left[sorted_idx]
        m_left = int(mask[:, 0].sum())
        left_idx = sorted_idx.T[mask.T].reshape(pt, m_left).T
        right_idx = sorted_idx.T[~mask.T].reshape(pt, m - m_left).T

        c_j = 0 if self.constraints is None else int(self.constraints[j])
        if c_j == 0:
            lb, lt, rb, rt = lo, hi, lo, hi
        else:
            mid = 0.5 * (wl + wr)
            if c_j > 0:
                lb, lt, rb, rt = lo, mid, mid, hi
            else:
                lb, lt, rb, rt = mid, hi, lo, mid

        node = TreeNode(
            feature=int(self.col_map[j]),
            threshold=threshold,
            default_left=bool(missing_left),
            cover=H,
            gain=float(best_gain),
        )
        node.left = self._node(left_idx, depth + 1, gl, float(hl), lb, lt)
        node.right = self._node(right_idx, depth + 1, gr, float(hr), rb, rt)
        return node


@dataclass
class GbtModel:
    """A fitted boosted ensemble plus everything needed to re-score."""

    objective: Objective
    base_score: float
    feature_names: list[str]
    trees: list[TreeNode]
    hyper: Hyperparameters
    seed: int
    degenerate: bool = False

    def __post_init__(self):
        self._flat_cache: list[TreeArrays] | None = None

    def _flat(self) -> list[TreeArrays]:
        if self._flat_cache is None or len(self._flat_cache) != len(self.trees):
            self._flat_cache = [flatten_tree(t) for t in self.trees]
        return self._flat_cache

    @property
    def n_effective_trees(self) -> int:
        return sum(1 for t in self.trees if not t.is_leaf)

    def predict_margin(self, x, n_trees: int | None = None):
        """Raw additive score; accepts one vector or an (n, p) matrix."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"expected {len(self.feature_names)} features, got {X.shape[1]}"
            )
        out = np.full(X.shape[0], self.base_score)
        flats = self._flat()
        if n_trees is not None:
            flats = flats[:n_trees]
        for ta in flats:
            out += ta.value[route_tree(ta, X)]
        return float(out[0]) if single else out

    def predict_probability(self, x):
        if self.objective != Objective.LOGISTIC:
            raise ValueError(f"probabilities undefined for objective {self.objective.value}")
        m = self.predict_margin(x)
        return float(_sigmoid(np.array([m]))[0]) if np.isscalar(m) else _sigmoid(m)

    def to_json(self) -> str:
        def node_dict(n: TreeNode) -> dict:
            if n.is_leaf:
                return {"leaf_value": n.leaf_value, "cover": n.cover}
            return {
                "feature": n.feature,
                "threshold": n.threshold,
                "default_left": n.default_left,
                "gain": n.gain,
                "cover": n.cover,
                "left": node_dict(n.left),
                "right": node_dict(n.right),
            }

        doc = {
            "format": "gbt-model",
            "version": 1,
            "objective": self.objective.value,
            "base_score": self.base_score,
            "feature_names": self.feature_names,
            "seed": self.seed,
            "degenerate": self.degenerate,
            "hyper": self.hyper.to_dict(),
            "trees": [node_dict(t) for t in self.trees],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        doc = json.loads(text)
        if doc.get("format") != "gbt-model":
            raise ValueError("not a gbt-model document")
        if doc.get("version") != 1:
            raise ValueError(f"unsupported model version {doc.get('version')}")

        def parse(nd: dict) -> TreeNode:
            if "feature" not in nd:
                return TreeNode(leaf_value=nd["leaf_value"], cover=nd["cover"])
            return TreeNode(
                feature=nd["feature"],
                threshold=nd["threshold"],
                default_left=nd["default_left"],
                gain=nd["gain"],
                cover=nd["cover"],
                left=parse(nd["left"]),
                right=parse(nd["right"]),
            )

        return cls(
            objective=Objective(doc["objective"]),
            base_score=doc["base_score"],
            feature_names=list(doc["feature_names"]),
            trees=[parse(t) for t in doc["trees"]],
            hyper=Hyperparameters.from_dict(doc["hyper"]),
            seed=doc["seed"],
            degenerate=doc["degenerate"],
        )


def _is_degenerate(objective: Objective, y) -> bool:
    if objective == Objective.COX:
        return False
    return np.unique(y).size < 2


def fit(d: Dataset, objective: Objective | None = None,
        hyper: Hyperparameters | None = None, seed: int = 0) -> GbtModel:
    """Boost trees on a dataset.

    Degenerate targets (single class, zero variance) produce a base-only
    model flagged ``degenerate``. Boosting also stops early if a round
    produces a no-op tree (single leaf, zero value), since every later
    round would repeat it.
    """
    if objective is None:
        objective = objective_for_task(d.task)
    hp = hyper if hyper is not None else Hyperparameters()
    X = d.values
    y = d.target
    events = d.events
    n, p = X.shape

    constraints = None
    if hp.monotone_constraints:
        unknown = set(hp.monotone_constraints) - set(d.feature_names)
        if unknown:
            raise ValueError(f"monotone constraints name unknown features: {sorted(unknown)}")
        constraints = np.array(
            [hp.monotone_constraints.get(f, 0) for f in d.feature_names], dtype=np.int64
        )

    base = base_score(objective, y, events)
    model = GbtModel(
        objective=objective,
        base_score=base,
        feature_names=list(d.feature_names),
        trees=[],
        hyper=hp,
        seed=seed,
    )
    if _is_degenerate(objective, y):
        model.degenerate = True
        return model

    margins = np.full(n, base)
    full_sorted = np.argsort(X, axis=0, kind="stable").astype(np.int32)  # NaN last
    n_sub = int(round(hp.subsample * n))
    n_col = max(1, int(round(hp.colsample_bytree * p)))

    for t in range(hp.n_estimators):
        g, h = grad_hess(objective, y, margins, events)
        rng = np.random.default_rng([seed, t])
        if n_sub < n:
            rows = np.sort(rng.permutation(n)[:n_sub])
        else:
            rows = None
        if n_col < p:
            cols = np.sort(rng.permutation(p)[:n_col])
        else:
            cols = None

        if rows is None and cols is None:
            Xt, gt, ht = X, g, h
            sorted_idx = full_sorted
            col_map = np.arange(p)
        else:
            r = slice(None) if rows is None else rows
            c = slice(None) if cols is None else cols
            Xt = X[r][:, c]
            gt, ht = g[r], h[r]
            sorted_idx = np.argsort(Xt, axis=0, kind="stable").astype(np.int32)
            col_map = np.arange(p) if cols is None else cols

        cons_t = None if constraints is None else constraints[col_map]
        grower = _TreeGrower(Xt, gt, ht, hp, cons_t, col_map)
        tree = grower.grow(sorted_idx)

        if tree.is_leaf and abs(tree.leaf_value) < 1e-15:
            break  # no-op round; nothing further to learn
        model.trees.append(tree)

        if rows is None:
            for ids, leaf in grower.leaf_rows:
                margins[ids] += leaf.leaf_value
        else:
            for ids, leaf in grower.leaf_rows:
                margins[rows[ids]] += leaf.leaf_value
            out = np.setdiff1d(np.arange(n), rows, assume_unique=False)
            if out.size:
                ta = flatten_tree(tree)
                margins[out] += ta.value[route_tree(ta, X[out])]
    return model


def _tune_metric(objective: Objective, margins, y, events) -> float:
    """Higher is better."""
    from .evaluation import c_index, roc_auc

    if objective == Objective.LOGISTIC:
        return roc_auc(y, margins)
    if objective == Objective.SQUARED:
        return -float(np.mean((margins - y) ** 2))
    return c_index(y, events, margins)


def random_search_tune(d: Dataset, objective: Objective | None = None,
                       budget: int = 20, folds: int = 3, seed: int = 0) -> Hyperparameters:
    """Seeded random search over the boosting ranges, scored by k-fold CV.

    Draw 0 is always the defaults, so the result never underperforms
    them on the CV estimate. Returns the winning configuration.
    """
    from .data import make_folds

    if objective is None:
        objective = objective_for_task(d.task)
    if budget < 1:
        return Hyperparameters()
    rng = np.random.default_rng([seed, 104729])
    candidates = [Hyperparameters()]
    for _ in range(budget - 1):
        lo, hi = TUNE_RANGES["learning_rate"]
        candidates.append(Hyperparameters(
            n_estimators=int(rng.integers(TUNE_RANGES["n_estimators"][0],
                                          TUNE_RANGES["n_estimators"][1] + 1)),
            max_depth=int(rng.integers(TUNE_RANGES["max_depth"][0],
                                       TUNE_RANGES["max_depth"][1] + 1)),
            learning_rate=float(np.exp(rng.uniform(np.log(lo), np.log(hi)))),
            subsample=float(rng.uniform(*TUNE_RANGES["subsample"])),
            colsample_bytree=float(rng.uniform(*TUNE_RANGES["colsample_bytree"])),
        ))

    plan = make_folds(d, k=folds, repeats=1, seed=seed)
    fold_of = plan.assignments[0]
    best_score, best = -math.inf, candidates[0]
    for hp in candidates:
        scores = []
        for f in range(folds):
            train = d.subset(np.flatnonzero(fold_of != f))
            val = d.subset(np.flatnonzero(fold_of == f))
            model = fit(train, objective, hp, seed=seed)
            margins = model.predict_margin(val.values)
            scores.append(_tune_metric(objective, margins, val.target, val.events))
        score = float(np.mean(scores))
        if score > best_score:
            best_score, best = score, hp
    return best
