"""Univariate regression trees that bin a feature by its attribution.

A small CART is grown on (feature value, attribution) pairs, pruned by
weakest-link cost complexity with the alpha chosen by cross-validation
and the one-standard-error rule, then pruned further until it has at
most `max_leaves` leaves. Leaves become the scorecard levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_SPLIT_GAIN = 1e-12


@dataclass
class IntervalRule:
    """Half-open interval (lower, upper]; infinities mark open ends."""

    lower: float
    upper: float
    lower_inclusive: bool = False
    upper_inclusive: bool = True
    covers_missing: bool = False

    def contains(self, v) -> np.ndarray:
        """Vectorized membership; NaN maps to covers_missing."""
        v = np.asarray(v, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            above = v >= self.lower if self.lower_inclusive else v > self.lower
            below = v <= self.upper if self.upper_inclusive else v < self.upper
        return np.where(np.isnan(v), self.covers_missing, above & below)

    def describe(self, feature: str, decimals: int = 1) -> str:
        def num(t):
            return f"{t:.{decimals}f}"

        parts = []
        if math.isfinite(self.upper):
            parts.append(f"{feature} {'<=' if self.upper_inclusive else '<'} {num(self.upper)}")
        if math.isfinite(self.lower):
            parts.append(f"{feature} {'>=' if self.lower_inclusive else '>'} {num(self.lower)}")
        if not parts:
            return f"{feature}: any value"
        return " & ".join(parts)


@dataclass
class BinNode:
    """Node of a binning tree; threshold None marks a leaf."""

    threshold: float | None = None
    default_left: bool = True  # route for missing values
    left: "BinNode | None" = None
    right: "BinNode | None" = None
    value: float = 0.0  # mean attribution of routed training rows
    count: int = 0
    sse: float = 0.0  # squared error of this node's rows around their mean
    leaf_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.threshold is None

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()

    def clone(self) -> "BinNode":
        c = BinNode(threshold=self.threshold, default_left=self.default_left,
                    value=self.value, count=self.count, sse=self.sse,
                    leaf_id=self.leaf_id)
        if not self.is_leaf:
            c.left = self.left.clone()
            c.right = self.right.clone()
        return c


@dataclass
class BinningTree:
    """Fitted binning of one feature, ready to become scorecard levels."""

    feature: str
    root: BinNode
    max_leaves: int
    ccp_alpha: float
    missing_seen: bool
    n_training_rows: int

    def leaves(self) -> list[BinNode]:
        out = []

        def visit(node):
            if node.is_leaf:
                out.append(node)
            else:
                visit(node.left)
                visit(node.right)

        visit(self.root)
        return out


def _sse_of(values: np.ndarray) -> float:
    if len(values) == 0:
        return 0.0
    return float(np.sum((values - values.mean()) ** 2))


def grow_tree(x: np.ndarray, phi: np.ndarray, max_depth: int, min_leaf: int) -> BinNode:
    """Greedy squared-error CART on one column.

    Split candidates are midpoints of adjacent distinct non-missing
    values; rows route left when x <= threshold. All missing rows move
    as one bundle, to whichever side scores better (exact ties keep
    them left). Nodes that never receive the bundle route future
    missing values toward the larger-count child (ties go left).
    """
    x = np.asarray(x, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if x.shape != phi.shape or x.ndim != 1:
        raise ValueError("x and phi must be equal-length vectors")
    miss = np.isnan(x)
    order = np.argsort(x[~miss], kind="stable")
    xs = x[~miss][order]
    ps = phi[~miss][order]
    pm = phi[miss]
    c1 = np.concatenate([[0.0], np.cumsum(ps)])
    c2 = np.concatenate([[0.0], np.cumsum(ps**2)])
    ms1, ms2, mn = float(pm.sum()), float((pm**2).sum()), len(pm)

    def stats(a, b, with_bundle):
        s = c1[b] - c1[a]
        q = c2[b] - c2[a]
        m = b - a
        if with_bundle:
            s, q, m = s + ms1, q + ms2, m + mn
        return s, q, m

    def build(a, b, bundle: bool, depth: int) -> BinNode:
        s, q, m = stats(a, b, bundle and mn > 0)
        mean = s / m if m else 0.0
        node = BinNode(value=float(mean), count=int(m),
                       sse=float(q - s * mean) if m else 0.0)
        if depth >= max_depth or m < 2 * min_leaf or b - a < 2:
            return node

        i = np.arange(a, b - 1)
        mids = 0.5 * (xs[i] + xs[i + 1])
        valid = (mids > xs[i]) & (mids < xs[i + 1])
        sl = c1[i + 1] - c1[a]
        ql = c2[i + 1] - c2[a]
        ml = (i + 1 - a).astype(np.float64)

        def side_sse(S, Q, M):
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(M > 0, Q - S * S / np.maximum(M, 1), 0.0)

        def reduction(bundle_left):
            SL, QL, ML = (sl + ms1, ql + ms2, ml + mn) if bundle_left else (sl, ql, ml)
            SR, QR, MR = s - SL, q - QL, m - ML
            ok = valid & (ML >= min_leaf) & (MR >= min_leaf)
            red = node.sse - side_sse(SL, QL, ML) - side_sse(SR, QR, MR)
            return np.where(ok, red, -np.inf)

        has_bundle = bundle and mn > 0
        red_left = reduction(True) if has_bundle else None
        red_right = reduction(False)
        if red_left is None:
            red, bundle_left_arr = red_right, np.zeros(len(i), dtype=bool)
        else:
            bundle_left_arr = red_left >= red_right  # ties keep the bundle left
            red = np.where(bundle_left_arr, red_left, red_right)

        best_pos = int(np.argmax(red))
        if not np.isfinite(red[best_pos]) or red[best_pos] <= MIN_SPLIT_GAIN:
            return node

        cut = a + best_pos
        bundle_left = bool(bundle_left_arr[best_pos]) if has_bundle else False
        node.threshold = float(mids[best_pos])
        node.left = build(a, cut + 1, has_bundle and bundle_left, depth + 1)
        node.right = build(cut + 1, b, has_bundle and not bundle_left, depth + 1)
        if has_bundle:
            node.default_left = bundle_left
        else:
            node.default_left = node.left.count >= node.right.count
        return node

    return build(0, len(xs), True, 0)


def _subtree_stats(node: BinNode) -> tuple[int, float]:
    """(leaf count, summed leaf SSE) below a node."""
    if node.is_leaf:
        return 1, node.sse
    ll, ls = _subtree_stats(node.left)
    rl, rs = _subtree_stats(node.right)
    return ll + rl, ls + rs


def _weakest_link_sequence(root: BinNode, n_total: int) -> list[tuple[float, BinNode]]:
    """Snapshots of the pruned tree at each strictly increasing alpha.

    First entry is (0, full tree); the last has the root collapsed to a
    single leaf. All links tied at the minimal strength collapse in the
    same step, so alphas are strictly increasing.
    """
    work = root.clone()
    snapshots = [(0.0, work.clone())]
    while not work.is_leaf:
        links: list[tuple[float, BinNode]] = []

        def visit(node):
            if node.is_leaf:
                return
            nl, s = _subtree_stats(node)
            links.append(((node.sse - s) / n_total / (nl - 1), node))
            visit(node.left)
            visit(node.right)

        visit(work)
        alpha = min(g for g, _ in links)
        for g, node in links:
            if g == alpha and not node.is_leaf:
                node.threshold = None
                node.left = None
                node.right = None
        if snapshots[-1][0] == alpha:
            snapshots[-1] = (alpha, work.clone())
        else:
            snapshots.append((alpha, work.clone()))
    return snapshots


def ccp_alpha_sequence(root: BinNode) -> list[tuple[float, int]]:
    """(alpha, leaf count) pairs along the weakest-link pruning path."""
    n_total = max(root.count, 1)
    return [(a, t.n_leaves()) for a, t in _weakest_link_sequence(root, n_total)]


def _snapshot_index_at(snapshots, alpha: float) -> int:
    """Index of the pruned tree in force at alpha (largest breakpoint <= alpha)."""
    idx = 0
    for k, (a, _) in enumerate(snapshots):
        if a <= alpha:
            idx = k
    return idx


def _route_ids(node: BinNode, values: np.ndarray) -> np.ndarray:
    """Leaf object ids (python id) per value; internal helper."""
    out = np.empty(len(values), dtype=np.int64)

    def rec(nd: BinNode, idx: np.ndarray, vals: np.ndarray):
        if nd.is_leaf:
            out[idx] = id(nd)
            return
        nan = np.isnan(vals)
        with np.errstate(invalid="ignore"):
            left = np.where(nan, nd.default_left, vals <= nd.threshold).astype(bool)
        rec(nd.left, idx[left], vals[left])
        rec(nd.right, idx[~left], vals[~left])

    rec(node, np.arange(len(values)), np.asarray(values, dtype=np.float64))
    return out


def predict_values(node: BinNode, values: np.ndarray) -> np.ndarray:
    """Leaf mean per value, vectorized; NaN follows the default route."""
    ids = _route_ids(node, values)
    out = np.empty(len(values))

    def visit(nd):
        if nd.is_leaf:
            out[ids == id(nd)] = nd.value
        else:
            visit(nd.left)
            visit(nd.right)

    visit(node)
    return out


def _route_node(node: BinNode, v: float) -> BinNode:
    while not node.is_leaf:
        if math.isnan(v):
            node = node.left if node.default_left else node.right
        else:
            node = node.left if v <= node.threshold else node.right
    return node


def route(tree: BinningTree, value) -> int:
    """Leaf id for a single value; None or NaN follows the missing route."""
    v = math.nan if value is None else float(value)
    return _route_node(tree.root, v).leaf_id


def _min_leaf_for(n: int) -> int:
    return max(math.ceil(0.01 * n), 5)


def fit_binning_tree(x, phi, max_leaves: int, cv_folds: int = 5, seed: int = 0,
                     feature: str = "x") -> BinningTree:
    """Grow, cross-validate, prune and label a binning tree.

    The depth cap floor(log2(max_leaves)) + 1 limits growth; weakest
    link pruning at the CV-selected alpha (one-standard-error rule,
    preferring the simpler tree) shrinks it; if more than `max_leaves`
    leaves survive, pruning continues down the alpha path until the
    bound holds. Leaf ids are assigned left to right, so they ascend
    with the interval order.
    """
    if max_leaves < 2:
        raise ValueError("max_leaves must be at least 2")
    if cv_folds < 2:
        raise ValueError("cv_folds must be at least 2")
    x = np.asarray(x, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if x.shape != phi.shape or x.ndim != 1:
        raise ValueError("x and phi must be equal-length vectors")
    n = len(x)
    max_depth = int(math.floor(math.log2(max_leaves))) + 1
    min_leaf = _min_leaf_for(n)

    full = grow_tree(x, phi, max_depth, min_leaf)
    snapshots = _weakest_link_sequence(full, n_total=max(n, 1))
    chosen_alpha = 0.0

    if len(snapshots) > 1:
        alphas = [a for a, _ in snapshots]
        candidates = [math.sqrt(alphas[k] * alphas[k + 1]) for k in range(len(alphas) - 1)]
        candidates.append(alphas[-1])

        rng = np.random.default_rng([seed, 7])
        fold_of = np.empty(n, dtype=np.int64)
        fold_of[rng.permutation(n)] = np.arange(n) % cv_folds
        fold_mse = np.zeros((cv_folds, len(candidates)))
        for f in range(cv_folds):
            tr = fold_of != f
            if tr.sum() < 2 or (~tr).sum() == 0:
                continue
            sub = grow_tree(x[tr], phi[tr], max_depth, _min_leaf_for(int(tr.sum())))
            sub_snaps = _weakest_link_sequence(sub, n_total=int(tr.sum()))
            xv, pv = x[~tr], phi[~tr]
            for ci, cand in enumerate(candidates):
                t = sub_snaps[_snapshot_index_at(sub_snaps, cand)][1]
                preds = predict_values(t, xv)
                fold_mse[f, ci] = float(np.mean((pv - preds) ** 2))
        cv_mean = fold_mse.mean(axis=0)
        best = int(np.argmin(cv_mean))
        se = float(fold_mse[:, best].std(ddof=1) / math.sqrt(cv_folds))
        limit = cv_mean[best] + se
        chosen_alpha = max(c for c, mse in zip(candidates, cv_mean) if mse <= limit)

    idx = _snapshot_index_at(snapshots, chosen_alpha)
    while snapshots[idx][1].n_leaves() > max_leaves and idx + 1 < len(snapshots):
        idx += 1
    alpha_used, pruned = snapshots[idx]

    tree = BinningTree(
        feature=feature,
        root=pruned.clone(),
        max_leaves=max_leaves,
        ccp_alpha=float(alpha_used),
        missing_seen=bool(np.isnan(x).any()),
        n_training_rows=n,
    )
    _finalize(tree, x, phi)
    return tree


def _finalize(tree: BinningTree, x: np.ndarray, phi: np.ndarray) -> None:
    """Assign leaf ids in order and recompute leaf stats from raw rows."""
    leaves = tree.leaves()
    for i, leaf in enumerate(leaves):
        leaf.leaf_id = i
    ids = _route_ids(tree.root, x)
    for leaf in leaves:
        rows = ids == id(leaf)
        leaf.count = int(rows.sum())
        if leaf.count:
            leaf.value = float(np.mean(phi[rows]))
            leaf.sse = _sse_of(phi[rows])


def extract_rules(tree: BinningTree) -> list[tuple[int, IntervalRule, float, int]]:
    """(leaf_id, interval, value, count), ordered by leaf id.

    Nested constraints on the same side collapse to the tightest bound;
    exactly one leaf covers missing values (the default route).
    """
    missing_leaf = _route_node(tree.root, math.nan)
    out = []

    def visit(node: BinNode, lower: float, upper: float):
        if node.is_leaf:
            rule = IntervalRule(
                lower=lower, upper=upper,
                lower_inclusive=False, upper_inclusive=True,
                covers_missing=node is missing_leaf,
            )
            out.append((node.leaf_id, rule, node.value, node.count))
            return
        visit(node.left, lower, min(upper, node.threshold))
        visit(node.right, max(lower, node.threshold), upper)

    visit(tree.root, -math.inf, math.inf)
    out.sort(key=lambda r: r[0])
    return out
