"""Exact per-feature Shapley attributions for boosted tree ensembles.

The conditioning convention is path-dependent: a feature outside the
coalition is averaged over both children weighted by training cover.
`shap_values` computes the exact decomposition in bulk; the quadratic
`brute_force_shap` enumerates coalitions directly and exists to verify
it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .boosting import GbtModel, TreeNode, flatten_tree
from .data import Dataset

MAX_BRUTE_FORCE_FEATURES = 12


@dataclass
class ShapMatrix:
    """Per-row, per-feature attributions plus the shared base value."""

    feature_names: list[str]
    values: np.ndarray  # (n, p)
    base_value: float

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]


@dataclass
class ImportanceRanking:
    """Global importances (mean |shap|) and the selection made from them."""

    feature_names: list[str]
    importances: np.ndarray
    order: list[int]  # feature indices, most important first
    selected: list[int]
    halted_by_random: str | None = None

    def ordered_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.order]

    def selected_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.selected]


def _coalition_weights(d: int) -> np.ndarray:
    """w[s] = s! (d-s-1)! / d! for s = 0..d-1."""
    fact = [math.factorial(i) for i in range(d + 1)]
    return np.array([fact[s] * fact[d - s - 1] / fact[d] for s in range(d)])


@dataclass
class _LeafBucket:
    """All leaves of one tree sharing the same distinct-feature count."""

    psi: np.ndarray        # (L, 2^D, D) value-scaled attribution templates
    features: np.ndarray   # (L, D) model feature index per slot
    entry_node: np.ndarray  # flat node index per path entry
    entry_sense: np.ndarray  # True if the path goes left at that node
    entry_leaf: np.ndarray
    entry_slot: np.ndarray
    entry_first: np.ndarray  # True for the first entry of each (leaf, slot)
    scatter: np.ndarray    # (L*D, p) one-hot accumulation matrix


@dataclass
class _TreePlan:
    arrays: object  # TreeArrays
    buckets: list[_LeafBucket]
    expected_value: float  # sum of leaf value * path cover product


def _collect_paths(ta) -> list[tuple[int, list[tuple[int, bool, int, float]]]]:
    """Per leaf: (leaf node index, [(node, went_left, feature, ratio)])."""
    out = []

    def visit(node: int, path):
        if ta.is_leaf[node]:
            out.append((node, list(path)))
            return
        cov = ta.cover[node]
        if cov <= 0:
            raise ValueError("non-positive cover on an internal node")
        for child, went_left in ((ta.left[node], True), (ta.right[node], False)):
            ratio = ta.cover[child] / cov
            path.append((node, went_left, int(ta.feature[node]), ratio))
            visit(int(child), path)
            path.pop()

    visit(0, [])
    return out


def _plan_tree(root: TreeNode, p: int) -> _TreePlan:
    ta = flatten_tree(root)
    if ta.cover[0] <= 0:
        raise ValueError("non-positive cover at the root")
    paths = _collect_paths(ta)

    expected = 0.0
    grouped: dict[int, list] = {}
    for leaf, path in paths:
        slots: dict[int, tuple[float, list]] = {}
        for node, went_left, feature, ratio in path:
            z, entries = slots.get(feature, (1.0, []))
            slots[feature] = (z * ratio, entries + [(node, went_left)])
        zprod = 1.0
        for z, _ in slots.values():
            zprod *= z
        expected += ta.value[leaf] * zprod
        d = len(slots)
        if d > 0:
            grouped.setdefault(d, []).append((ta.value[leaf], slots))

    buckets = []
    for d, leaves in sorted(grouped.items()):
        L = len(leaves)
        Z = np.empty((L, d))
        V = np.empty(L)
        feats = np.empty((L, d), dtype=np.int64)
        e_node, e_sense, e_leaf, e_slot, e_first = [], [], [], [], []
        for li, (value, slots) in enumerate(leaves):
            V[li] = value
            for si, (feature, (z, entries)) in enumerate(slots.items()):
                Z[li, si] = z
                feats[li, si] = feature
                for k, (node, went_left) in enumerate(entries):
                    e_node.append(node)
                    e_sense.append(went_left)
                    e_leaf.append(li)
                    e_slot.append(si)
                    e_first.append(k == 0)

        n_pat = 1 << d
        bits = ((np.arange(n_pat)[:, None] >> np.arange(d)[None, :]) & 1).astype(np.float64)
        w = _coalition_weights(d)
        psi = np.empty((L, n_pat, d))
        for j in range(d):
            # product over slots s != j of (z_s + bit_s * t), coeffs by degree
            coeff = np.zeros((L, n_pat, d))
            coeff[:, :, 0] = 1.0
            for s in range(d):
                if s == j:
                    continue
                zs = Z[:, s][:, None, None]
                bs = bits[:, s][None, :, None]
                shifted = np.zeros_like(coeff)
                shifted[:, :, 1:] = coeff[:, :, :-1]
                coeff = zs * coeff + bs * shifted
            weighted = coeff @ w  # (L, n_pat)
            psi[:, :, j] = V[:, None] * (bits[None, :, j] - Z[:, j][:, None]) * weighted

        scatter = np.zeros((L * d, p))
        scatter[np.arange(L * d), feats.reshape(-1)] = 1.0
        buckets.append(_LeafBucket(
            psi=psi,
            features=feats,
            entry_node=np.asarray(e_node, dtype=np.int64),
            entry_sense=np.asarray(e_sense, dtype=bool),
            entry_leaf=np.asarray(e_leaf, dtype=np.int64),
            entry_slot=np.asarray(e_slot, dtype=np.int64),
            entry_first=np.asarray(e_first, dtype=bool),
            scatter=scatter,
        ))
    return _TreePlan(arrays=ta, buckets=buckets, expected_value=expected)


def _node_directions(ta, X: np.ndarray) -> np.ndarray:
    """(n, nodes) bool: would each row go left at each internal node."""
    feat = np.where(ta.is_leaf, 0, ta.feature)
    xv = X[:, feat]
    with np.errstate(invalid="ignore"):
        dirs = xv < ta.threshold[None, :]
    nan = np.isnan(xv)
    if nan.any():
        dirs = np.where(nan, ta.default_left[None, :], dirs)
    return dirs


def shap_values(model: GbtModel, data) -> ShapMatrix:
    """Exact Shapley attribution of every margin onto the features.

    Accepts a Dataset or a raw (n, p) array with NaN for missing. For a
    base-only model returns an all-zero matrix. The sum of each row plus
    ``base_value`` reproduces the model margin exactly (float error
    aside).
    """
    X = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ValueError(
            f"data has {X.shape[1] if X.ndim == 2 else 'bad'} columns, "
            f"model expects {len(model.feature_names)}"
        )
    n, p = X.shape
    phi = np.zeros((n, p))
    base = model.base_score

    plans = [_plan_tree(t, p) for t in model.trees]
    pow2 = {}

    chunk = max(1, int(2_000_000 // max(1, p * 8)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        Xc = X[start:stop]
        nc = stop - start
        for plan in plans:
            if not plan.buckets:
                continue
            dirs = _node_directions(plan.arrays, Xc)
            for b in plan.buckets:
                L, n_pat, d = b.psi.shape
                if d not in pow2:
                    pow2[d] = (1 << np.arange(d)).astype(np.float64)
                match = dirs[:, b.entry_node] == b.entry_sense[None, :]
                omega = np.empty((nc, L, d), dtype=bool)
                first = b.entry_first
                omega[:, b.entry_leaf[first], b.entry_slot[first]] = match[:, first]
                extra = ~first
                if extra.any():
                    for e in np.flatnonzero(extra):
                        omega[:, b.entry_leaf[e], b.entry_slot[e]] &= match[:, e]
                pid = (omega @ pow2[d]).astype(np.int64)  # (nc, L)
                contrib = b.psi[np.arange(L)[None, :, None], pid[:, :, None],
                                np.arange(d)[None, None, :]]
                phi[start:stop] += contrib.reshape(nc, L * d) @ b.scatter

    phi0 = base + sum(plan.expected_value for plan in plans)
    return ShapMatrix(feature_names=list(model.feature_names), values=phi, base_value=phi0)


def _tree_features(node: TreeNode, acc: set):
    if node.is_leaf:
        return acc
    acc.add(node.feature)
    _tree_features(node.left, acc)
    _tree_features(node.right, acc)
    return acc


def _expvalue(node: TreeNode, x: np.ndarray, coalition: frozenset) -> float:
    if node.is_leaf:
        return node.leaf_value
    if node.feature in coalition:
        xv = x[node.feature]
        left = node.default_left if np.isnan(xv) else xv < node.threshold
        return _expvalue(node.left if left else node.right, x, coalition)
    if node.cover <= 0:
        raise ValueError("non-positive cover on an internal node")
    wl = node.left.cover / node.cover
    wr = node.right.cover / node.cover
    return wl * _expvalue(node.left, x, coalition) + wr * _expvalue(node.right, x, coalition)


def brute_force_shap(model: GbtModel, x) -> np.ndarray:
    """Shapley values by direct coalition enumeration; O(2^u), u <= 12.

    Verification oracle for :func:`shap_values`; never used in the
    pipeline itself.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != len(model.feature_names):
        raise ValueError("x must be a single feature vector matching the model")
    used = sorted(set().union(*[_tree_features(t, set()) for t in model.trees]) or set())
    u = len(used)
    if u > MAX_BRUTE_FORCE_FEATURES:
        raise ValueError(
            f"brute force limited to {MAX_BRUTE_FORCE_FEATURES} distinct features, tree uses {u}"
        )
    phi = np.zeros(len(model.feature_names))
    if u == 0:
        return phi

    def value(coalition: frozenset) -> float:
        return sum(_expvalue(t, x, coalition) for t in model.trees)

    fact = [math.factorial(i) for i in range(u + 1)]
    members = list(used)
    for j in members:
        others = [f for f in members if f != j]
        for mask in range(1 << (u - 1)):
            S = frozenset(f for b, f in enumerate(others) if mask >> b & 1)
            s = len(S)
            w = fact[s] * fact[u - s - 1] / fact[u]
            phi[j] += w * (value(S | {j}) - value(S))
    return phi


def rank_features(shap: ShapMatrix) -> ImportanceRanking:
    """Order features by mean |attribution|, ties by ascending index."""
    importances = np.abs(shap.values).mean(axis=0)
    order = list(np.argsort(-importances, kind="stable"))
    return ImportanceRanking(
        feature_names=list(shap.feature_names),
        importances=importances,
        order=[int(i) for i in order],
        selected=[],
        halted_by_random=None,
    )


def select_top_k(ranking: ImportanceRanking, k: int,
                 random_names: set[str] | None = None) -> ImportanceRanking:
    """Take the top k of the ranking, stopping at the first noise feature.

    Raises if nothing is collected before a noise feature appears: the
    model found no feature more informative than random numbers.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    random_names = random_names or set()
    selected: list[int] = []
    halted = None
    for idx in ranking.order:
        name = ranking.feature_names[idx]
        if name in random_names:
            halted = name
            break
        selected.append(idx)
        if len(selected) == k:
            break
    if not selected:
        raise ValueError(
            "no informative features: a random feature outranks every real one"
        )
    return replace(ranking, selected=selected, halted_by_random=halted)
