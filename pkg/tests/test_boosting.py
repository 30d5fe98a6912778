import json
import math

import numpy as np
import pytest

from riskcard.boosting import (
    GbtModel,
    Hyperparameters,
    Objective,
    base_score,
    fit,
    flatten_tree,
    grad_hess,
    loss,
    random_search_tune,
    route_tree,
)
from riskcard.data import Dataset, TaskKind


def make_dataset(X, y, task=TaskKind.REGRESSION, events=None):
    return Dataset(
        feature_names=[f"f{j}" for j in range(X.shape[1])],
        values=X, target=y, task=task, events=events,
    )


# ---------------------------------------------------------------- gradients

class TestGradients:
    def test_logistic_point_values(self):
        g, h = grad_hess(Objective.LOGISTIC, np.array([1.0]), np.array([0.0]))
        assert g[0] == pytest.approx(-0.5)
        assert h[0] == pytest.approx(0.25)

    def test_squared_error_values(self):
        g, h = grad_hess(Objective.SQUARED, np.array([2.0, -1.0]), np.array([3.0, -1.0]))
        assert np.allclose(g, [1.0, 0.0])
        assert np.allclose(h, [1.0, 1.0])

    def test_cox_hand_derived_three_rows(self):
        # times (1,2,3), events (1,1,0), margins 0:
        # R(1)=3, R(2)=2; A=(1/3, 5/6, 5/6); B=(1/9, 13/36, 13/36)
        # g = A - delta, h = A - B
        times = np.array([1.0, 2.0, 3.0])
        events = np.array([1, 1, 0])
        m = np.zeros(3)
        g, h = grad_hess(Objective.COX, times, m, events)
        assert np.allclose(g, [1 / 3 - 1, 5 / 6 - 1, 5 / 6], atol=1e-12)
        assert np.allclose(h, [1 / 3 - 1 / 9, 5 / 6 - 13 / 36, 5 / 6 - 13 / 36], atol=1e-12)
        assert loss(Objective.COX, times, m, events) == pytest.approx(math.log(6.0))

    def _fd_check(self, objective, y, m, events=None):
        g, h = grad_hess(objective, y, m, events)
        eps = 1e-5
        for i in range(len(m)):
            mp, mm = m.copy(), m.copy()
            mp[i] += eps
            mm[i] -= eps
            fd_g = (loss(objective, y, mp, events) - loss(objective, y, mm, events)) / (2 * eps)
            assert abs(fd_g - g[i]) <= 1e-5 * max(1.0, abs(fd_g)), f"grad {i}"
            gp, _ = grad_hess(objective, y, mp, events)
            gm, _ = grad_hess(objective, y, mm, events)
            fd_h = (gp[i] - gm[i]) / (2 * eps)
            assert abs(fd_h - h[i]) <= 1e-4 * max(1.0, abs(fd_h)), f"hess {i}"

    def test_logistic_finite_differences(self):
        rng = np.random.default_rng(0)
        y = (rng.random(20) < 0.4).astype(float)
        m = rng.normal(scale=2.0, size=20)
        self._fd_check(Objective.LOGISTIC, y, m)

    def test_squared_finite_differences(self):
        rng = np.random.default_rng(1)
        self._fd_check(Objective.SQUARED, rng.normal(size=20), rng.normal(size=20))

    def test_cox_finite_differences_with_ties(self):
        rng = np.random.default_rng(2)
        times = np.round(rng.uniform(0.5, 4.0, size=20), 1)  # rounding forces ties
        events = (rng.random(20) < 0.6).astype(int)
        events[0] = 1
        m = rng.normal(scale=0.8, size=20)
        self._fd_check(Objective.COX, times, m, events)

    def test_cox_no_events_rejected(self):
        with pytest.raises(ValueError, match="no events"):
            grad_hess(Objective.COX, np.array([1.0, 2.0]), np.zeros(2), np.array([0, 0]))


class TestBaseScore:
    def test_logistic_log_odds(self):
        y = np.array([1.0, 1.0, 1.0, 0.0])
        assert base_score(Objective.LOGISTIC, y) == pytest.approx(math.log(3.0))

    def test_logistic_single_class_clamped(self):
        b = base_score(Objective.LOGISTIC, np.ones(5))
        assert b == pytest.approx(math.log((1 - 1e-6) / 1e-6))

    def test_squared_mean(self):
        assert base_score(Objective.SQUARED, np.array([1.0, 3.0])) == 2.0

    def test_cox_zero(self):
        assert base_score(Objective.COX, np.array([1.0, 2.0]), np.array([1, 0])) == 0.0


# ---------------------------------------------------------------- split search

def stump_oracle_gain(X, g, h, lam, mcw):
    """Best achievable gain over every (feature, midpoint, missing side)."""
    G, H = g.sum(), h.sum()
    parent = G * G / (H + lam)
    best = -math.inf
    for j in range(X.shape[1]):
        xj = X[:, j]
        miss = np.isnan(xj)
        vals = np.unique(xj[~miss])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = (a + b) / 2
            if not (a < thr < b):
                continue
            base_left = (xj < thr) & ~miss
            for missing_left in (False, True):
                left = base_left | (miss if missing_left else np.zeros_like(miss))
                GL, HL = g[left].sum(), h[left].sum()
                GR, HR = G - GL, H - HL
                if HL < mcw or HR < mcw:
                    continue
                gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent)
                best = max(best, gain)
    return best


def fit_one_stump(X, y, seed=0):
    d = make_dataset(X, y)
    hp = Hyperparameters(n_estimators=1, max_depth=1, learning_rate=1.0)
    return fit(d, Objective.SQUARED, hp, seed=seed)


class TestSplitSearch:
    @pytest.mark.parametrize("seed", range(15))
    def test_stump_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        n, p = rng.integers(6, 30), rng.integers(1, 4)
        X = np.round(rng.normal(size=(n, p)) * 3, 1)  # duplicates likely
        if seed % 2:
            X[rng.random(size=X.shape) < 0.25] = np.nan
        y = rng.normal(size=n)
        model = fit_one_stump(X, y, seed=seed)
        g = np.full(n, y.mean()) - y
        h = np.ones(n)
        oracle = stump_oracle_gain(X, g, h, lam=1.0, mcw=1.0)
        if oracle <= 1e-12:
            assert model.n_effective_trees == 0
            return
        root = model.trees[0]
        assert root.gain == pytest.approx(oracle, rel=1e-9, abs=1e-12)
        # the stored split must itself achieve the oracle gain
        xj = X[:, root.feature]
        miss = np.isnan(xj)
        left = np.where(miss, root.default_left, xj < root.threshold).astype(bool)
        GL, HL = g[left].sum(), h[left].sum()
        GR, HR = g[~left].sum(), h[~left].sum()
        gain = 0.5 * (GL**2 / (HL + 1) + GR**2 / (HR + 1) - (GL + GR) ** 2 / (HL + HR + 1))
        assert gain == pytest.approx(oracle, rel=1e-9, abs=1e-12)
        # Newton leaf values for that partition
        assert root.left.leaf_value == pytest.approx(-GL / (HL + 1), rel=1e-9)
        assert root.right.leaf_value == pytest.approx(-GR / (HR + 1), rel=1e-9)

    def test_thresholds_strictly_separate_node_rows(self):
        rng = np.random.default_rng(7)
        X = np.round(rng.normal(size=(80, 4)), 1)
        X[rng.random(size=X.shape) < 0.2] = np.nan
        y = rng.normal(size=80)
        d = make_dataset(X, y)
        model = fit(d, Objective.SQUARED, Hyperparameters(n_estimators=5, max_depth=4), seed=0)

        def walk(node, rows):
            if node.is_leaf:
                return
            xj = X[rows, node.feature]
            miss = np.isnan(xj)
            go_left = np.where(miss, node.default_left, xj < node.threshold).astype(bool)
            left_vals = xj[~miss & go_left]
            right_vals = xj[~miss & ~go_left]
            if left_vals.size:
                assert left_vals.max() < node.threshold
            if right_vals.size:
                assert right_vals.min() > node.threshold
            walk(node.left, rows[go_left])
            walk(node.right, rows[~go_left])

        for tree in model.trees:
            walk(tree, np.arange(80))

    def test_cover_additivity(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(120, 5))
        y = (rng.random(120) < 0.5).astype(float)
        d = make_dataset(X, y, TaskKind.CLASSIFICATION)
        model = fit(d, hyper=Hyperparameters(n_estimators=10, max_depth=4), seed=1)

        def walk(node):
            if node.is_leaf:
                return
            assert node.cover == pytest.approx(node.left.cover + node.right.cover, rel=1e-9)
            walk(node.left)
            walk(node.right)

        g, h = grad_hess(Objective.LOGISTIC, y, np.full(120, model.base_score))
        assert model.trees[0].cover == pytest.approx(h.sum(), rel=1e-12)
        for t in model.trees:
            walk(t)


class TestBoosting:
    def test_training_loss_never_increases(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(100, 4))
        logit = X[:, 0] - 0.5 * X[:, 1]
        y = (rng.random(100) < 1 / (1 + np.exp(-logit))).astype(float)
        d = make_dataset(X, y, TaskKind.CLASSIFICATION)
        model = fit(d, hyper=Hyperparameters(n_estimators=15, max_depth=3, learning_rate=0.3), seed=0)
        prev = loss(Objective.LOGISTIC, y, np.full(100, model.base_score))
        for k in range(1, len(model.trees) + 1):
            cur = loss(Objective.LOGISTIC, y, model.predict_margin(X, n_trees=k))
            assert cur <= prev + 1e-9
            prev = cur

    def test_monotone_constraints_hold(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(200, 3))
        y = 3 * X[:, 0] - 2 * X[:, 1] + 0.3 * rng.normal(size=200)
        d = make_dataset(X, y)
        hp = Hyperparameters(n_estimators=25, max_depth=4,
                             monotone_constraints={"f0": 1, "f1": -1})
        model = fit(d, Objective.SQUARED, hp, seed=2)
        assert model.n_effective_trees > 0
        for _ in range(300):
            x = rng.normal(size=3)
            delta = abs(rng.normal())
            up0 = x.copy()
            up0[0] += delta
            assert model.predict_margin(up0) >= model.predict_margin(x) - 1e-9
            up1 = x.copy()
            up1[1] += delta
            assert model.predict_margin(up1) <= model.predict_margin(x) + 1e-9

    def test_missing_values_route_and_predict_finite(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(150, 4))
        X[rng.random(size=X.shape) < 0.3] = np.nan
        y = np.where(np.nan_to_num(X[:, 0]) > 0, 1.0, 0.0)
        d = make_dataset(X, y, TaskKind.CLASSIFICATION)
        model = fit(d, hyper=Hyperparameters(n_estimators=10, max_depth=3), seed=0)
        test = rng.normal(size=(50, 4))
        test[rng.random(size=test.shape) < 0.5] = np.nan
        m = model.predict_margin(test)
        assert np.all(np.isfinite(m))
        all_nan = np.full((3, 4), np.nan)
        assert np.all(np.isfinite(model.predict_margin(all_nan)))

    def test_constant_target_yields_no_effective_trees(self):
        X = np.random.default_rng(0).normal(size=(50, 3))
        d = make_dataset(X, np.full(50, 0.1))
        model = fit(d, Objective.SQUARED, Hyperparameters(n_estimators=20), seed=0)
        assert model.degenerate
        assert model.n_effective_trees == 0
        assert model.predict_margin(X[0]) == pytest.approx(0.1)

    def test_single_class_binary_flagged(self):
        X = np.random.default_rng(1).normal(size=(30, 2))
        d = make_dataset(X, np.ones(30), TaskKind.CLASSIFICATION)
        model = fit(d, seed=0)
        assert model.degenerate and len(model.trees) == 0
        assert model.base_score == pytest.approx(math.log((1 - 1e-6) / 1e-6))

    def test_subsampled_fit_deterministic(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(200, 6))
        y = (X[:, 0] + rng.normal(size=200) > 0).astype(float)
        d = make_dataset(X, y, TaskKind.CLASSIFICATION)
        hp = Hyperparameters(n_estimators=12, max_depth=3, subsample=0.8, colsample_bytree=0.7)
        m1 = fit(d, hyper=hp, seed=9)
        m2 = fit(d, hyper=hp, seed=9)
        assert m1.to_json() == m2.to_json()
        m3 = fit(d, hyper=hp, seed=10)
        assert m1.to_json() != m3.to_json()

    def test_cox_fit_orders_risk(self):
        rng = np.random.default_rng(17)
        n = 150
        X = rng.normal(size=(n, 3))
        hazard = np.exp(1.5 * X[:, 0])
        times = rng.exponential(1.0 / hazard) + 0.01
        events = (rng.random(n) < 0.8).astype(int)
        d = make_dataset(X, times, TaskKind.SURVIVAL, events=events)
        model = fit(d, hyper=Hyperparameters(n_estimators=30, max_depth=3), seed=0)
        from riskcard.evaluation import c_index

        base = c_index(times, events, np.zeros(n) + 1e-9 * X[:, 1])
        fitted = c_index(times, events, model.predict_margin(X))
        assert fitted > max(base, 0.75)

    def test_cox_without_events_fails(self):
        X = np.random.default_rng(2).normal(size=(20, 2))
        d = make_dataset(X, np.abs(X[:, 0]) + 1, TaskKind.SURVIVAL,
                         events=np.zeros(20, dtype=int))
        with pytest.raises(ValueError, match="no events"):
            fit(d, seed=0)


class TestSerialization:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(90, 4))
        X[rng.random(size=X.shape) < 0.1] = np.nan
        y = (X[:, 0] > 0).astype(float)
        y[np.isnan(X[:, 0])] = 1.0
        d = make_dataset(X, y, TaskKind.CLASSIFICATION)
        model = fit(d, hyper=Hyperparameters(n_estimators=8, max_depth=4), seed=3)
        text = model.to_json()
        clone = GbtModel.from_json(text)
        assert clone.to_json() == text
        probe = rng.normal(size=(40, 4))
        probe[rng.random(size=probe.shape) < 0.3] = np.nan
        assert np.array_equal(model.predict_margin(probe), clone.predict_margin(probe))

    def test_rejects_other_documents(self):
        with pytest.raises(ValueError, match="not a gbt-model"):
            GbtModel.from_json(json.dumps({"format": "something-else"}))

    def test_probability_requires_logistic(self):
        X = np.random.default_rng(0).normal(size=(30, 2))
        d = make_dataset(X, X[:, 0])
        model = fit(d, Objective.SQUARED, Hyperparameters(n_estimators=2), seed=0)
        with pytest.raises(ValueError, match="probabilities"):
            model.predict_probability(X[0])

    def test_flatten_route_agrees_with_recursive_walk(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(60, 3))
        X[rng.random(size=X.shape) < 0.2] = np.nan
        y = rng.normal(size=60)
        model = fit(make_dataset(X, y), hyper=Hyperparameters(n_estimators=3, max_depth=4), seed=0)

        def walk(node, x):
            while not node.is_leaf:
                xv = x[node.feature]
                left = node.default_left if np.isnan(xv) else xv < node.threshold
                node = node.left if left else node.right
            return node.leaf_value

        for tree in model.trees:
            ta = flatten_tree(tree)
            got = ta.value[route_tree(ta, X)]
            want = np.array([walk(tree, x) for x in X])
            assert np.array_equal(got, want)


class TestTune:
    def test_budget_zero_returns_defaults(self):
        d = make_dataset(np.random.default_rng(0).normal(size=(40, 2)), np.arange(40, dtype=float))
        assert random_search_tune(d, budget=0) == Hyperparameters()

    def test_tune_is_seeded_and_improves_cv(self):
        rng = np.random.default_rng(30)
        X = rng.normal(size=(120, 4))
        y = (X[:, 0] + 0.5 * rng.normal(size=120) > 0).astype(float)
        d = make_dataset(X, y, TaskKind.CLASSIFICATION)
        a = random_search_tune(d, budget=3, folds=3, seed=5)
        b = random_search_tune(d, budget=3, folds=3, seed=5)
        assert a == b
        assert TUNE_OK(a)


def TUNE_OK(hp: Hyperparameters) -> bool:
    from riskcard.boosting import TUNE_RANGES

    checks = [
        TUNE_RANGES["n_estimators"][0] <= hp.n_estimators <= TUNE_RANGES["n_estimators"][1] or hp.n_estimators == 300,
        TUNE_RANGES["max_depth"][0] <= hp.max_depth <= TUNE_RANGES["max_depth"][1],
        TUNE_RANGES["learning_rate"][0] <= hp.learning_rate <= TUNE_RANGES["learning_rate"][1] or hp.learning_rate == 0.1,
        0.8 <= hp.subsample <= 1.0,
        0.8 <= hp.colsample_bytree <= 1.0,
    ]
    return all(checks)
