import numpy as np
import pytest

from riskcard.data import (
    CellError,
    ColumnSpec,
    Dataset,
    SchemaError,
    TaskKind,
    inject_random_features,
    load_csv,
    make_folds,
    stratified_split,
    write_csv,
)


def schema(names, target="y", event=None, ignore=()):
    cols = []
    for i, n in enumerate(names):
        if n == target:
            role = "target"
        elif n == event:
            role = "event-indicator"
        elif n in ignore:
            role = "ignore"
        else:
            role = "feature"
        cols.append(ColumnSpec(name=n, role=role, index=i))
    return cols


def toy_dataset(n=20, p=3, seed=0, task=TaskKind.CLASSIFICATION):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    if task == TaskKind.CLASSIFICATION:
        y = (np.arange(n) % 2).astype(float)
    elif task == TaskKind.REGRESSION:
        y = rng.normal(size=n)
    else:
        y = rng.uniform(0.5, 5.0, size=n)
    ev = (np.arange(n) % 2) if task == TaskKind.SURVIVAL else None
    return Dataset(
        feature_names=[f"f{j}" for j in range(p)],
        values=X,
        target=y,
        task=task,
        events=ev,
    )


class TestLoadCsv:
    def test_basic_load_with_missing(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b,y\n1.5,,0\n2.0,3.5,1\n,4.0,0\n")
        d = load_csv(f, schema(["a", "b", "y"]))
        assert d.task == TaskKind.CLASSIFICATION
        assert d.feature_names == ["a", "b"]
        assert np.isnan(d.values[0, 1]) and np.isnan(d.values[2, 0])
        assert d.values[1, 0] == 2.0
        assert list(d.target) == [0.0, 1.0, 0.0]

    def test_custom_missing_token(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,y\nNA,0\n7,1\n")
        d = load_csv(f, schema(["a", "y"]), missing_token="NA")
        assert np.isnan(d.values[0, 0])

    def test_header_mismatch_names_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,z\n1,0\n2,1\n")
        with pytest.raises(SchemaError, match="'y'"):
            load_csv(f, schema(["a", "y"]))

    def test_bad_cell_reports_row_and_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,y\n1,0\noops,1\n")
        with pytest.raises(CellError, match="row 3.*'a'") as err:
            load_csv(f, schema(["a", "y"]))
        assert err.value.row == 3
        assert err.value.column == "a"

    def test_missing_target_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,y\n1,0\n2,\n")
        with pytest.raises(CellError, match="target"):
            load_csv(f, schema(["a", "y"]))

    def test_ignore_column_skipped(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("id,a,y\nX1,1,0\nX2,2,1\n")
        d = load_csv(f, schema(["id", "a", "y"], ignore=("id",)))
        assert d.feature_names == ["a"]

    def test_survival_load(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,t,e\n1,5.0,1\n2,3.0,0\n")
        d = load_csv(f, schema(["a", "t", "e"], target="t", event="e"))
        assert d.task == TaskKind.SURVIVAL
        assert list(d.events) == [1, 0]

    def test_two_targets_rejected(self):
        cols = [ColumnSpec("a", "target", 0), ColumnSpec("b", "target", 1)]
        with pytest.raises(SchemaError, match="exactly one target"):
            load_csv("/nonexistent", cols)

    def test_regression_inferred(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,y\n1,2.5\n2,3.5\n")
        d = load_csv(f, schema(["a", "y"]))
        assert d.task == TaskKind.REGRESSION

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
        with open(f1, "w") as fh:
            fh.write("a,b,y\n")
            for i in range(50):
                a = repr(float(rng.normal() * 10.0 ** rng.integers(-8, 8))) if rng.random() > 0.2 else ""
                fh.write(f"{a},{float(rng.normal())!r},{i % 2}\n")
        d1 = load_csv(f1, schema(["a", "b", "y"]))
        write_csv(d1, f2)
        d2 = load_csv(f2, schema(["a", "b", "y"]))
        assert np.array_equal(d1.values, d2.values, equal_nan=True)
        assert np.array_equal(d1.target, d2.target)


class TestDatasetInvariants:
    def test_single_row_rejected(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            Dataset(["a"], np.array([[1.0]]), np.array([0.0]), TaskKind.CLASSIFICATION)

    def test_nonbinary_labels_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            Dataset(["a"], np.zeros((3, 1)), np.array([0.0, 1.0, 2.0]), TaskKind.CLASSIFICATION)

    def test_nonpositive_times_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            Dataset(["a"], np.zeros((2, 1)), np.array([0.0, 1.0]), TaskKind.SURVIVAL,
                    events=np.array([1, 0]))

    def test_values_are_frozen(self):
        d = toy_dataset()
        with pytest.raises(ValueError):
            d.values[0, 0] = 99.0


class TestStratifiedSplit:
    def test_spec_counts_small(self):
        # 10 rows, 5 per class, 0.2 -> test has exactly 1 of each class
        d = toy_dataset(n=10)
        tr, te = stratified_split(d, 0.2, seed=1)
        assert te.n == 2 and tr.n == 8
        assert te.target.sum() == 1.0

    def test_large_balance_and_size(self):
        rng = np.random.default_rng(3)
        y = (rng.random(1000) < 0.3).astype(float)
        d = Dataset(["a"], rng.normal(size=(1000, 1)), y, TaskKind.CLASSIFICATION)
        tr, te = stratified_split(d, 0.2, seed=5)
        assert te.n == 200
        global_rate = y.mean()
        assert abs(tr.target.mean() - global_rate) < 0.01
        assert abs(te.target.mean() - global_rate) < 0.01

    def test_deterministic(self):
        d = toy_dataset(n=40)
        a = stratified_split(d, 0.25, seed=9)
        b = stratified_split(d, 0.25, seed=9)
        assert np.array_equal(a[0].values, b[0].values)
        assert np.array_equal(a[1].values, b[1].values)

    def test_disjoint_and_complete(self):
        d = toy_dataset(n=30, p=1)
        tr, te = stratified_split(d, 0.3, seed=2)
        merged = np.sort(np.concatenate([tr.values[:, 0], te.values[:, 0]]))
        assert np.array_equal(merged, np.sort(d.values[:, 0]))

    def test_tiny_class_rejected(self):
        y = np.array([0.0] * 9 + [1.0])
        d = Dataset(["a"], np.arange(10, dtype=float).reshape(-1, 1), y, TaskKind.CLASSIFICATION)
        with pytest.raises(ValueError, match="2 rows per class"):
            stratified_split(d, 0.2, seed=0)

    def test_bad_fraction(self):
        with pytest.raises(ValueError, match="in \\(0, 1\\)"):
            stratified_split(toy_dataset(), 1.5, seed=0)


class TestMakeFolds:
    def test_fold_sizes_within_one(self):
        d = toy_dataset(n=103)
        plan = make_folds(d, k=5, repeats=2, seed=4)
        assert len(plan.assignments) == 2
        for fold_of in plan.assignments:
            sizes = np.bincount(fold_of, minlength=5)
            assert sizes.max() - sizes.min() <= 1
            # class balance per fold
            for f in range(5):
                pos = d.target[fold_of == f].sum()
                neg = (fold_of == f).sum() - pos
                assert abs(pos - neg) <= 1

    def test_leave_one_out(self):
        d = toy_dataset(n=12, task=TaskKind.REGRESSION)
        plan = make_folds(d, k=12, repeats=1, seed=0)
        assert sorted(plan.assignments[0]) == list(range(12))

    def test_k_exceeds_n(self):
        with pytest.raises(ValueError, match="exceeds"):
            make_folds(toy_dataset(n=5), k=6, repeats=1, seed=0)

    def test_class_smaller_than_k(self):
        y = np.array([0.0] * 17 + [1.0] * 3)
        d = Dataset(["a"], np.arange(20, dtype=float).reshape(-1, 1), y, TaskKind.CLASSIFICATION)
        with pytest.raises(ValueError, match="at least k"):
            make_folds(d, k=5, repeats=1, seed=0)

    def test_repeats_differ_but_seeded(self):
        d = toy_dataset(n=50)
        p1 = make_folds(d, k=5, repeats=2, seed=11)
        p2 = make_folds(d, k=5, repeats=2, seed=11)
        assert np.array_equal(p1.assignments[0], p2.assignments[0])
        assert np.array_equal(p1.assignments[1], p2.assignments[1])
        assert not np.array_equal(p1.assignments[0], p1.assignments[1])

    def test_survival_stratifies_on_events(self):
        d = toy_dataset(n=40, task=TaskKind.SURVIVAL)
        plan = make_folds(d, k=4, repeats=1, seed=2)
        for f in range(4):
            ev = d.events[plan.assignments[0] == f]
            assert abs(ev.sum() - (len(ev) - ev.sum())) <= 1


class TestInjectRandomFeatures:
    def test_names_and_range(self):
        d = toy_dataset(n=25, p=2)
        d2 = inject_random_features(d, 3, seed=8)
        assert d2.feature_names == ["f0", "f1", "__random_0", "__random_1", "__random_2"]
        noise = d2.values[:, 2:]
        assert noise.min() >= 0.0 and noise.max() <= 1.0
        assert np.array_equal(d2.values[:, :2], d.values)

    def test_seeded(self):
        d = toy_dataset()
        a = inject_random_features(d, 2, seed=5)
        b = inject_random_features(d, 2, seed=5)
        assert np.array_equal(a.values, b.values)

    def test_count_zero_identity(self):
        d = toy_dataset()
        d2 = inject_random_features(d, 0, seed=5)
        assert d2.feature_names == d.feature_names
        assert np.array_equal(d2.values, d.values)

    def test_collision_rejected(self):
        d = toy_dataset()
        d2 = inject_random_features(d, 1, seed=0)
        with pytest.raises(ValueError, match="already present"):
            inject_random_features(d2, 1, seed=0)
