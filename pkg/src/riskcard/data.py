"""Tabular dataset loading, splitting and fold assignment."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

RANDOM_FEATURE_PREFIX = "__random_"


class TaskKind(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"
    SURVIVAL = "survival"


class SchemaError(ValueError):
    """Header or column-role declaration does not match the file."""


class CellError(ValueError):
    """A cell failed to parse; carries 1-based row and column name."""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class ColumnSpec:
    """Role of one CSV column. ``index`` is the zero-based file position."""

    name: str
    role: str  # feature | target | event-indicator | ignore
    index: int


_ROLES = {"feature", "target", "event-indicator", "ignore"}


@dataclass
class Dataset:
    """Immutable numeric dataset; missing feature cells are NaN.

    ``values`` is an (n, p) float array over feature columns only.
    ``target`` holds class labels, continuous values, or survival times;
    ``events`` is the 0/1 indicator and is present only for survival.
    """

    feature_names: list[str]
    values: np.ndarray
    target: np.ndarray
    task: TaskKind
    events: np.ndarray | None = None
    columns: list[ColumnSpec] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if self.n < 2:
            raise ValueError(f"dataset needs at least 2 rows, got {self.n}")
        if self.values.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length does not match values width")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        if self.target.shape != (self.n,):
            raise ValueError("target length does not match row count")
        if not np.all(np.isfinite(self.target)):
            raise ValueError("target contains missing or non-finite values")
        if self.task == TaskKind.CLASSIFICATION:
            bad = set(np.unique(self.target)) - {0.0, 1.0}
            if bad:
                raise ValueError(f"binary target contains values outside {{0,1}}: {sorted(bad)}")
        if self.task == TaskKind.SURVIVAL:
            if self.events is None:
                raise ValueError("survival task requires an event indicator")
            self.events = np.asarray(self.events, dtype=np.int64)
            if self.events.shape != (self.n,):
                raise ValueError("event indicator length does not match row count")
            if set(np.unique(self.events)) - {0, 1}:
                raise ValueError("event indicator must be 0/1")
            if np.any(self.target <= 0):
                raise ValueError("survival times must be strictly positive")
        elif self.events is not None:
            raise ValueError("event indicator is only valid for survival tasks")
        # freeze the arrays; the dataset is shared across folds and threads
        for arr in (self.values, self.target, self.events):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            feature_names=list(self.feature_names),
            values=self.values[rows].copy(),
            target=self.target[rows].copy(),
            task=self.task,
            events=None if self.events is None else self.events[rows].copy(),
            columns=list(self.columns),
        )


@dataclass(frozen=True)
class FoldPlan:
    """Cross-validation assignments: one fold-index vector per repeat."""

    k: int
    repeats: int
    seed: int
    assignments: list[np.ndarray]


def _check_schema(columns: list[ColumnSpec]) -> tuple[list[ColumnSpec], ColumnSpec, ColumnSpec | None]:
    names = [c.name for c in columns]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    for c in columns:
        if c.role not in _ROLES:
            raise SchemaError(f"column {c.name!r} has unknown role {c.role!r}")
    targets = [c for c in columns if c.role == "target"]
    if len(targets) != 1:
        raise SchemaError(f"schema must declare exactly one target column, found {len(targets)}")
    events = [c for c in columns if c.role == "event-indicator"]
    if len(events) > 1:
        raise SchemaError("schema declares more than one event-indicator column")
    features = [c for c in columns if c.role == "feature"]
    if not features:
        raise SchemaError("schema declares no feature columns")
    return features, targets[0], events[0] if events else None


def schema_from_header(header: list[str], target: str, event: str | None = None,
                       ignore: tuple[str, ...] = ()) -> list[ColumnSpec]:
    """Assign roles to raw header names: one target, optional event column."""
    names = [h.strip() for h in header]
    if target not in names:
        raise SchemaError(f"target column {target!r} not in header")
    if event is not None and event not in names:
        raise SchemaError(f"event column {event!r} not in header")
    unknown = set(ignore) - set(names)
    if unknown:
        raise SchemaError(f"ignored columns not in header: {sorted(unknown)}")
    specs = []
    for i, name in enumerate(names):
        if name == target:
            role = "target"
        elif event is not None and name == event:
            role = "event-indicator"
        elif name in ignore:
            role = "ignore"
        else:
            role = "feature"
        specs.append(ColumnSpec(name=name, role=role, index=i))
    return specs


def load_csv(
    path,
    columns: list[ColumnSpec],
    missing_token: str = "",
    task: TaskKind | None = None,
) -> Dataset:
    """Load a numeric CSV according to a column-role schema.

    The header must contain every declared column name at its declared
    position. Feature cells equal to ``missing_token`` become NaN; the
    token is matched exactly, after stripping surrounding whitespace from
    the cell. Non-numeric cells raise :class:`CellError` with 1-based row
    and column coordinates. Targets and event indicators may not be
    missing.
    """
    features, target_col, event_col = _check_schema(columns)
    if task is None:
        task = TaskKind.SURVIVAL if event_col is not None else None
    if task == TaskKind.SURVIVAL and event_col is None:
        raise SchemaError("survival task requires an event-indicator column")

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        for c in columns:
            if c.index >= len(header):
                raise SchemaError(f"column {c.name!r} declared at position {c.index}, header has {len(header)} fields")
            if header[c.index].strip() != c.name:
                raise SchemaError(
                    f"column {c.name!r} expected at position {c.index}, header says {header[c.index]!r}"
                )

        def parse(cell: str, row_no: int, col: ColumnSpec, allow_missing: bool) -> float:
            cell = cell.strip()
            if cell == missing_token:
                if allow_missing:
                    return math.nan
                raise CellError(
                    f"row {row_no}, column {col.name!r}: missing value not allowed in {col.role} column",
                    row_no, col.name,
                )
            try:
                return float(cell)
            except ValueError:
                raise CellError(
                    f"row {row_no}, column {col.name!r}: cannot parse {cell!r} as a number",
                    row_no, col.name,
                ) from None

        rows, targets, events = [], [], []
        n_fields = len(header)
        for row_no, record in enumerate(reader, start=2):
            if len(record) != n_fields:
                raise CellError(
                    f"row {row_no}: expected {n_fields} fields, got {len(record)}",
                    row_no, "",
                )
            rows.append([parse(record[c.index], row_no, c, True) for c in features])
            targets.append(parse(record[target_col.index], row_no, target_col, False))
            if event_col is not None:
                events.append(parse(record[event_col.index], row_no, event_col, False))

    if not rows:
        raise SchemaError(f"{path}: no data rows")
    target = np.asarray(targets)
    if task is None:
        task = TaskKind.CLASSIFICATION if set(np.unique(target)) <= {0.0, 1.0} else TaskKind.REGRESSION
    return Dataset(
        feature_names=[c.name for c in features],
        values=np.asarray(rows),
        target=target,
        task=task,
        events=np.asarray(events) if event_col is not None else None,
        columns=list(columns),
    )


def write_csv(d: Dataset, path, missing_token: str = "") -> None:
    """Inverse of :func:`load_csv`; round-trips values bit-exactly."""

    def fmt(v: float) -> str:
        if math.isnan(v):
            return missing_token
        return repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [c.name for c in sorted(d.columns, key=lambda c: c.index)] if d.columns else None
        if header is None:
            header = d.feature_names + ["target"] + (["event"] if d.events is not None else [])
            writer.writerow(header)
            for i in range(d.n):
                row = [fmt(v) for v in d.values[i]] + [fmt(d.target[i])]
                if d.events is not None:
                    row.append(str(int(d.events[i])))
                writer.writerow(row)
            return
        writer.writerow(header)
        feat_pos = {c.name: j for j, c in enumerate(c2 for c2 in d.columns if c2.role == "feature")}
        for i in range(d.n):
            row = []
            for c in sorted(d.columns, key=lambda c: c.index):
                if c.role == "feature":
                    row.append(fmt(d.values[i, feat_pos[c.name]]))
                elif c.role == "target":
                    row.append(fmt(d.target[i]))
                elif c.role == "event-indicator":
                    row.append(str(int(d.events[i])))
                else:
                    row.append(missing_token)
            writer.writerow(row)


def _strata(d: Dataset) -> np.ndarray | None:
    """Class labels to stratify on, or None for plain shuffling."""
    if d.task == TaskKind.CLASSIFICATION:
        return d.target.astype(np.int64)
    if d.task == TaskKind.SURVIVAL:
        return d.events
    return None


def stratified_split(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split into train/test, preserving class balance where defined.

    Per-class test quotas use largest-remainder rounding so the overall
    test size equals round(n * test_fraction) exactly.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    strata = _strata(d)
    n_test = int(round(d.n * test_fraction))
    if n_test == 0 or n_test == d.n:
        raise ValueError(f"test_fraction {test_fraction} leaves an empty split for n={d.n}")

    if strata is None:
        order = rng.permutation(d.n)
        test_rows, train_rows = order[:n_test], order[n_test:]
    else:
        groups = [np.flatnonzero(strata == c) for c in np.unique(strata)]
        for g in groups:
            if len(g) < 2:
                raise ValueError("stratified split needs at least 2 rows per class")
        exact = [len(g) * test_fraction for g in groups]
        quota = [int(math.floor(e)) for e in exact]
        remainder = n_test - sum(quota)
        by_frac = sorted(range(len(groups)), key=lambda i: (-(exact[i] - quota[i]), i))
        for i in by_frac[:remainder]:
            quota[i] += 1
        test_parts, train_parts = [], []
        for g, q in zip(groups, quota):
            perm = g[rng.permutation(len(g))]
            test_parts.append(perm[:q])
            train_parts.append(perm[q:])
        test_rows = np.concatenate(test_parts)
        train_rows = np.concatenate(train_parts)
    return d.subset(np.sort(train_rows)), d.subset(np.sort(test_rows))


def make_folds(d: Dataset, k: int, repeats: int, seed: int) -> FoldPlan:
    """Assign rows to k folds, `repeats` times, stratified where defined.

    Within each repeat the rows of every class are shuffled and dealt
    round-robin, so per-fold class counts differ by at most one.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > d.n:
        raise ValueError(f"k={k} exceeds row count {d.n}")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    strata = _strata(d)
    if strata is not None:
        counts = np.bincount(strata)
        counts = counts[counts > 0]
        if np.any(counts < k):
            raise ValueError(f"every class needs at least k={k} rows for stratified folds")

    assignments = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        fold_of = np.empty(d.n, dtype=np.int64)
        if strata is None:
            order = rng.permutation(d.n)
            fold_of[order] = np.arange(d.n) % k
        else:
            # continue the round-robin deal across classes so overall fold
            # sizes stay within one of each other, not just per class
            offset = 0
            for c in np.unique(strata):
                rows = np.flatnonzero(strata == c)
                order = rows[rng.permutation(len(rows))]
                fold_of[order] = (np.arange(len(rows)) + offset) % k
                offset = (offset + len(rows)) % k
        assignments.append(fold_of)
    return FoldPlan(k=k, repeats=repeats, seed=seed, assignments=assignments)


def inject_random_features(d: Dataset, count: int, seed: int) -> Dataset:
    """Append `count` uniform(0,1) noise columns named __random_0.. .

    Used as a selection guard: any real feature ranking below pure noise
    is not worth keeping.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    names = [f"{RANDOM_FEATURE_PREFIX}{i}" for i in range(count)]
    clash = set(names) & set(d.feature_names)
    if clash:
        raise ValueError(f"random feature names already present: {sorted(clash)}")
    if count == 0:
        return d
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 1.0, size=(d.n, count))
    return Dataset(
        feature_names=list(d.feature_names) + names,
        values=np.hstack([d.values, noise]),
        target=d.target.copy(),
        task=d.task,
        events=None if d.events is None else d.events.copy(),
        columns=list(d.columns),
    )


def random_feature_names(d: Dataset) -> set[str]:
    return {n for n in d.feature_names if n.startswith(RANDOM_FEATURE_PREFIX)}
