"""Ranking metrics and the cross-validated evaluation harness."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FoldPlan, TaskKind


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundary = np.empty(len(x), dtype=bool)
    boundary[0] = True
    boundary[1:] = xs[1:] != xs[:-1]
    group = np.cumsum(boundary) - 1
    first = np.flatnonzero(boundary)
    counts = np.diff(np.append(first, len(x)))
    # average of 1-based positions first..first+count-1
    avg = first + (counts + 1) / 2.0
    ranks = np.empty(len(x))
    ranks[order] = avg[group]
    return ranks


def roc_auc(labels, scores) -> float:
    """Area under the ROC curve via the rank-sum identity; ties count half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = _average_ranks(scores)
    rank_sum = ranks[labels > 0.5].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc(labels, scores) -> float:
    """Average precision: sum of precision-weighted recall increments."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    n_pos = labels.sum()
    if n_pos == 0:
        raise ValueError("pr_auc needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    y = labels[order]
    s = scores[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    # evaluate only at the last row of each tied-score block
    last = np.append(s[1:] != s[:-1], True)
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    d_recall = np.diff(np.append(0.0, recall))
    return float(np.sum(precision * d_recall))


def c_index(times, events, scores) -> float:
    """Harrell's concordance: higher score should mean earlier event.

    A pair (i, j) is comparable when t_i < t_j and the event occurred
    for i. Score ties count one half. O(n^2) in blocks.
    """
    scores = np.asarray(scores, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events)
    n = len(scores)
    if not (len(times) == len(events) == n):
        raise ValueError("times, events and scores must have equal length")
    concordant = 0.0
    comparable = 0
    block = max(1, int(2e6) // max(n, 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        ti = times[start:stop, None]
        ei = events[start:stop, None]
        si = scores[start:stop, None]
        comp = (ti < times[None, :]) & (ei == 1)
        comparable += int(comp.sum())
        concordant += float(np.sum(comp & (si > scores[None, :])))
        concordant += 0.5 * float(np.sum(comp & (si == scores[None, :])))
    if comparable == 0:
        raise ValueError("no comparable pairs for the concordance index")
    return concordant / comparable


@dataclass
class MetricReport:
    """Mean/spread of one metric across completed CV folds."""

    metric: str
    mean: float
    std: float
    per_fold: list[float]
    wall_time_seconds: float

    @classmethod
    def from_folds(cls, metric: str, values: list[float], wall: float) -> "MetricReport":
        arr = np.asarray(values, dtype=np.float64)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return cls(metric=metric, mean=float(arr.mean()), std=std,
                   per_fold=[float(v) for v in values], wall_time_seconds=wall)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean": self.mean,
            "std": self.std,
            "per_fold": self.per_fold,
            "wall_time_seconds": self.wall_time_seconds,
        }


@dataclass
class CrossValidationResult:
    reports: dict[str, MetricReport]
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
            "skipped": self.skipped,
        }


def _fold_metrics(task: TaskKind, tag: str, preds, val: Dataset) -> dict[str, float]:
    out = {}
    if task == TaskKind.CLASSIFICATION:
        out[f"{tag}_roc_auc"] = roc_auc(val.target, preds)
        out[f"{tag}_pr_auc"] = pr_auc(val.target, preds)
    elif task == TaskKind.REGRESSION:
        out[f"{tag}_mse"] = float(np.mean((np.asarray(preds, dtype=np.float64) - val.target) ** 2))
    else:
        out[f"{tag}_c_index"] = c_index(val.target, val.events, preds)
    return out


def _run_one_fold(args):
    d, config, fold_of, f, repeat = args
    from .pipeline import run_pipeline, score_rows

    train = d.subset(np.flatnonzero(fold_of != f))
    val = d.subset(np.flatnonzero(fold_of == f))
    label = f"repeat {repeat} fold {f}"
    if d.task == TaskKind.CLASSIFICATION and np.unique(val.target).size < 2:
        return label, None, 0.0, f"{label}: single-class validation fold, metrics undefined"
    if d.task == TaskKind.SURVIVAL and val.events.sum() == 0:
        return label, None, 0.0, f"{label}: no events in validation fold, metrics undefined"
    t0 = time.perf_counter()
    result = run_pipeline(train, config)
    totals, _ = score_rows(result.scorecard, val)
    base_preds = result.predict_margin_for(val)
    elapsed = time.perf_counter() - t0
    metrics = _fold_metrics(d.task, "scorecard", totals.astype(np.float64), val)
    metrics.update(_fold_metrics(d.task, "model", base_preds, val))
    metrics["pipeline_seconds"] = elapsed
    return label, metrics, elapsed, None


def cross_validate(d: Dataset, config, plan: FoldPlan, jobs: int = 1) -> CrossValidationResult:
    """Run the full train-explain-compress pipeline once per fold.

    The scorecard's integer totals are scored on the held-out fold and
    reported next to the underlying model's raw predictions. Folds where
    the validation metric is undefined are skipped with a warning entry.
    """
    tasks = []
    for repeat, fold_of in enumerate(plan.assignments):
        for f in range(plan.k):
            tasks.append((d, config, fold_of, f, repeat))

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one_fold, tasks))
    else:
        outcomes = [_run_one_fold(t) for t in tasks]

    per_metric: dict[str, list[float]] = {}
    skipped: list[str] = []
    total_wall = 0.0
    for label, metrics, elapsed, skip_reason in outcomes:
        total_wall += elapsed
        if skip_reason is not None:
            skipped.append(skip_reason)
            continue
        for k, v in metrics.items():
            per_metric.setdefault(k, []).append(v)

    reports = {
        name: MetricReport.from_folds(name, values, total_wall)
        for name, values in per_metric.items()
    }
    return CrossValidationResult(reports=reports, skipped=skipped)


@dataclass
class SweepRow:
    top_k: int
    max_leaves: int
    parameter_count: int
    metric: str
    value: float


def parsimony_sweep(d: Dataset, k_values, m_values, config, seed: int = 0) -> list[SweepRow]:
    """Grid over (top_k, max_leaves): score one held-out split per cell."""
    from dataclasses import replace

    from .data import stratified_split
    from .pipeline import run_pipeline, score_rows

    train, test = stratified_split(d, 0.2, seed=seed)
    rows = []
    for k in k_values:
        for m in m_values:
            cfg = replace(config, top_k=int(k), max_leaves=int(m))
            result = run_pipeline(train, cfg)
            totals, _ = score_rows(result.scorecard, test)
            metrics = _fold_metrics(d.task, "scorecard", totals.astype(np.float64), test)
            name = next(iter(metrics))
            n_levels = sum(len(f.levels) for f in result.scorecard.features)
            rows.append(SweepRow(
                top_k=int(k), max_leaves=int(m),
                parameter_count=n_levels,
                metric=name.removeprefix("scorecard_"),
                value=metrics[name],
            ))
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = ["top_k,max_leaves,parameter_count,metric,value"]
    for r in rows:
        lines.append(f"{r.top_k},{r.max_leaves},{r.parameter_count},{r.metric},{r.value!r}")
    return "\n".join(lines) + "\n"
