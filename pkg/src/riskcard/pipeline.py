"""One call from a dataset to a fitted model plus its scorecard.

The steps: optionally append noise features, optionally tune, boost,
attribute predictions to features, keep the strongest few, bin each
kept feature's attributions, scale the bins to integer points, and
calibrate the resulting totals on the training data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binning import fit_binning_tree
from .boosting import (
    GbtModel,
    Hyperparameters,
    fit,
    objective_for_task,
    random_search_tune,
)
from .data import Dataset, TaskKind, inject_random_features, random_feature_names
from .scorecard import (
    Scorecard,
    ScorecardFeature,
    build_levels,
    calibrate,
    scale_levels,
)
from .treeshap import ImportanceRanking, ShapMatrix, rank_features, select_top_k, shap_values


@dataclass
class PipelineConfig:
    top_k: int = 3
    max_leaves: int = 4
    s_max: int = 10
    n_random_features: int = 0
    tune_budget: int = 0
    seed: int = 0
    binning_cv_folds: int = 5
    calibration_bins: int = 10
    hyper: Hyperparameters | None = None

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be at least 2")
        if self.s_max < 1:
            raise ValueError("s_max must be at least 1")
        if self.n_random_features < 0:
            raise ValueError("n_random_features must be non-negative")
        if self.tune_budget < 0:
            raise ValueError("tune_budget must be non-negative")
        if self.binning_cv_folds < 2:
            raise ValueError("binning_cv_folds must be at least 2")
        if self.calibration_bins < 1:
            raise ValueError("calibration_bins must be at least 1")

    def to_dict(self) -> dict:
        d = {
            "top_k": self.top_k,
            "max_leaves": self.max_leaves,
            "s_max": self.s_max,
            "n_random_features": self.n_random_features,
            "tune_budget": self.tune_budget,
            "seed": self.seed,
            "binning_cv_folds": self.binning_cv_folds,
            "calibration_bins": self.calibration_bins,
            "hyperparameters": None if self.hyper is None else self.hyper.to_dict(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {"top_k", "max_leaves", "s_max", "n_random_features",
                 "tune_budget", "seed", "binning_cv_folds",
                 "calibration_bins", "hyperparameters"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in d.items() if k != "hyperparameters"}
        hyper = d.get("hyperparameters")
        if hyper is not None:
            kwargs["hyper"] = Hyperparameters.from_dict(hyper)
        return cls(**kwargs)


@dataclass
class PipelineResult:
    model: GbtModel
    scorecard: Scorecard
    ranking: ImportanceRanking
    shap: ShapMatrix
    config: PipelineConfig
    train_feature_names: list[str] = field(default_factory=list)

    def predict_margin_for(self, d: Dataset) -> np.ndarray:
        """Model margins for a dataset aligned by column name.

        Columns the model saw in training but the dataset lacks (for
        example appended noise features) are fed as missing.
        """
        cols = []
        have = set(d.feature_names)
        for name in self.model.feature_names:
            if name in have:
                cols.append(d.column(name))
            else:
                cols.append(np.full(d.n, np.nan))
        return self.model.predict_margin(np.column_stack(cols))


def score_rows(card: Scorecard, d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Score every dataset row against a card.

    Returns (totals, points) where points is an (n, n_card_features)
    integer matrix in card feature order.
    """
    absent = [f.name for f in card.features if f.name not in d.feature_names]
    if absent:
        raise ValueError(f"dataset lacks scorecard features: {', '.join(absent)}")
    points = np.zeros((d.n, len(card.features)), dtype=np.int64)
    for j, feat in enumerate(card.features):
        points[:, j] = feat.points_for(d.column(feat.name))
    return points.sum(axis=1), points


def run_pipeline(train: Dataset, config: PipelineConfig | None = None) -> PipelineResult:
    cfg = config if config is not None else PipelineConfig()
    d = inject_random_features(train, cfg.n_random_features, cfg.seed)
    objective = objective_for_task(d.task)

    hyper = cfg.hyper
    if cfg.tune_budget > 0:
        hyper = random_search_tune(d, objective, budget=cfg.tune_budget,
                                   seed=cfg.seed)
    model = fit(d, objective, hyper, seed=cfg.seed)

    shap = shap_values(model, d)
    ranking = rank_features(shap)
    ranking = select_top_k(ranking, cfg.top_k, random_feature_names(d))

    trees = []
    groups = []
    for idx in ranking.selected:
        name = d.feature_names[idx]
        tree = fit_binning_tree(d.column(name), shap.column(name),
                                max_leaves=cfg.max_leaves,
                                cv_folds=cfg.binning_cv_folds,
                                seed=cfg.seed, feature=name)
        trees.append(tree)
        groups.append(build_levels(name, tree))
    groups = scale_levels(groups, cfg.s_max)

    features = []
    for idx, tree, levels in zip(ranking.selected, trees, groups):
        features.append(ScorecardFeature(
            name=d.feature_names[idx],
            importance=float(ranking.importances[idx]),
            missing_seen=tree.missing_seen,
            levels=tuple(levels),
        ))

    card = Scorecard(
        task=d.task.value, s_max=cfg.s_max, features=features,
        provenance={
            "task": d.task.value,
            "objective": objective.value,
            "seed": cfg.seed,
            "n_training_rows": d.n,
            "top_k": cfg.top_k,
            "max_leaves": cfg.max_leaves,
            "n_random_features": cfg.n_random_features,
            "tune_budget": cfg.tune_budget,
            "halted_by": ranking.halted_by_random,
            "hyperparameters": model.hyper.to_dict(),
        })
    outcome = d.events if d.task == TaskKind.SURVIVAL else d.target
    columns = {f.name: d.column(f.name) for f in features}
    card.calibration = calibrate(card, columns, outcome,
                                 bins=cfg.calibration_bins)
    return PipelineResult(model=model, scorecard=card, ranking=ranking,
                          shap=shap, config=cfg,
                          train_feature_names=list(d.feature_names))
