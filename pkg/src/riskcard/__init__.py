"""Boosted-tree risk scorecards: train, explain, compress, serve."""

from .binning import BinningTree, IntervalRule, extract_rules, fit_binning_tree
from .boosting import GbtModel, Hyperparameters, Objective, fit, random_search_tune
from .data import (
    CellError,
    ColumnSpec,
    Dataset,
    FoldPlan,
    SchemaError,
    TaskKind,
    inject_random_features,
    load_csv,
    make_folds,
    schema_from_header,
    stratified_split,
    write_csv,
)
from .evaluation import (
    CrossValidationResult,
    MetricReport,
    c_index,
    cross_validate,
    parsimony_sweep,
    pr_auc,
    roc_auc,
    sweep_to_csv,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline, score_rows
from .scorecard import (
    Calibration,
    CalibrationBin,
    RiskLevel,
    Scorecard,
    ScorecardFeature,
    ScoreResult,
    build_levels,
    calibrate,
    export_scorecard,
    import_scorecard,
    scale_levels,
    score,
    score_totals,
    to_markdown,
)
from .service import create_app
from .treeshap import (
    ImportanceRanking,
    ShapMatrix,
    brute_force_shap,
    rank_features,
    select_top_k,
    shap_values,
)

__version__ = "0.1.0"

__all__ = [
    "BinningTree", "IntervalRule", "extract_rules", "fit_binning_tree",
    "GbtModel", "Hyperparameters", "Objective", "fit", "random_search_tune",
    "CellError", "ColumnSpec", "Dataset", "FoldPlan", "SchemaError",
    "TaskKind", "inject_random_features", "load_csv", "make_folds",
    "schema_from_header", "stratified_split", "write_csv",
    "CrossValidationResult", "MetricReport", "c_index", "cross_validate",
    "parsimony_sweep", "pr_auc", "roc_auc", "sweep_to_csv",
    "PipelineConfig", "PipelineResult", "run_pipeline", "score_rows",
    "Calibration", "CalibrationBin", "RiskLevel", "Scorecard",
    "ScorecardFeature", "ScoreResult", "build_levels", "calibrate",
    "export_scorecard", "import_scorecard", "scale_levels", "score",
    "score_totals", "to_markdown",
    "create_app",
    "ImportanceRanking", "ShapMatrix", "brute_force_shap", "rank_features",
    "select_top_k", "shap_values",
    "__version__",
]
