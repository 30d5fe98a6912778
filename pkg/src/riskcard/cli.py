"""Command line entry points: train, score, evaluate, sweep, export, serve."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .data import SchemaError, TaskKind, load_csv, make_folds, schema_from_header
from .evaluation import cross_validate, parsimony_sweep, sweep_to_csv
from .pipeline import PipelineConfig, run_pipeline
from .scorecard import export_scorecard, import_scorecard, to_markdown

log = logging.getLogger("riskcard")


def _add_data_args(p: argparse.ArgumentParser, need_target: bool = True) -> None:
    p.add_argument("--data", required=True, help="input CSV path")
    if need_target:
        p.add_argument("--target", required=True, help="target column name")
        p.add_argument("--event", default=None,
                       help="event indicator column (survival data)")
        p.add_argument("--ignore", default="",
                       help="comma-separated columns to drop")
        p.add_argument("--task", default=None,
                       choices=[t.value for t in TaskKind],
                       help="override the inferred task")
    p.add_argument("--missing-token", default="",
                   help="cell text that means a missing value")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="pipeline config JSON path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--max-leaves", type=int, default=None)
    p.add_argument("--s-max", type=int, default=None)
    p.add_argument("--random-features", type=int, default=None)
    p.add_argument("--tune-budget", type=int, default=None)


def _load_dataset(args):
    with open(args.data, newline="") as fh:
        header = next(csv.reader(fh))
    ignore = tuple(s.strip() for s in args.ignore.split(",") if s.strip())
    specs = schema_from_header(header, target=args.target, event=args.event,
                               ignore=ignore)
    task = TaskKind(args.task) if args.task else None
    return load_csv(args.data, specs, missing_token=args.missing_token,
                    task=task)


def _build_config(args) -> PipelineConfig:
    """Flags beat the config file, the config file beats defaults."""
    if args.config:
        with open(args.config) as fh:
            cfg = PipelineConfig.from_dict(json.load(fh))
    else:
        cfg = PipelineConfig()
    overrides = {
        "seed": args.seed,
        "top_k": args.top_k,
        "max_leaves": args.max_leaves,
        "s_max": args.s_max,
        "n_random_features": args.random_features,
        "tune_budget": args.tune_budget,
    }
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **changes) if changes else cfg


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_train(args) -> int:
    d = _load_dataset(args)
    cfg = _build_config(args)
    log.info("training on %d rows, %d features, task %s", d.n, d.p, d.task.value)
    result = run_pipeline(d, cfg)
    card = result.scorecard
    log.info("selected %s (total score 0..%d)",
             ", ".join(card.feature_names), card.total_max)
    _write(args.out, export_scorecard(card))
    if args.model_out:
        _write(args.model_out, result.model.to_json())
    if args.markdown_out:
        _write(args.markdown_out, to_markdown(card))
    if args.dump_shap:
        lines = [",".join(list(result.shap.feature_names) + ["base_value"])]
        base = repr(float(result.shap.base_value))
        for row in result.shap.values:
            lines.append(",".join(repr(float(v)) for v in row) + "," + base)
        _write(args.dump_shap, "\n".join(lines) + "\n")
    return 0


def _read_feature_columns(path: str, names: list[str],
                          missing_token: str) -> dict[str, np.ndarray]:
    """Read just the named columns; scoring data needs no target."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        absent = [n for n in names if n not in header]
        if absent:
            raise SchemaError(f"data lacks scorecard features: {', '.join(absent)}")
        idx = {n: header.index(n) for n in names}
        cols: dict[str, list[float]] = {n: [] for n in names}
        for row_no, row in enumerate(reader, start=2):
            for n in names:
                cell = row[idx[n]].strip()
                if cell == missing_token:
                    cols[n].append(math.nan)
                    continue
                try:
                    cols[n].append(float(cell))
                except ValueError:
                    raise SchemaError(
                        f"row {row_no}, column {n!r}: not a number: {cell!r}"
                    ) from None
    return {n: np.asarray(v, dtype=np.float64) for n, v in cols.items()}


def cmd_score(args) -> int:
    with open(args.scorecard) as fh:
        card = import_scorecard(fh.read())
    columns = _read_feature_columns(args.data, card.feature_names,
                                    args.missing_token)
    points = {f.name: f.points_for(columns[f.name]) for f in card.features}
    totals = sum(points.values())
    header = ["total"] + [f"points_{n}" for n in card.feature_names]
    lines = [",".join(header)]
    for i in range(len(totals)):
        row = [str(int(totals[i]))]
        row += [str(int(points[n][i])) for n in card.feature_names]
        lines.append(",".join(row))
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    d = _load_dataset(args)
    cfg = _build_config(args)
    plan = make_folds(d, k=args.folds, repeats=args.repeats,
                      seed=cfg.seed)
    res = cross_validate(d, cfg, plan, jobs=args.jobs)
    for name in sorted(res.reports):
        r = res.reports[name]
        log.info("%s: %.4f +- %.4f", name, r.mean, r.std)
    for reason in res.skipped:
        log.warning("skipped %s", reason)
    _write(args.out, json.dumps(res.to_dict(), indent=2) + "\n")
    return 0


def cmd_sweep(args) -> int:
    d = _load_dataset(args)
    cfg = _build_config(args)
    k_values = [int(s) for s in args.top_k_values.split(",") if s.strip()]
    m_values = [int(s) for s in args.max_leaves_values.split(",") if s.strip()]
    rows = parsimony_sweep(d, k_values, m_values, cfg, seed=cfg.seed)
    _write(args.out, sweep_to_csv(rows))
    return 0


def cmd_export(args) -> int:
    with open(args.scorecard) as fh:
        card = import_scorecard(fh.read())
    if args.format == "markdown":
        _write(args.out, to_markdown(card))
    else:
        _write(args.out, export_scorecard(card))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    with open(args.scorecard) as fh:
        card = import_scorecard(fh.read())
    host, _, port = args.bind.rpartition(":")
    app = create_app(card, moderate_percentile=args.band_moderate,
                     high_percentile=args.band_high)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskcard",
        description="Train boosted-tree risk scorecards and serve them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and emit its scorecard")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--out", default="-", help="scorecard JSON path (- = stdout)")
    p.add_argument("--model-out", default=None, help="also save the boosted model")
    p.add_argument("--markdown-out", default=None, help="also save a readable table")
    p.add_argument("--dump-shap", default=None,
                   help="save per-row attributions as CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score CSV rows with a saved scorecard")
    p.add_argument("--scorecard", required=True)
    _add_data_args(p, need_target=False)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="cross-validate the whole pipeline")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid over card size versus accuracy")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--top-k-values", default="1,2,3,4,5")
    p.add_argument("--max-leaves-values", default="2,3,4,6,8")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="re-render a saved scorecard")
    p.add_argument("--scorecard", required=True)
    p.add_argument("--format", choices=["json", "markdown"], default="markdown")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="serve a scorecard over HTTP")
    p.add_argument("--scorecard", required=True)
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--band-moderate", type=float, default=50.0,
                   help="percentile where the moderate band starts")
    p.add_argument("--band-high", type=float, default=90.0,
                   help="percentile where the high band starts")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as e:
        log.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
