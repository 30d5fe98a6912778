"""Compress per-feature attribution bins into an integer-point scorecard.

Each selected feature contributes a small table of interval rules with
integer points. A person's total score is the sum of the points of the
one matching level per feature. A calibration table built on training
data maps totals to observed outcome rates and population percentiles.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .binning import BinningTree, IntervalRule, extract_rules

SCORECARD_FORMAT = "risk-scorecard"
SCORECARD_VERSION = 1


@dataclass(frozen=True)
class RiskLevel:
    feature: str
    leaf_id: int
    rule: IntervalRule
    raw_score: float
    points: int
    sample_count: int
    is_reference: bool = False


@dataclass(frozen=True)
class ScorecardFeature:
    name: str
    importance: float
    missing_seen: bool
    levels: tuple[RiskLevel, ...]

    @property
    def max_points(self) -> int:
        return max(l.points for l in self.levels)

    def display_decimals(self, minimum: int = 1) -> int:
        """Fewest decimals that keep every finite bound distinct in print.

        One decimal reads best, but close thresholds (0.108 vs 0.145)
        would collapse to the same text and make rules look
        contradictory, so precision grows just enough to separate them.
        """
        bounds = sorted({b for l in self.levels
                         for b in (l.rule.lower, l.rule.upper)
                         if math.isfinite(b)})
        for d in range(minimum, 12):
            if len({f"{b:.{d}f}" for b in bounds}) == len(bounds):
                return d
        return 12

    def level_for(self, value: float | None) -> RiskLevel:
        probe = math.nan if value is None else float(value)
        for level in self.levels:
            if level.rule.contains(probe):
                return level
        raise ValueError(f"no level of {self.name!r} covers {value!r}")

    def points_for(self, x: np.ndarray) -> np.ndarray:
        """Vectorized points lookup for one column of raw values."""
        x = np.asarray(x, dtype=np.float64)
        pts = np.zeros(x.shape[0], dtype=np.int64)
        matched = np.zeros(x.shape[0], dtype=bool)
        for level in self.levels:
            hit = level.rule.contains(x)
            pts[hit] = level.points
            matched |= hit
        if not matched.all():
            raise ValueError(f"unmatched values in feature {self.name!r}")
        return pts


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    count: int
    outcome_rate: float | None
    percentile: float


@dataclass(frozen=True)
class Calibration:
    n_rows: int
    total_counts: tuple[int, ...]  # histogram over totals 0..total_max
    bins: tuple[CalibrationBin, ...]

    def percentile_of(self, total: int) -> float:
        t = min(max(int(total), 0), len(self.total_counts) - 1)
        at_or_below = sum(self.total_counts[: t + 1])
        return 100.0 * at_or_below / self.n_rows

    def rate_of(self, total: int) -> float | None:
        for b in self.bins:
            if total < b.upper or b is self.bins[-1]:
                return b.outcome_rate
        return None


@dataclass
class Scorecard:
    task: str
    s_max: int
    features: list[ScorecardFeature]
    calibration: Calibration | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def total_max(self) -> int:
        return sum(f.max_points for f in self.features)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]


@dataclass(frozen=True)
class FeatureContribution:
    feature: str
    leaf_id: int
    points: int
    condition: str


@dataclass(frozen=True)
class ScoreResult:
    total: int
    contributions: tuple[FeatureContribution, ...]


def build_levels(feature: str, tree: BinningTree) -> list[RiskLevel]:
    """Turn a fitted binning tree into relative risk levels.

    Raw scores are leaf means shifted so the lowest-mean leaf sits at
    zero; that leaf is flagged as the reference (lowest leaf id wins
    exact ties). Points are filled in later by scale_levels.
    """
    rules = extract_rules(tree)
    values = [value for _, _, value, _ in rules]
    floor_value = min(values)
    ref_idx = min(range(len(rules)), key=lambda i: (values[i], rules[i][0]))
    out = []
    for i, (leaf_id, rule, value, count) in enumerate(rules):
        out.append(RiskLevel(
            feature=feature,
            leaf_id=leaf_id,
            rule=rule,
            raw_score=value - floor_value,
            points=0,
            sample_count=count,
            is_reference=i == ref_idx,
        ))
    return out


def scale_levels(level_groups: Sequence[Sequence[RiskLevel]],
                 s_max: int) -> list[list[RiskLevel]]:
    """Map raw scores to integer points on a shared 0..s_max scale.

    points = floor(s_max * (raw - mn) / (mx - mn)) with mn, mx taken
    over every level of every feature; the ratio is formed first so
    exact fractions like 0.3/0.6 survive to the floor. A flat card
    (mx == mn) scores zero everywhere.
    """
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    all_raw = [l.raw_score for group in level_groups for l in group]
    if not all_raw:
        raise ValueError("no levels to scale")
    mn, mx = min(all_raw), max(all_raw)
    span = mx - mn
    scaled = []
    for group in level_groups:
        new_group = []
        for l in group:
            if span <= 0:
                pts = 0
            else:
                pts = int(math.floor(s_max * ((l.raw_score - mn) / span)))
            new_group.append(replace(l, points=pts))
        scaled.append(new_group)
    return scaled


def score(card: Scorecard, values: Mapping[str, float | None]) -> ScoreResult:
    """Score one person from a name -> value mapping (None = missing)."""
    absent = [f.name for f in card.features if f.name not in values]
    if absent:
        raise ValueError(f"missing features: {', '.join(sorted(absent))}")
    contributions = []
    total = 0
    for feat in card.features:
        level = feat.level_for(values[feat.name])
        condition = level.rule.describe(feat.name, decimals=feat.display_decimals())
        if level.rule.covers_missing and feat.missing_seen:
            condition += " (or missing)"
        contributions.append(FeatureContribution(
            feature=feat.name, leaf_id=level.leaf_id,
            points=level.points, condition=condition))
        total += level.points
    return ScoreResult(total=total, contributions=tuple(contributions))


def score_totals(card: Scorecard, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized totals for many rows given name -> value-array columns."""
    if not card.features:
        raise ValueError("scorecard has no features")
    total = None
    for feat in card.features:
        pts = feat.points_for(columns[feat.name])
        total = pts if total is None else total + pts
    return total


def calibrate(card: Scorecard, columns: Mapping[str, np.ndarray],
              outcome: np.ndarray, bins: int = 10) -> Calibration:
    """Attach observed outcome rates and percentiles to score totals.

    Bins are equal width over [0, total_max]; each bin is [lower, upper)
    except the last, which includes total_max. Percentile of a bin is
    the share of training totals at or below its upper edge.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    totals = score_totals(card, columns)
    outcome = np.asarray(outcome, dtype=np.float64)
    if outcome.shape[0] != totals.shape[0]:
        raise ValueError("outcome length does not match scored rows")
    n = totals.shape[0]
    tmax = card.total_max
    counts = np.bincount(totals, minlength=tmax + 1)

    if tmax == 0:
        rate = float(outcome.mean()) if n else None
        return Calibration(
            n_rows=n, total_counts=tuple(int(c) for c in counts),
            bins=(CalibrationBin(0.0, 0.0, n, rate, 100.0),))

    n_bins = min(bins, tmax)
    edges = np.linspace(0.0, float(tmax), n_bins + 1)
    idx = np.clip(np.searchsorted(edges, totals, side="right") - 1, 0, n_bins - 1)
    out = []
    seen = 0
    for b in range(n_bins):
        in_bin = idx == b
        cnt = int(in_bin.sum())
        rate = float(outcome[in_bin].mean()) if cnt else None
        seen += cnt
        out.append(CalibrationBin(float(edges[b]), float(edges[b + 1]),
                                  cnt, rate, 100.0 * seen / n))
    return Calibration(n_rows=n, total_counts=tuple(int(c) for c in counts),
                       bins=tuple(out))


# ------------------------------------------------------------------ export

def _bound_out(v: float) -> float | None:
    return None if math.isinf(v) else float(v)


def _bound_in(v, sign: int) -> float:
    return sign * math.inf if v is None else float(v)


def _card_dict(card: Scorecard) -> dict:
    features = []
    for f in card.features:
        levels = []
        for l in f.levels:
            levels.append({
                "leaf_id": l.leaf_id,
                "lower": _bound_out(l.rule.lower),
                "upper": _bound_out(l.rule.upper),
                "covers_missing": l.rule.covers_missing,
                "raw_score": l.raw_score,
                "points": l.points,
                "sample_count": l.sample_count,
                "is_reference": l.is_reference,
            })
        features.append({
            "name": f.name,
            "importance": f.importance,
            "missing_seen": f.missing_seen,
            "levels": levels,
        })
    doc = {
        "format": SCORECARD_FORMAT,
        "version": SCORECARD_VERSION,
        "task": card.task,
        "s_max": card.s_max,
        "total_max": card.total_max,
        "features": features,
    }
    if card.calibration is not None:
        c = card.calibration
        doc["calibration"] = {
            "n_rows": c.n_rows,
            "total_counts": list(c.total_counts),
            "bins": [{
                "lower": b.lower, "upper": b.upper, "count": b.count,
                "outcome_rate": b.outcome_rate, "percentile": b.percentile,
            } for b in c.bins],
        }
    else:
        doc["calibration"] = None
    doc["provenance"] = card.provenance
    return doc


def export_scorecard(card: Scorecard) -> str:
    return json.dumps(_card_dict(card), indent=2) + "\n"


def import_scorecard(text: str) -> Scorecard:
    doc = json.loads(text)
    if doc.get("format") != SCORECARD_FORMAT:
        raise ValueError("not a scorecard document")
    if doc.get("version") != SCORECARD_VERSION:
        raise ValueError(f"unsupported scorecard version {doc.get('version')!r}")
    features = []
    for f in doc["features"]:
        levels = []
        for l in f["levels"]:
            rule = IntervalRule(
                lower=_bound_in(l["lower"], -1),
                upper=_bound_in(l["upper"], +1),
                covers_missing=l["covers_missing"],
            )
            levels.append(RiskLevel(
                feature=f["name"], leaf_id=l["leaf_id"], rule=rule,
                raw_score=l["raw_score"], points=l["points"],
                sample_count=l["sample_count"],
                is_reference=l["is_reference"],
            ))
        features.append(ScorecardFeature(
            name=f["name"], importance=f["importance"],
            missing_seen=f["missing_seen"], levels=tuple(levels)))
    calibration = None
    if doc.get("calibration") is not None:
        c = doc["calibration"]
        calibration = Calibration(
            n_rows=c["n_rows"],
            total_counts=tuple(c["total_counts"]),
            bins=tuple(CalibrationBin(b["lower"], b["upper"], b["count"],
                                      b["outcome_rate"], b["percentile"])
                       for b in c["bins"]),
        )
    return Scorecard(task=doc["task"], s_max=doc["s_max"], features=features,
                     calibration=calibration,
                     provenance=doc.get("provenance", {}))


def to_markdown(card: Scorecard) -> str:
    """Human-readable scorecard table; threshold precision adapts per feature."""
    lines = [f"# Risk scorecard ({card.task})", ""]
    lines += ["| Feature | Condition | Points |", "| --- | --- | --- |"]
    for f in card.features:
        decimals = f.display_decimals()
        for l in f.levels:
            cond = l.rule.describe(f.name, decimals=decimals)
            if l.rule.covers_missing and f.missing_seen:
                cond += " (or missing)"
            lines.append(f"| {f.name} | {cond} | {l.points} |")
    lines.append(f"| **Total** | | **0 to {card.total_max}** |")
    if card.calibration is not None:
        lines += ["", "## Calibration", "",
                  "| Score range | People | Outcome rate | Percentile |",
                  "| --- | --- | --- | --- |"]
        for b in card.calibration.bins:
            rate = "n/a" if b.outcome_rate is None else f"{b.outcome_rate:.3f}"
            lines.append(f"| {b.lower:g} to {b.upper:g} | {b.count} "
                         f"| {rate} | {b.percentile:.1f} |")
    return "\n".join(lines) + "\n"
