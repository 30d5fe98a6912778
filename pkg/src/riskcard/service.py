"""HTTP scoring service around a single fitted scorecard."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from .scorecard import Scorecard, export_scorecard, score


class ScoreRequest(BaseModel):
    features: dict[str, float | None]


def risk_band(percentile: float, moderate: float, high: float) -> str:
    if percentile < moderate:
        return "low"
    if percentile <= high:
        return "moderate"
    return "high"


def create_app(card: Scorecard, moderate_percentile: float = 50.0,
               high_percentile: float = 90.0) -> FastAPI:
    """Build the app. The scorecard is fixed for the app's lifetime."""
    if not 0.0 <= moderate_percentile <= high_percentile <= 100.0:
        raise ValueError("band thresholds must satisfy 0 <= moderate <= high <= 100")
    app = FastAPI(title="risk scorecard service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    card_json = export_scorecard(card)

    @app.get("/health", response_class=PlainTextResponse)
    def health() -> str:
        return "ok"

    @app.get("/api/scorecard")
    def get_scorecard() -> Response:
        return Response(content=card_json, media_type="application/json")

    @app.post("/api/score")
    def post_score(req: ScoreRequest) -> dict:
        absent = sorted(f.name for f in card.features
                        if f.name not in req.features)
        if absent:
            raise HTTPException(
                status_code=400,
                detail={"error": "missing features", "missing": absent})
        result = score(card, req.features)
        rate = percentile = band = None
        if card.calibration is not None:
            percentile = card.calibration.percentile_of(result.total)
            rate = card.calibration.rate_of(result.total)
            band = risk_band(percentile, moderate_percentile, high_percentile)
        return {
            "total": result.total,
            "total_max": card.total_max,
            "per_feature": [{
                "feature": c.feature,
                "leaf_id": c.leaf_id,
                "points": c.points,
                "condition": c.condition,
            } for c in result.contributions],
            "risk_rate": rate,
            "percentile": percentile,
            "risk_band": band,
        }

    @app.get("/api/population")
    def population() -> dict:
        if card.calibration is None:
            raise HTTPException(status_code=404,
                                detail="scorecard has no calibration data")
        c = card.calibration
        return {
            "n_rows": c.n_rows,
            "total_max": card.total_max,
            "total_counts": list(c.total_counts),
            "bins": [{
                "lower": b.lower,
                "upper": b.upper,
                "count": b.count,
                "outcome_rate": b.outcome_rate,
                "percentile": b.percentile,
            } for b in c.bins],
        }

    return app
