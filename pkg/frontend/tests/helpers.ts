/**
 * Shared test scaffolding: fixture loading, canned documents, and a
 * fake fetch that mirrors the scoring service closely enough for unit
 * tests. The end-to-end suite talks to the real service instead.
 */
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { FetchLike } from "../src/api.js";
import { describeLevel, displayDecimals } from "../src/scoretable.js";
import type {
  FeatureValues,
  PopulationResponse,
  ScorecardDoc,
  ScoreContribution,
  ScoreResponse,
} from "../src/types.js";

export const FIXTURE_FILE = join(
  dirname(fileURLToPath(import.meta.url)),
  "fixtures",
  "cardio_card.json",
);

export const cardioCard = (): ScorecardDoc =>
  JSON.parse(readFileSync(FIXTURE_FILE, "utf8")) as ScorecardDoc;

/** Two-feature card with calibration, small enough to eyeball. */
export const smallCard = (): ScorecardDoc => ({
  format: "risk-scorecard",
  version: 1,
  task: "classification",
  s_max: 5,
  total_max: 8,
  features: [
    {
      name: "age",
      importance: 0.6,
      missing_seen: false,
      levels: [
        { leaf_id: 0, lower: null, upper: 50.5, covers_missing: true, raw_score: 0.0, points: 0, sample_count: 60, is_reference: true },
        { leaf_id: 1, lower: 50.5, upper: null, covers_missing: false, raw_score: 1.0, points: 5, sample_count: 40, is_reference: false },
      ],
    },
    {
      name: "bp",
      importance: 0.3,
      missing_seen: true,
      levels: [
        { leaf_id: 0, lower: null, upper: 120.5, covers_missing: true, raw_score: 0.0, points: 0, sample_count: 70, is_reference: true },
        { leaf_id: 1, lower: 120.5, upper: null, covers_missing: false, raw_score: 0.63, points: 3, sample_count: 30, is_reference: false },
      ],
    },
  ],
  calibration: {
    n_rows: 100,
    total_counts: [40, 10, 5, 15, 0, 20, 0, 0, 10],
    bins: [
      { lower: 0, upper: 2, count: 50, outcome_rate: 0.1, percentile: 50 },
      { lower: 2, upper: 4, count: 20, outcome_rate: null, percentile: 70 },
      { lower: 4, upper: 6, count: 20, outcome_rate: 0.5, percentile: 90 },
      { lower: 6, upper: 8, count: 10, outcome_rate: 0.9, percentile: 100 },
    ],
  },
  provenance: {},
});

export const populationFromCard = (card: ScorecardDoc): PopulationResponse | null =>
  card.calibration
    ? {
        n_rows: card.calibration.n_rows,
        total_max: card.total_max,
        total_counts: card.calibration.total_counts,
        bins: card.calibration.bins,
      }
    : null;

export const jsonResponse = (status: number, body: unknown): Response =>
  ({
    ok: status >= 200 && status < 300,
    status,
    text: async () => JSON.stringify(body),
  }) as unknown as Response;

/** Reference scoring used only by the fake service below. */
export const mirrorScore = (card: ScorecardDoc, features: FeatureValues): ScoreResponse => {
  let total = 0;
  const per: ScoreContribution[] = [];
  for (const f of card.features) {
    const v = features[f.name];
    const level =
      v === null || v === undefined
        ? f.levels.find((l) => l.covers_missing)
        : f.levels.find(
            (l) => (l.upper === null || v <= l.upper) && (l.lower === null || v > l.lower),
          );
    if (!level) throw new Error(`no level for ${f.name}=${String(v)}`);
    per.push({
      feature: f.name,
      leaf_id: level.leaf_id,
      points: level.points,
      condition: describeLevel(f, level, displayDecimals(f)),
    });
    total += level.points;
  }
  let risk_rate: number | null = null;
  let percentile: number | null = null;
  let risk_band: string | null = null;
  const cal = card.calibration;
  if (cal) {
    const t = Math.min(Math.max(total, 0), cal.total_counts.length - 1);
    const atOrBelow = cal.total_counts.slice(0, t + 1).reduce((a, b) => a + b, 0);
    percentile = (100 * atOrBelow) / cal.n_rows;
    const bin =
      cal.bins.find((b, i) => total < b.upper || i === cal.bins.length - 1) ?? null;
    risk_rate = bin ? bin.outcome_rate : null;
    risk_band = percentile < 50 ? "low" : percentile <= 90 ? "moderate" : "high";
  }
  return { total, total_max: card.total_max, per_feature: per, risk_rate, percentile, risk_band };
};

export interface FakeServiceOpts {
  /** Override the population payload; null forces the 404 branch. */
  population?: PopulationResponse | null;
  /** Awaited before a score response is produced; gates concurrency tests. */
  scoreHook?: (features: FeatureValues) => void | Promise<void>;
  /** Every request appends "METHOD /path" here. */
  calls?: string[];
  /** When set, POST /api/score always answers with this response. */
  forceScore?: { status: number; body: unknown };
}

export const fakeService = (card: ScorecardDoc, opts: FakeServiceOpts = {}): FetchLike =>
  async (input, init) => {
    const method = init?.method ?? "GET";
    const url = new URL(input, "http://fake.test");
    opts.calls?.push(`${method} ${url.pathname}`);
    if (method === "GET" && url.pathname === "/api/scorecard") {
      return jsonResponse(200, card);
    }
    if (method === "GET" && url.pathname === "/api/population") {
      const pop = opts.population === undefined ? populationFromCard(card) : opts.population;
      return pop
        ? jsonResponse(200, pop)
        : jsonResponse(404, { detail: "scorecard has no calibration data" });
    }
    if (method === "POST" && url.pathname === "/api/score") {
      if (opts.forceScore) return jsonResponse(opts.forceScore.status, opts.forceScore.body);
      const body = JSON.parse(String(init?.body ?? "{}")) as {
        features?: Record<string, unknown>;
      };
      const feats = body.features ?? {};
      const invalid = Object.keys(feats).filter((k) => {
        const v = feats[k];
        return v !== null && typeof v !== "number";
      });
      if (invalid.length) {
        return jsonResponse(422, {
          detail: invalid.map((k) => ({
            loc: ["body", "features", k],
            msg: "Input should be a valid number",
            type: "float_type",
          })),
        });
      }
      const absent = card.features
        .map((f) => f.name)
        .filter((n) => !(n in feats))
        .sort();
      if (absent.length) {
        return jsonResponse(400, { detail: { error: "missing features", missing: absent } });
      }
      if (opts.scoreHook) await opts.scoreHook(feats as FeatureValues);
      return jsonResponse(200, mirrorScore(card, feats as FeatureValues));
    }
    return jsonResponse(404, { detail: "not found" });
  };

/** Poll until cond() holds; throws after the deadline. */
export const waitFor = async (cond: () => boolean, ms = 5000): Promise<void> => {
  const started = Date.now();
  while (!cond()) {
    if (Date.now() - started > ms) throw new Error("condition not met in time");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
};

export interface Deferred {
  promise: Promise<void>;
  resolve: () => void;
}

export const deferred = (): Deferred => {
  let resolve!: () => void;
  const promise = new Promise<void>((r) => {
    resolve = r;
  });
  return { promise, resolve };
};
