/**
 * Wire types for the scorecard service API. These mirror the JSON the
 * service emits; the UI never derives scores itself, it only displays
 * what these carry.
 */

export interface RuleLevel {
  leaf_id: number;
  lower: number | null;
  upper: number | null;
  covers_missing: boolean;
  raw_score: number;
  points: number;
  sample_count: number;
  is_reference: boolean;
}

export interface CardFeature {
  name: string;
  importance: number;
  missing_seen: boolean;
  levels: RuleLevel[];
}

export interface CalibrationBinDoc {
  lower: number;
  upper: number;
  count: number;
  outcome_rate: number | null;
  percentile: number;
}

export interface CalibrationDoc {
  n_rows: number;
  total_counts: number[];
  bins: CalibrationBinDoc[];
}

export interface ScorecardDoc {
  format: string;
  version: number;
  task: string;
  s_max: number;
  total_max: number;
  features: CardFeature[];
  calibration: CalibrationDoc | null;
  provenance: Record<string, unknown>;
}

export interface ScoreContribution {
  feature: string;
  leaf_id: number;
  points: number;
  condition: string;
}

export interface ScoreResponse {
  total: number;
  total_max: number;
  per_feature: ScoreContribution[];
  risk_rate: number | null;
  percentile: number | null;
  risk_band: string | null;
}

export interface PopulationResponse {
  n_rows: number;
  total_max: number;
  total_counts: number[];
  bins: CalibrationBinDoc[];
}

export type FeatureValues = Record<string, number | null>;
