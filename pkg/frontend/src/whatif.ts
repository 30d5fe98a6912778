import type { ScoreResponse } from "./types.js";

export interface WhatIfDelta {
  feature: string;
  deltaPoints: number;
  deltaPercentile: number | null;
  baseCondition: string;
  trialCondition: string;
  crossed: boolean;
}

/** "+3", "-4", "0"; fixed decimals when digits > 0. */
export const formatSigned = (n: number, digits = 0): string => {
  const text = n.toFixed(digits);
  return n > 0 ? `+${text}` : text;
};

/**
 * Compare the cached base submission with a one-feature trial. Both
 * responses come from the service; this only subtracts what it shows.
 */
export const compareResponses = (
  feature: string,
  base: ScoreResponse,
  trial: ScoreResponse,
): WhatIfDelta => {
  const basePart = base.per_feature.find((p) => p.feature === feature);
  const trialPart = trial.per_feature.find((p) => p.feature === feature);
  if (!basePart || !trialPart) {
    throw new Error(`feature ${feature} missing from score response`);
  }
  const deltaPercentile =
    base.percentile !== null && trial.percentile !== null
      ? trial.percentile - base.percentile
      : null;
  return {
    feature,
    deltaPoints: trial.total - base.total,
    deltaPercentile,
    baseCondition: basePart.condition,
    trialCondition: trialPart.condition,
    crossed: basePart.leaf_id !== trialPart.leaf_id,
  };
};
