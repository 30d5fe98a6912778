import type { CardFeature, RuleLevel, ScorecardDoc, ScoreResponse } from "./types.js";

const esc = (value: unknown): string =>
  String(value ?? "")
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

/** Fewest decimals (from 1) that keep every finite bound distinct in print. */
export const displayDecimals = (feature: CardFeature): number => {
  const bounds = new Set<number>();
  for (const level of feature.levels) {
    for (const b of [level.lower, level.upper]) {
      if (b !== null && Number.isFinite(b)) bounds.add(b);
    }
  }
  const values = Array.from(bounds);
  for (let d = 1; d < 12; d++) {
    const printed = new Set(values.map((v) => v.toFixed(d)));
    if (printed.size === values.length) return d;
  }
  return 12;
};

/** Rule text in the same shape the service uses: upper bound first. */
export const describeLevel = (
  feature: CardFeature,
  level: RuleLevel,
  decimals?: number,
): string => {
  const d = decimals ?? displayDecimals(feature);
  const parts: string[] = [];
  if (level.upper !== null) parts.push(`${feature.name} <= ${level.upper.toFixed(d)}`);
  if (level.lower !== null) parts.push(`${feature.name} > ${level.lower.toFixed(d)}`);
  let text = parts.length ? parts.join(" & ") : `${feature.name}: any value`;
  if (level.covers_missing && feature.missing_seen) text += " (or missing)";
  return text;
};

/**
 * Score-sheet table, one row per rule plus the total-potential row.
 * Rows matching the last score response get the active class; with no
 * response nothing is highlighted.
 */
export const renderScoreTable = (doc: ScorecardDoc, active: ScoreResponse | null): string => {
  const activeLeaf = new Map<string, number>();
  if (active) {
    for (const part of active.per_feature) activeLeaf.set(part.feature, part.leaf_id);
  }
  const rows: string[] = [];
  for (const feature of doc.features) {
    const decimals = displayDecimals(feature);
    for (const level of feature.levels) {
      const isActive = activeLeaf.get(feature.name) === level.leaf_id;
      rows.push(
        `<tr class="level${isActive ? " active" : ""}" data-feature="${esc(feature.name)}" data-leaf="${level.leaf_id}">` +
          `<td>${esc(feature.name)}</td>` +
          `<td>${esc(describeLevel(feature, level, decimals))}</td>` +
          `<td class="points">${level.points}</td></tr>`,
      );
    }
  }
  rows.push(
    `<tr class="total-row"><td><strong>Total potential</strong></td><td></td>` +
      `<td class="points"><strong>${doc.total_max}</strong></td></tr>`,
  );
  return (
    `<table class="scorecard"><thead><tr><th>Feature</th><th>Rule</th><th>Points</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
};
