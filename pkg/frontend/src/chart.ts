import type { PopulationResponse } from "./types.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  highlightBin?: number | null;
}

/** Bin that holds a given total: [lower, upper) except the last bin. */
export const binIndexFor = (pop: PopulationResponse, total: number): number => {
  for (let i = 0; i < pop.bins.length; i++) {
    if (total < pop.bins[i].upper || i === pop.bins.length - 1) return i;
  }
  return pop.bins.length - 1;
};

const num = (v: number): string =>
  Number.isInteger(v) ? String(v) : String(Math.round(v * 10) / 10);

/**
 * Dual-axis population histogram as an SVG string: bars count people
 * per score bin (left axis), dots and a line trace the observed
 * outcome rate (right axis, percent). Bars carry data-bin/data-count
 * so tests and tooltips can read them straight off the DOM.
 */
export const populationChart = (pop: PopulationResponse, opts: ChartOptions = {}): string => {
  const { width = 600, height = 260, highlightBin = null } = opts;
  if (pop.bins.length === 0) return "";

  const m = { left: 52, right: 52, top: 16, bottom: 36 };
  const plotW = width - m.left - m.right;
  const plotH = height - m.top - m.bottom;
  const maxCount = Math.max(1, ...pop.bins.map((b) => b.count));
  const slot = plotW / pop.bins.length;
  const barW = Math.max(2, slot * 0.72);

  const xCenter = (i: number) => m.left + slot * i + slot / 2;
  const yCount = (c: number) => m.top + plotH * (1 - c / maxCount);
  const yRate = (r: number) => m.top + plotH * (1 - r);

  const parts: string[] = [];
  parts.push(
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="population by risk score" ` +
      `preserveAspectRatio="xMidYMid meet" class="population-chart">`,
  );

  // axes
  parts.push(
    `<line class="axis" x1="${m.left}" y1="${m.top + plotH}" x2="${m.left + plotW}" y2="${m.top + plotH}"/>`,
    `<line class="axis" x1="${m.left}" y1="${m.top}" x2="${m.left}" y2="${m.top + plotH}"/>`,
    `<line class="axis" x1="${m.left + plotW}" y1="${m.top}" x2="${m.left + plotW}" y2="${m.top + plotH}"/>`,
  );

  // left ticks: 0 and max count; right ticks: 0/50/100 percent
  parts.push(
    `<text class="tick left" x="${m.left - 6}" y="${m.top + plotH}">0</text>`,
    `<text class="tick left" x="${m.left - 6}" y="${yCount(maxCount) + 10}">${maxCount}</text>`,
  );
  for (const pct of [0, 50, 100]) {
    parts.push(
      `<text class="tick right" x="${m.left + plotW + 6}" y="${yRate(pct / 100) + 4}">${pct}%</text>`,
    );
  }

  for (let i = 0; i < pop.bins.length; i++) {
    const b = pop.bins[i];
    const x = xCenter(i) - barW / 2;
    const y = yCount(b.count);
    const h = m.top + plotH - y;
    const active = highlightBin === i ? " active" : "";
    parts.push(
      `<rect class="bar${active}" data-bin="${i}" data-count="${b.count}" ` +
        `x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barW.toFixed(1)}" height="${h.toFixed(1)}">` +
        `<title>score ${num(b.lower)} to ${num(b.upper)}: ${b.count} people</title></rect>`,
    );
    parts.push(
      `<text class="tick x" x="${xCenter(i)}" y="${m.top + plotH + 14}">${num(b.lower)}&#8211;${num(b.upper)}</text>`,
    );
  }

  // rate overlay; bins without an observed rate leave a gap
  const points: string[] = [];
  let run: string[] = [];
  const flush = () => {
    if (run.length > 1) points.push(`<polyline class="rate-line" points="${run.join(" ")}"/>`);
    run = [];
  };
  for (let i = 0; i < pop.bins.length; i++) {
    const rate = pop.bins[i].outcome_rate;
    if (rate === null) {
      flush();
      continue;
    }
    const cx = xCenter(i);
    const cy = yRate(rate);
    run.push(`${cx.toFixed(1)},${cy.toFixed(1)}`);
    points.push(
      `<circle class="rate-dot" data-bin="${i}" data-rate="${rate}" cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="3.5">` +
        `<title>observed rate ${(rate * 100).toFixed(1)}%</title></circle>`,
    );
  }
  flush();
  parts.push(...points);

  parts.push(
    `<text class="axis-label left" x="${m.left - 40}" y="${m.top + plotH / 2}" ` +
      `transform="rotate(-90 ${m.left - 40} ${m.top + plotH / 2})">Number of people</text>`,
    `<text class="axis-label right" x="${m.left + plotW + 44}" y="${m.top + plotH / 2}" ` +
      `transform="rotate(90 ${m.left + plotW + 44} ${m.top + plotH / 2})">Observed rate (%)</text>`,
    `<text class="axis-label x" x="${m.left + plotW / 2}" y="${height - 4}">Risk score</text>`,
  );
  parts.push("</svg>");
  return parts.join("");
};
