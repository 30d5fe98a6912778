/**
 * Page controller. Fetches the scorecard once, renders the form, the
 * score sheet, and the population chart, and keeps every displayed
 * number sourced from service responses. Concurrent submissions are
 * resolved last-write-wins; identical in-flight requests are shared by
 * the API client.
 */
import { ApiClient, ApiError, type FetchLike } from "./api.js";
import { API_BASE } from "./env.js";
import {
  buildForm,
  canSubmit,
  fieldError,
  payload,
  setUnknown,
  setValue,
  type FormModel,
} from "./form.js";
import { renderScoreTable } from "./scoretable.js";
import { binIndexFor, populationChart } from "./chart.js";
import { compareResponses, formatSigned } from "./whatif.js";
import { applyQuery, decodeQuery, encodeForm } from "./urlstate.js";
import type {
  FeatureValues,
  PopulationResponse,
  ScorecardDoc,
  ScoreResponse,
} from "./types.js";

export interface BootOptions {
  apiBase?: string;
  fetchFn?: FetchLike;
}

const esc = (value: unknown): string =>
  String(value ?? "")
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

const LAYOUT = `
<header class="top">
  <h1>Risk calculator</h1>
  <p class="subtitle">Interactive scoring against the connected service. Every number shown comes from a service response.</p>
</header>
<div class="banner" data-role="banner" hidden></div>
<div class="columns">
  <section class="panel">
    <h2>Patient features</h2>
    <form data-role="patient-form" novalidate>
      <div data-role="form"></div>
      <button type="submit" data-role="submit" disabled>Score</button>
    </form>
    <div class="result" data-role="result" hidden>
      <h2>Risk assessment</h2>
      <dl>
        <div><dt>Risk score</dt><dd><strong data-role="total"></strong> of <span data-role="total-max"></span></dd></div>
        <div><dt>Risk rate</dt><dd data-role="rate"></dd></div>
        <div><dt>Population percentile</dt><dd data-role="percentile"></dd></div>
        <div><dt>Risk level</dt><dd data-role="band"></dd></div>
      </dl>
    </div>
  </section>
  <section class="panel">
    <h2>Score sheet</h2>
    <div data-role="table"></div>
  </section>
  <aside class="panel">
    <h2>What if</h2>
    <p class="hint">Score a patient first, then try single-feature changes. The base inputs stay put.</p>
    <div class="wi-controls">
      <select data-role="wi-feature" aria-label="feature to change"></select>
      <input type="text" inputmode="decimal" data-role="wi-value" placeholder="trial value" aria-label="trial value" />
      <label class="unknown-toggle"><input type="checkbox" data-role="wi-unknown" /> unknown</label>
      <button type="button" data-role="wi-try" disabled>Compare</button>
    </div>
    <div data-role="wi-out"></div>
  </aside>
</div>
<section class="panel">
  <h2>Population</h2>
  <div data-role="chart"></div>
</section>`;

interface FieldRefs {
  input: HTMLInputElement;
  checkbox: HTMLInputElement;
  error: HTMLElement;
}

export const boot = async (doc: Document, opts: BootOptions = {}): Promise<void> => {
  const root = doc.querySelector<HTMLElement>("#app");
  if (!root) throw new Error("missing #app container");
  const win = doc.defaultView;
  const api = new ApiClient(opts.apiBase ?? API_BASE, opts.fetchFn);

  root.innerHTML = LAYOUT;
  const $ = <T extends HTMLElement = HTMLElement>(sel: string): T => {
    const el = root.querySelector<T>(sel);
    if (!el) throw new Error(`layout is missing ${sel}`);
    return el;
  };

  const banner = $('[data-role="banner"]');
  const showBanner = (text: string) => {
    banner.textContent = text;
    banner.hidden = false;
  };

  let card: ScorecardDoc;
  try {
    card = await api.scorecard();
  } catch {
    showBanner("Cannot reach the scoring service. Check that it is running, then reload.");
    return;
  }

  let population: PopulationResponse | null = null;
  try {
    population = await api.population();
  } catch {
    population = null;
  }

  const names = card.features.map((f) => f.name);
  let model: FormModel = buildForm(card);
  let base: { values: FeatureValues; response: ScoreResponse } | null = null;
  let scoreSeq = 0;
  let trialSeq = 0;

  // --- static pieces ---
  const formHost = $('[data-role="form"]');
  formHost.innerHTML = model.fields
    .map(
      (f) => `
    <div class="field" data-field="${esc(f.name)}">
      <label class="field-name">${esc(f.name)}
        <input type="text" inputmode="decimal" data-role="value" data-feature="${esc(f.name)}" placeholder="${esc(f.hint)}" />
      </label>
      <label class="unknown-toggle"><input type="checkbox" data-role="unknown" data-feature="${esc(f.name)}" /> unknown</label>
      <span class="field-error" data-role="field-error"></span>
    </div>`,
    )
    .join("");

  const fieldRefs = new Map<string, FieldRefs>();
  for (const el of Array.from(formHost.querySelectorAll<HTMLElement>(".field"))) {
    const name = el.getAttribute("data-field") ?? "";
    fieldRefs.set(name, {
      input: el.querySelector<HTMLInputElement>('[data-role="value"]')!,
      checkbox: el.querySelector<HTMLInputElement>('[data-role="unknown"]')!,
      error: el.querySelector<HTMLElement>('[data-role="field-error"]')!,
    });
  }

  const submitBtn = $<HTMLButtonElement>('[data-role="submit"]');
  const tableHost = $('[data-role="table"]');
  const chartHost = $('[data-role="chart"]');
  const resultBox = $('[data-role="result"]');
  const wiSelect = $<HTMLSelectElement>('[data-role="wi-feature"]');
  const wiValue = $<HTMLInputElement>('[data-role="wi-value"]');
  const wiUnknown = $<HTMLInputElement>('[data-role="wi-unknown"]');
  const wiTry = $<HTMLButtonElement>('[data-role="wi-try"]');
  const wiOut = $('[data-role="wi-out"]');

  wiSelect.innerHTML = names
    .map((n) => `<option value="${esc(n)}">${esc(n)}</option>`)
    .join("");

  // --- sync and render ---
  const syncForm = () => {
    for (const f of model.fields) {
      const refs = fieldRefs.get(f.name);
      if (!refs) continue;
      if (doc.activeElement !== refs.input && refs.input.value !== f.raw) {
        refs.input.value = f.raw;
      }
      refs.input.disabled = f.unknown;
      refs.checkbox.checked = f.unknown;
      const err = fieldError(f);
      if (refs.error.getAttribute("data-server") !== "1") {
        refs.error.textContent = err ?? "";
      }
    }
    submitBtn.disabled = !canSubmit(model);
  };

  const clearServerErrors = () => {
    for (const refs of fieldRefs.values()) {
      refs.error.removeAttribute("data-server");
      refs.error.textContent = "";
    }
  };

  const setServerError = (name: string, text: string) => {
    const refs = fieldRefs.get(name);
    if (!refs) return;
    refs.error.setAttribute("data-server", "1");
    refs.error.textContent = text;
  };

  const renderTable = (res: ScoreResponse | null) => {
    tableHost.innerHTML = renderScoreTable(card, res);
  };

  const renderChart = () => {
    if (!population || population.bins.length === 0) {
      chartHost.innerHTML = '<p class="notice" data-role="chart-notice">No population data available for this scorecard.</p>';
      return;
    }
    const highlight = base ? binIndexFor(population, base.response.total) : null;
    chartHost.innerHTML = populationChart(population, { highlightBin: highlight });
  };

  const renderResult = (res: ScoreResponse) => {
    $('[data-role="total"]').textContent = String(res.total);
    $('[data-role="total-max"]').textContent = String(res.total_max);
    $('[data-role="rate"]').textContent =
      res.risk_rate === null ? "n/a" : `${(res.risk_rate * 100).toFixed(1)}%`;
    $('[data-role="percentile"]').textContent =
      res.percentile === null ? "n/a" : res.percentile.toFixed(1);
    const band = $('[data-role="band"]');
    band.textContent = res.risk_band ?? "n/a";
    band.className = res.risk_band ? `band band-${res.risk_band}` : "";
    resultBox.hidden = false;
  };

  const updateUrl = () => {
    if (!win?.history) return;
    const query = encodeForm(model);
    win.history.replaceState(null, "", query ? `?${query}` : win.location.pathname);
  };

  const handleScoreError = (err: unknown, intoWhatIf = false) => {
    if (!(err instanceof ApiError)) {
      showBanner(`Scoring failed: ${String(err)}`);
      return;
    }
    if (err.status === 0) {
      showBanner("Cannot reach the scoring service. Check that it is running, then reload.");
      return;
    }
    const body = err.body as { detail?: unknown } | null;
    const detail = body && typeof body === "object" ? body.detail : null;
    if (err.status === 400 && detail && typeof detail === "object" && "missing" in detail) {
      const missing = (detail as { missing: string[] }).missing;
      for (const name of missing) setServerError(name, "required");
      return;
    }
    if (err.status === 422 && Array.isArray(detail)) {
      // pydantic errors carry loc: ["body", "features", "<name>"]
      let matched = false;
      for (const item of detail) {
        const loc = (item as { loc?: unknown[] }).loc ?? [];
        const name = String(loc[loc.length - 1] ?? "");
        if (fieldRefs.has(name)) {
          setServerError(name, String((item as { msg?: string }).msg ?? "invalid value"));
          matched = true;
        }
      }
      if (!matched) showBanner("The service rejected the request as invalid.");
      return;
    }
    if (intoWhatIf) {
      wiOut.innerHTML = `<p class="notice">${esc(err.message)}</p>`;
      return;
    }
    showBanner(err.message);
  };

  // --- actions ---
  const submit = async (): Promise<void> => {
    if (!canSubmit(model)) return;
    const values = payload(model);
    const seq = ++scoreSeq;
    try {
      const res = await api.score(values);
      if (seq !== scoreSeq) return; // a newer submission won
      banner.hidden = true;
      clearServerErrors();
      base = { values, response: res };
      renderResult(res);
      renderTable(res);
      renderChart();
      wiTry.disabled = false;
      updateUrl();
    } catch (err) {
      if (seq !== scoreSeq) return;
      handleScoreError(err);
    }
  };

  const tryWhatIf = async (): Promise<void> => {
    if (!base) return;
    const feature = wiSelect.value;
    const unknown = wiUnknown.checked;
    const raw = wiValue.value.trim();
    if (!unknown && (raw === "" || !Number.isFinite(Number(raw)))) {
      wiOut.innerHTML = '<p class="notice">Enter a trial value or tick unknown.</p>';
      return;
    }
    const baseSnapshot = base;
    const trialValues: FeatureValues = {
      ...baseSnapshot.values,
      [feature]: unknown ? null : Number(raw),
    };
    const seq = ++trialSeq;
    try {
      const res = await api.score(trialValues);
      if (seq !== trialSeq) return;
      const delta = compareResponses(feature, baseSnapshot.response, res);
      const points = `Δ ${formatSigned(delta.deltaPoints)} points (total ${res.total}, was ${baseSnapshot.response.total})`;
      const pct =
        delta.deltaPercentile === null
          ? ""
          : ` · Δ percentile ${formatSigned(delta.deltaPercentile, 1)}`;
      const boundary = delta.crossed
        ? `crossed: ${delta.baseCondition} → ${delta.trialCondition}`
        : `same rule interval (${delta.baseCondition})`;
      wiOut.innerHTML =
        `<div class="wi-delta" data-role="wi-delta">${esc(points + pct)}</div>` +
        `<div class="wi-boundary" data-role="wi-boundary">${esc(boundary)}</div>`;
    } catch (err) {
      if (seq !== trialSeq) return;
      handleScoreError(err, true);
    }
  };

  // --- events ---
  formHost.addEventListener("input", (event) => {
    const target = event.target as HTMLInputElement;
    const name = target.getAttribute("data-feature");
    if (!name || target.getAttribute("data-role") !== "value") return;
    model = setValue(model, name, target.value);
    clearServerErrors();
    syncForm();
  });
  formHost.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    const name = target.getAttribute("data-feature");
    if (!name || target.getAttribute("data-role") !== "unknown") return;
    model = setUnknown(model, name, target.checked);
    clearServerErrors();
    syncForm();
  });
  $<HTMLFormElement>('[data-role="patient-form"]').addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  wiTry.addEventListener("click", () => {
    void tryWhatIf();
  });
  wiUnknown.addEventListener("change", () => {
    wiValue.disabled = wiUnknown.checked;
  });

  // --- initial paint ---
  renderTable(null);
  renderChart();
  const decoded = decodeQuery(win?.location?.search ?? "", names);
  if (decoded.size > 0) {
    model = applyQuery(model, decoded);
  }
  syncForm();
  if (decoded.size > 0 && canSubmit(model)) {
    await submit(); // a shared link reproduces its submission
  }
};
