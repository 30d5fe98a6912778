/**
 * Full-path checks against the real scoring service: the suite spawns
 * the service CLI on a fixed cardiovascular scorecard, boots the page
 * against it over plain HTTP, and reads results off the DOM. Nothing
 * here is mocked.
 */
import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { afterAll, beforeAll, beforeEach, describe, expect, it } from "vitest";
import { boot } from "../src/app.js";
import { FIXTURE_FILE, waitFor } from "./helpers.js";
import type { PopulationResponse } from "../src/types.js";

const PORT = 8794;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcessWithoutNullStreams | null = null;
let serverLog = "";

beforeAll(async () => {
  server = spawn(
    "riskcard",
    ["serve", "--scorecard", FIXTURE_FILE, "--bind", `127.0.0.1:${PORT}`],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));

  const started = Date.now();
  for (;;) {
    try {
      const res = await fetch(`${BASE}/health`);
      if (res.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() - started > 25000) {
      throw new Error(`scoring service did not come up:\n${serverLog}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
});

afterAll(() => {
  server?.kill("SIGTERM");
});

const resetPage = () => {
  window.history.replaceState(null, "", "/");
  document.body.innerHTML = '<div id="app"></div>';
};

const q = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing ${sel}`);
  return el;
};

const typeInto = (name: string, value: string) => {
  const input = q<HTMLInputElement>(`input[data-role="value"][data-feature="${name}"]`);
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
};

const scorePatient = async () => {
  await boot(document, { apiBase: BASE });
  typeInto("ap_hi", "140");
  typeInto("age", "65");
  typeInto("cholesterol", "3");
  q<HTMLButtonElement>('[data-role="submit"]').click();
  await waitFor(() => !q('[data-role="result"]').hidden, 15000);
};

describe("against the live service", () => {
  beforeEach(resetPage);

  it("scores the reference patient to the full twenty points", async () => {
    await scorePatient();
    expect(q('[data-role="total"]').textContent).toBe("20");
    expect(q('[data-role="total-max"]').textContent).toBe("20");
    expect(q('[data-role="rate"]').textContent).toBe("88.0%");
    expect(q('[data-role="percentile"]').textContent).toBe("100.0");
    expect(q('[data-role="band"]').textContent).toBe("high");

    const active = Array.from(document.querySelectorAll("tr.level.active"));
    expect(active.map((row) => row.getAttribute("data-feature"))).toEqual([
      "ap_hi",
      "age",
      "cholesterol",
    ]);
  });

  it("shows the four point drop when cholesterol returns to normal", async () => {
    await scorePatient();
    q<HTMLSelectElement>('[data-role="wi-feature"]').value = "cholesterol";
    q<HTMLInputElement>('[data-role="wi-value"]').value = "1";
    q<HTMLButtonElement>('[data-role="wi-try"]').click();
    await waitFor(() => document.querySelector('[data-role="wi-delta"]') !== null, 15000);

    expect(q('[data-role="wi-delta"]').textContent).toContain("Δ -4 points");
    expect(q('[data-role="wi-boundary"]').textContent).toBe(
      "crossed: cholesterol > 2.5 → cholesterol <= 1.5",
    );
    // the base submission is still on screen
    expect(q('[data-role="total"]').textContent).toBe("20");
  });

  it("draws exactly the population the service reports", async () => {
    const res = await fetch(`${BASE}/api/population`);
    expect(res.ok).toBe(true);
    const pop = (await res.json()) as PopulationResponse;

    await boot(document, { apiBase: BASE });
    const bars = Array.from(document.querySelectorAll("rect.bar"));
    expect(bars.length).toBe(pop.bins.length);
    bars.forEach((bar, i) => {
      expect(Number(bar.getAttribute("data-count"))).toBe(pop.bins[i].count);
    });
  });
});
