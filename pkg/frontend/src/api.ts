import type {
  FeatureValues,
  PopulationResponse,
  ScorecardDoc,
  ScoreResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly body: unknown;

  constructor(status: number, body: unknown, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.body = body;
  }
}

/**
 * Thin client for the scoring service. Identical requests that are
 * still in flight share one network call, so a double-clicked submit
 * or a repeated what-if probe costs nothing extra.
 */
export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;
  private readonly inflight = new Map<string, Promise<unknown>>();

  constructor(base: string, fetchFn?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  scorecard(): Promise<ScorecardDoc> {
    return this.request("GET", "/api/scorecard") as Promise<ScorecardDoc>;
  }

  population(): Promise<PopulationResponse> {
    return this.request("GET", "/api/population") as Promise<PopulationResponse>;
  }

  score(features: FeatureValues): Promise<ScoreResponse> {
    return this.request("POST", "/api/score", { features }) as Promise<ScoreResponse>;
  }

  private request(method: string, path: string, body?: unknown): Promise<unknown> {
    const key = `${method} ${path} ${body === undefined ? "" : JSON.stringify(body)}`;
    const pending = this.inflight.get(key);
    if (pending) return pending;
    const p = this.send(method, path, body).finally(() => {
      this.inflight.delete(key);
    });
    this.inflight.set(key, p);
    return p;
  }

  private async send(method: string, path: string, body?: unknown): Promise<unknown> {
    let res: Response;
    try {
      res = await this.fetchFn(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, null, `service unreachable: ${String(err)}`);
    }
    const text = await res.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = text;
    }
    if (!res.ok) {
      throw new ApiError(res.status, parsed, `HTTP ${res.status} on ${path}`);
    }
    return parsed;
  }
}
