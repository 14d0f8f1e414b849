/** Thin fetch client for the engine API.
 *
 * Concurrent duplicate requests are deduplicated per request key (e.g. one
 * in-flight candidates call per contingency+method+top), and slow candidate
 * evaluations transparently follow the 202 + poll-token protocol.
 */

import type {
  CandidatesResponse,
  CaseSummary,
  ContingencyRow,
  Method,
  WhatifResponse,
} from "./types";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(detail, response.status);
}

const POLL_INTERVAL_MS = 400;

export class ApiClient {
  private inflight = new Map<string, Promise<unknown>>();

  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private dedup<T>(key: string, run: () => Promise<T>): Promise<T> {
    const existing = this.inflight.get(key);
    if (existing) return existing as Promise<T>;
    const p = run().finally(() => this.inflight.delete(key));
    this.inflight.set(key, p);
    return p;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (response.status === 202) {
      const { job_token } = (await response.json()) as { job_token: string };
      return this.pollJob<T>(job_token);
    }
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as T;
  }

  private async pollJob<T>(token: string): Promise<T> {
    for (;;) {
      await new Promise((resolve) => setTimeout(resolve, POLL_INTERVAL_MS));
      const response = await this.fetchFn(`${this.baseUrl}/api/jobs/${token}`);
      if (response.status === 202) continue;
      if (!response.ok) throw await errorFrom(response);
      return (await response.json()) as T;
    }
  }

  caseSummary(): Promise<CaseSummary> {
    return this.dedup("case", () => this.getJson<CaseSummary>("/api/case"));
  }

  async contingencies(criticalOnly = true): Promise<ContingencyRow[]> {
    const body = await this.dedup(`contingencies|${criticalOnly}`, () =>
      this.getJson<{ data: ContingencyRow[] }>(
        `/api/contingencies?criticalOnly=${criticalOnly}`,
      ),
    );
    return body.data;
  }

  candidates(contingencyId: string, method: Method, top = 5): Promise<CandidatesResponse> {
    return this.dedup(`candidates|${contingencyId}|${method}|${top}`, () =>
      this.postJson<CandidatesResponse>(
        `/api/contingencies/${encodeURIComponent(contingencyId)}/candidates`,
        { method, top },
      ),
    );
  }

  whatif(contingencyId: string, branchId: string): Promise<WhatifResponse> {
    return this.dedup(`whatif|${contingencyId}|${branchId}`, () =>
      this.postJson<WhatifResponse>("/api/whatif", {
        contingency_id: contingencyId,
        open_branch_id: branchId,
      }),
    );
  }
}
