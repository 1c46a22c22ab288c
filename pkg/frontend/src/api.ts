/** Typed client for the match service. fetch is injectable for tests. */

import type {
  CandidateList,
  MatchLabel,
  SourceInfo,
  Verdict,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export interface ClientOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: FetchLike;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

interface Health {
  status: string;
  model_version: string;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly token?: string;
  private readonly fetchImpl: FetchLike;

  constructor(opts: ClientOptions) {
    this.baseUrl = opts.baseUrl.replace(/\/+$/, "");
    this.token = opts.token;
    this.fetchImpl =
      opts.fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    // the service guards /api/* only; /healthz stays open
    if (this.token && path.startsWith("/api/")) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceError(0, "network", String(err));
    }
    if (!resp.ok) {
      let code = `http_${resp.status}`;
      let message = resp.statusText;
      try {
        const parsed = (await resp.json()) as {
          code?: string;
          message?: string;
        };
        if (parsed.code) code = parsed.code;
        if (parsed.message) message = parsed.message;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ServiceError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  async healthz(): Promise<Health> {
    return this.request<Health>("GET", "/healthz");
  }

  /** The service may return bare names or objects; normalize to objects. */
  async sources(): Promise<SourceInfo[]> {
    const body = await this.request<{ sources: (string | SourceInfo)[] }>(
      "GET",
      "/api/sources",
    );
    return body.sources.map((s) => (typeof s === "string" ? { name: s } : s));
  }

  async candidates(
    source: string,
    top = 20,
    features = false,
  ): Promise<CandidateList> {
    const params = new URLSearchParams({ top: String(top) });
    if (features) params.set("features", "true");
    return this.request<CandidateList>(
      "GET",
      `/api/sources/${encodeURIComponent(source)}/candidates?${params}`,
    );
  }

  async labels(): Promise<MatchLabel[]> {
    const body = await this.request<{ labels: MatchLabel[] }>(
      "GET",
      "/api/labels",
    );
    return body.labels;
  }

  async submitLabel(
    source: string,
    target: string,
    verdict: Verdict,
    curator: string,
  ): Promise<{ id: number; label: MatchLabel }> {
    return this.request("POST", "/api/labels", {
      source,
      target,
      verdict,
      curator,
    });
  }

  async retrain(): Promise<{ model_version: string }> {
    return this.request("POST", "/api/retrain", {});
  }

  async metrics(): Promise<unknown> {
    return this.request("GET", "/api/metrics");
  }
}
