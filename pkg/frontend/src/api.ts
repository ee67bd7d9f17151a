/** Thin typed client for the /v1 API. All solver math stays on the server;
 * this module only moves JSON. */

import type {
  CompareResponse,
  InstanceDoc,
  SolutionDoc,
  SolveResponse,
  WhatIfRequest,
  WhatIfResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly requestId: string;
  readonly status: number;

  constructor(requestId: string, status: number, message: string) {
    super(`${message} [${requestId}]`);
    this.requestId = requestId;
    this.status = status;
  }
}

let requestCounter = 0;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const requestId = `${method} ${path} #${++requestCounter}`;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, init);
    } catch (err) {
      throw new ApiError(requestId, 0, `service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const doc = await response.json();
        if (doc && typeof doc.error === "string") detail = doc.error;
      } catch {
        // keep the bare status
      }
      throw new ApiError(requestId, response.status, detail);
    }
    return (await response.json()) as T;
  }

  uploadInstance(doc: InstanceDoc): Promise<{ id: string }> {
    return this.request("POST", "/v1/instances", doc);
  }

  getInstance(id: string): Promise<InstanceDoc> {
    return this.request("GET", `/v1/instances/${id}`);
  }

  solve(
    instanceId: string,
    mode: string,
    timeLimitS = 30,
    seed = 0,
  ): Promise<SolveResponse> {
    return this.request("POST", `/v1/instances/${instanceId}/solve`, {
      mode,
      time_limit_s: timeLimitS,
      seed,
    });
  }

  getSolution(id: string): Promise<SolutionDoc> {
    return this.request("GET", `/v1/solutions/${id}`);
  }

  whatIf(instanceId: string, body: WhatIfRequest): Promise<WhatIfResponse> {
    return this.request("POST", `/v1/instances/${instanceId}/whatif`, body);
  }

  compare(a: string, b: string): Promise<CompareResponse> {
    return this.request("GET", `/v1/compare?a=${encodeURIComponent(a)}&b=${encodeURIComponent(b)}`);
  }
}
