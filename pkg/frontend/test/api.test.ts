import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { baseSolve, compareSelf, instanceDoc, upload } from "./fixtures.js";

function clientReturning(status: number, body: unknown, capture?: (url: string, init?: RequestInit) => void) {
  return new ApiClient("http://svc", async (url, init) => {
    capture?.(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  });
}

describe("api client", () => {
  it("uploads an instance and returns the content-addressed id", async () => {
    let seen: string | undefined;
    const client = clientReturning(200, upload, (url) => (seen = url));
    const out = await client.uploadInstance(instanceDoc);
    expect(out.id).toBe(upload.id);
    expect(seen).toBe("http://svc/v1/instances");
  });

  it("posts solve bodies with mode and limit", async () => {
    let body: any;
    const client = clientReturning(200, baseSolve, (_url, init) => {
      body = JSON.parse(String(init?.body));
    });
    const out = await client.solve(upload.id, "proxy", 20);
    expect(out.solution.metrics.cost).toBe(baseSolve.solution.metrics.cost);
    expect(body).toEqual({ mode: "proxy", time_limit_s: 20, seed: 0 });
  });

  it("encodes compare query parameters", async () => {
    let seen: string | undefined;
    const client = clientReturning(200, compareSelf, (url) => (seen = url));
    await client.compare("a b", "c");
    expect(seen).toBe("http://svc/v1/compare?a=a%20b&b=c");
  });

  it("maps service errors to ApiError with a request id", async () => {
    const client = clientReturning(409, { error: "solver busy beyond concurrency budget" });
    try {
      await client.solve("x", "mip");
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      const apiErr = err as ApiError;
      expect(apiErr.status).toBe(409);
      expect(apiErr.message).toContain("solver busy");
      expect(apiErr.requestId).toContain("POST /v1/instances/x/solve");
    }
  });

  it("wraps network failures", async () => {
    const client = new ApiClient("http://svc", async () => {
      throw new Error("connection refused");
    });
    await expect(client.getInstance("x")).rejects.toBeInstanceOf(ApiError);
  });
});
