import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Captured {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: unknown;
}

function clientWith(
  status: number,
  payload: unknown,
  captured: Captured[] = [],
): ApiClient {
  const fakeFetch = (async (url: RequestInfo | URL, init?: RequestInit) => {
    captured.push({
      url: String(url),
      method: init?.method ?? "GET",
      headers: (init?.headers ?? {}) as Record<string, string>,
      body: init?.body !== undefined ? JSON.parse(init.body as string) : undefined,
    });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
  return new ApiClient({ baseUrl: "http://test", token: "tok" }, fakeFetch);
}

describe("ApiClient", () => {
  it("sends the bearer token on every request", async () => {
    const captured: Captured[] = [];
    const client = clientWith(200, { status: "ok" }, captured);
    await client.getProblem("p-1");
    expect(captured[0]!.headers.Authorization).toBe("Bearer tok");
    expect(captured[0]!.url).toBe("http://test/v1/problems/p-1");
  });

  it("posts submissions with the draft attached", async () => {
    const captured: Captured[] = [];
    const client = clientWith(200, { verdict: "correct" }, captured);
    await client.submit("s1", "p-1", "687", { data: "aGk=", media_type: "image/png" });
    expect(captured[0]!.method).toBe("POST");
    expect(captured[0]!.body).toEqual({
      student_id: "s1",
      problem_id: "p-1",
      answer: "687",
      draft: { data: "aGk=", media_type: "image/png" },
    });
  });

  it("omits the draft field when none is given", async () => {
    const captured: Captured[] = [];
    const client = clientWith(200, { verdict: "redo_requested" }, captured);
    await client.submit("s1", "p-1", "687");
    expect(captured[0]!.body).not.toHaveProperty("draft");
  });

  it("raises ApiError from the error envelope", async () => {
    const client = clientWith(503, {
      code: "BackendUnavailable",
      message: "backend timed out",
      retriable: true,
    });
    const error = await client.getProblem("p-1").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(503);
    expect(error.code).toBe("BackendUnavailable");
    expect(error.retriable).toBe(true);
    expect(error.message).toBe("backend timed out");
  });

  it("survives non-JSON error bodies", async () => {
    const fakeFetch = (async () =>
      new Response("gateway exploded", { status: 502 })) as typeof fetch;
    const client = new ApiClient({ baseUrl: "http://test", token: "t" }, fakeFetch);
    const error = await client.getSession("x").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(502);
    expect(error.retriable).toBe(false);
  });

  it("escapes path parameters", async () => {
    const captured: Captured[] = [];
    const client = clientWith(200, {}, captured);
    await client.getSession("a/b c");
    expect(captured[0]!.url).toBe("http://test/v1/sessions/a%2Fb%20c");
  });
});
