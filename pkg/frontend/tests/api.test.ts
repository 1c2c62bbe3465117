import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";
import type { TrajectoryBody } from "../src/types.js";
import { pngBytes } from "./mock_backend.js";

interface RecordedCall {
  url: string;
  init?: RequestInit;
}

function canned(status: number, payload: unknown): Response {
  const body = JSON.stringify(payload);
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(JSON.parse(body) as unknown),
    arrayBuffer: () => Promise.resolve(new TextEncoder().encode(body).buffer),
  } as unknown as Response;
}

function recorder(status = 200, payload: unknown = {}): { calls: RecordedCall[]; fetch: FetchLike } {
  const calls: RecordedCall[] = [];
  return {
    calls,
    fetch: (url, init) => {
      calls.push({ url, init });
      return Promise.resolve(canned(status, payload));
    },
  };
}

const trajectory: TrajectoryBody = {
  id: "inst-000.t0",
  instance_id: "inst-000",
  provenance: "synthesized",
  turns: [{ think: "look", tool_call: null, answer: "delta" }],
};

describe("ApiClient request formatting", () => {
  it("lists items with query parameters", async () => {
    const { calls, fetch } = recorder(200, { items: [], total: 0, page: 2, page_size: 10 });
    const api = new ApiClient("http://backend:9000", fetch);
    await api.listItems({ status: "pending", page: 2, pageSize: 10 });
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://backend:9000/items?status=pending&page=2&page_size=10");
  });

  it("lists items without parameters when none are given", async () => {
    const { calls, fetch } = recorder(200, { items: [], total: 0, page: 1, page_size: 20 });
    const api = new ApiClient("http://backend:9000/", fetch);
    await api.listItems();
    expect(calls[0].url).toBe("http://backend:9000/items");
  });

  it("sends decisions as POST with the exact body keys", async () => {
    const { calls, fetch } = recorder();
    const api = new ApiClient("http://backend", fetch);
    await api.decide("inst-000.t0", "accept", "alex", 3);
    expect(calls[0].url).toBe("http://backend/items/inst-000.t0/decision");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      action: "accept",
      reviewer: "alex",
      expected_version: 3,
    });
  });

  it("sends edits as PUT with trajectory, reviewer, and expected_version", async () => {
    const { calls, fetch } = recorder();
    const api = new ApiClient("http://backend", fetch);
    await api.saveBody("inst-000.t0", trajectory, "alex", 1);
    expect(calls[0].url).toBe("http://backend/items/inst-000.t0/body");
    expect(calls[0].init?.method).toBe("PUT");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({
      trajectory,
      reviewer: "alex",
      expected_version: 1,
    });
  });

  it("posts the export path", async () => {
    const { calls, fetch } = recorder(200, {
      total: 0,
      exported: 0,
      counts: { pending: 0, accepted: 0, dropped: 0, edited: 0 },
      log_head: "",
    });
    const api = new ApiClient("http://backend", fetch);
    await api.exportCurated("curated.jsonl");
    expect(calls[0].url).toBe("http://backend/export");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({ path: "curated.jsonl" });
  });
});

describe("write-version guard", () => {
  it.each([0, -1, 1.5, Number.NaN])("refuses to send a decision with version %s", async (version) => {
    const { calls, fetch } = recorder();
    const api = new ApiClient("http://backend", fetch);
    await expect(api.decide("x", "accept", "alex", version)).rejects.toThrow(/known item version/);
    expect(calls).toHaveLength(0);
  });

  it("refuses to send an edit without a valid version", async () => {
    const { calls, fetch } = recorder();
    const api = new ApiClient("http://backend", fetch);
    await expect(api.saveBody("x", trajectory, "alex", 0)).rejects.toThrow(/known item version/);
    expect(calls).toHaveLength(0);
  });
});

describe("error mapping", () => {
  it("maps HTTP errors onto ApiError with the server's code", async () => {
    const fetch: FetchLike = () =>
      Promise.resolve(canned(409, { code: "version_conflict", message: "item x is at version 2" }));
    const api = new ApiClient("http://backend", fetch);
    const err = await api.decide("x", "drop", "alex", 1).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).code).toBe("version_conflict");
    expect((err as ApiError).message).toBe("item x is at version 2");
  });

  it("carries the violation list on validation failures", async () => {
    const violations = [{ code: "grounding", turn_index: 1, message: "box outside evidence" }];
    const fetch: FetchLike = () =>
      Promise.resolve(canned(422, { code: "validation_failed", message: "rejected", violations }));
    const api = new ApiClient("http://backend", fetch);
    const err = (await api.saveBody("x", trajectory, "alex", 1).catch((e: unknown) => e)) as ApiError;
    expect(err.code).toBe("validation_failed");
    expect(err.violations).toEqual(violations);
  });

  it("maps network failures onto status 0 / unreachable", async () => {
    const fetch: FetchLike = () => Promise.reject(new TypeError("fetch failed"));
    const api = new ApiClient("http://backend", fetch);
    const err = (await api.listItems().catch((e: unknown) => e)) as ApiError;
    expect(err.status).toBe(0);
    expect(err.code).toBe("unreachable");
  });
});

describe("asset probing", () => {
  it("reads the pixel size from served PNG bytes", async () => {
    const fetch: FetchLike = () =>
      Promise.resolve({
        ok: true,
        status: 200,
        arrayBuffer: () => {
          const bytes = pngBytes(48, 30);
          return Promise.resolve(bytes.buffer.slice(0, bytes.byteLength));
        },
      } as unknown as Response);
    const api = new ApiClient("http://backend", fetch);
    expect(await api.probePng("/items/x/frames/0")).toEqual({ width: 48, height: 30 });
  });

  it("returns null for a missing asset", async () => {
    const fetch: FetchLike = () =>
      Promise.resolve(canned(404, { code: "not_found", message: "no frame" }));
    const api = new ApiClient("http://backend", fetch);
    expect(await api.probePng("/items/x/frames/9")).toBeNull();
  });

  it("rejects non-PNG bytes", async () => {
    const fetch: FetchLike = () =>
      Promise.resolve({
        ok: true,
        status: 200,
        arrayBuffer: () => Promise.resolve(new TextEncoder().encode("not an image").buffer),
      } as unknown as Response);
    const api = new ApiClient("http://backend", fetch);
    await expect(api.probePng("/items/x/frames/0")).rejects.toThrow(/not a PNG/);
  });

  it("joins relative asset paths onto the base URL", () => {
    const api = new ApiClient("http://backend:9000/");
    expect(api.assetUrl("/items/x/frames/0")).toBe("http://backend:9000/items/x/frames/0");
    expect(api.assetUrl("items/x/frames/0")).toBe("http://backend:9000/items/x/frames/0");
  });
});
