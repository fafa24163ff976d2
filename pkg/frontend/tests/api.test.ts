import { describe, expect, it, vi } from "vitest";

import { ApiClient, OfflineQueue, ServiceError } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("hits the documented endpoints with encoded grids", async () => {
    const calls: string[] = [];
    const fetchFn = vi.fn(async (url: RequestInfo | URL) => {
      calls.push(String(url));
      return jsonResponse(200, []);
    });
    const client = new ApiClient("http://svc", fetchFn as unknown as typeof fetch);
    await client.getPredictions("abc", [[0.1], [0.2]]);
    await client.getCriterion("abc", [[0.1, 0.9]]);
    expect(calls[0]).toBe("http://svc/api/campaigns/abc/predictions?grid=0.1%3B0.2");
    expect(calls[1]).toBe("http://svc/api/campaigns/abc/criterion?grid=0.1%2C0.9");
  });

  it("maps error bodies onto ServiceError", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(422, { code: "validation", message: "bad x", field: "x" }));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    await expect(client.getCampaign("nope")).rejects.toMatchObject({
      status: 422,
      body: { code: "validation", field: "x" },
    });
  });

  it("identical campaign state produces identical request payloads", async () => {
    const bodies: string[] = [];
    const fetchFn = vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
      bodies.push(String(init?.body ?? ""));
      return jsonResponse(200, { id: "x" });
    });
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const obs = { x: [0.25], value: 0.4, censored: false };
    await client.submitObservation("abc", obs);
    await client.submitObservation("abc", obs);
    expect(bodies[0]).toBe(bodies[1]); // deterministic serialization
  });
});

describe("OfflineQueue", () => {
  it("queues network failures and replays them in order", async () => {
    let online = false;
    const sent: string[] = [];
    const fetchFn = vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
      if (!online) throw new TypeError("fetch failed");
      sent.push(String(init?.body));
      return jsonResponse(200, { id: "x" });
    });
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const queue = new OfflineQueue();

    const r1 = await queue.submit(client, "c1", { x: [0.1], value: 0.2, censored: false });
    const r2 = await queue.submit(client, "c1", { x: [0.3], value: null, censored: true });
    expect(r1.queued && r2.queued).toBe(true);
    expect(queue.length).toBe(2);

    online = true;
    const replayed = await queue.replay(client);
    expect(replayed).toBe(2);
    expect(queue.length).toBe(0);
    expect(sent).toHaveLength(2);
    expect(JSON.parse(sent[0]!).x).toEqual([0.1]); // order preserved
  });

  it("does not queue validation errors", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(422, { code: "validation", message: "bad" }));
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const queue = new OfflineQueue();
    await expect(
      queue.submit(client, "c1", { x: [2.0], value: 0.2, censored: false }),
    ).rejects.toBeInstanceOf(ServiceError);
    expect(queue.length).toBe(0);
  });

  it("drops conflict responses during replay (already accepted)", async () => {
    let calls = 0;
    const fetchFn = vi.fn(async () => {
      calls += 1;
      return jsonResponse(409, { code: "conflict", message: "seq_token reused" });
    });
    const client = new ApiClient("", fetchFn as unknown as typeof fetch);
    const queue = new OfflineQueue();
    const offline = vi.fn(async () => { throw new TypeError("fetch failed"); });
    await queue.submit(new ApiClient("", offline as unknown as typeof fetch), "c1",
      { x: [0.1], value: 0.2, censored: false, seq_token: "t" });
    expect(queue.length).toBe(1);
    await queue.replay(client);
    expect(queue.length).toBe(0);
    expect(calls).toBe(1);
  });
});
