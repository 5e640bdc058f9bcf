import { describe, expect, it } from "vitest";

import { ApiError, StoreApi, TransportError } from "../src/api";

function cannedFetch(status: number, doc: unknown) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fn: typeof fetch = async (input, init) => {
    calls.push({ url: String(input), init });
    return new Response(JSON.stringify(doc), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { fn, calls };
}

describe("StoreApi", () => {
  it("strips trailing slashes from the endpoint", async () => {
    const { fn, calls } = cannedFetch(200, { problems: [] });
    await new StoreApi("http://h:1///", fn).listProblems();
    expect(calls[0].url).toBe("http://h:1/v1/problems");
  });

  it("sends 1-based coordinate indices on the wire", async () => {
    const { fn, calls } = cannedFetch(200, { ok: true, epoch: 0 });
    const api = new StoreApi("http://h:1", fn);
    await api.writeC("p1", 0, 1.5, "w-1");
    await api.varSlot("p1", 4);
    expect(calls[0].url).toBe("http://h:1/v1/problems/p1/c/1");
    expect(calls[0].init?.method).toBe("PUT");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      value: 1.5,
      wid: "w-1",
    });
    expect(calls[1].url).toBe("http://h:1/v1/problems/p1/var/5");
  });

  it("parses the error envelope into ApiError", async () => {
    const { fn, calls } = cannedFetch(409, {
      error: { code: "paused", message: "instance is paused" },
    });
    const api = new StoreApi("http://h:1", fn);
    const err = await api.writeC("p1", 0, 1, "w-1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("paused");
    // Writes fail loudly exactly once; nothing retries behind the caller.
    expect(calls.length).toBe(1);
  });

  it("wraps network failures in TransportError", async () => {
    const api = new StoreApi("http://h:1", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await api.meta("p1").catch((e) => e);
    expect(err).toBeInstanceOf(TransportError);
  });

  it("builds control and observation bodies", async () => {
    const { fn, calls } = cannedFetch(200, { ok: true });
    const api = new StoreApi("http://h:1", fn);
    await api.control("p1", "set_rho", 0.75);
    await api.observe("p1", [1, 2]);
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      action: "set_rho",
      value: 0.75,
    });
    expect(JSON.parse(String(calls[1].init?.body))).toEqual({ y: [1, 2] });
  });

  it("points the event stream at the documented route", () => {
    const api = new StoreApi("http://h:1");
    expect(api.eventsUrl("p9")).toBe("http://h:1/v1/problems/p9/events");
  });
});
