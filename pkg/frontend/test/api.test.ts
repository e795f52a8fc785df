import { describe, expect, it } from "vitest";

import { HttpError, TutorApi } from "../src/api.js";

type Handler = (url: string, init?: RequestInit) => Response | Promise<Response>;

function apiWith(handler: Handler): { api: TutorApi; calls: Array<{ url: string; init?: RequestInit }> } {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fetchImpl = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push({ url, init });
    return handler(url, init);
  }) as typeof fetch;
  return { api: new TutorApi("http://server", fetchImpl), calls };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

const SSE_BODY =
  'event: meta\ndata: {"intent":"TaskHelp","strategy":"HintFirst","tags_used":["hint"],"hint_level":1,"module_id":"m1"}\n\n' +
  'event: token\ndata: {"text":"a"}\n\n' +
  'event: token\ndata: {"text":"b"}\n\n' +
  'event: done\ndata: {"finish_reason":"stop"}\n\n';

describe("TutorApi", () => {
  it("createSession posts and returns the id", async () => {
    const { api, calls } = apiWith(() => json({ session_id: "deadbeef" }, 201));
    expect(await api.createSession()).toBe("deadbeef");
    expect(calls[0].url).toBe("http://server/api/sessions");
    expect(calls[0].init?.method).toBe("POST");
  });

  it("getSession returns null for a vanished session", async () => {
    const { api } = apiWith(() =>
      json({ code: "unknown_session", message: "no such session" }, 404),
    );
    expect(await api.getSession("gone")).toBeNull();
  });

  it("surfaces the server error envelope on other failures", async () => {
    const { api } = apiWith(() => json({ code: "shutdown", message: "draining" }, 503));
    const err = await api.health().catch((e) => e);
    expect(err).toBeInstanceOf(HttpError);
    expect(err.status).toBe(503);
    expect(err.code).toBe("shutdown");
    expect(err.message).toBe("draining");
  });

  it("sendMessage posts text and module and streams handler calls in order", async () => {
    const { api, calls } = apiWith(() => new Response(SSE_BODY, { status: 200 }));
    const seen: string[] = [];
    await api.sendMessage("s1", "help", "m1", {
      onMeta: (meta) => seen.push(`meta:${meta.strategy}`),
      onToken: (text) => seen.push(`token:${text}`),
      onDone: (reason) => seen.push(`done:${reason}`),
      onError: (code) => seen.push(`error:${code}`),
    });
    expect(seen).toEqual(["meta:HintFirst", "token:a", "token:b", "done:stop"]);
    expect(calls[0].url).toBe("http://server/api/sessions/s1/messages");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      text: "help",
      module_id: "m1",
    });
  });

  it("sendMessage omits module_id when none is selected", async () => {
    const { api, calls } = apiWith(() => new Response(SSE_BODY, { status: 200 }));
    await api.sendMessage("s1", "help", null, {});
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ text: "help" });
  });

  it("sendMessage throws on 409 before any handler fires", async () => {
    const { api } = apiWith(() => json({ code: "busy", message: "in use" }, 409));
    const seen: string[] = [];
    const err = await api
      .sendMessage("s1", "help", null, {
        onMeta: () => seen.push("meta"),
        onToken: () => seen.push("token"),
      })
      .catch((e) => e);
    expect(err).toBeInstanceOf(HttpError);
    expect(err.status).toBe(409);
    expect(seen).toEqual([]);
  });

  it("delivers stream error events through onError", async () => {
    const body =
      'event: meta\ndata: {"intent":"TaskHelp","strategy":"HintFirst","tags_used":[],"hint_level":0,"module_id":"m1"}\n\n' +
      'event: token\ndata: {"text":"par"}\n\n' +
      'event: error\ndata: {"code":"provider_error","message":"boom"}\n\n';
    const { api } = apiWith(() => new Response(body, { status: 200 }));
    const seen: string[] = [];
    await api.sendMessage("s1", "help", null, {
      onToken: (t) => seen.push(`token:${t}`),
      onError: (code) => seen.push(`error:${code}`),
    });
    expect(seen).toEqual(["token:par", "error:provider_error"]);
  });
});
