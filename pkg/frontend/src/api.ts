/** Thin typed client for the tutoring service HTTP/SSE API. */

import { readServerEvents } from "./sse.js";
import type { MetaData, ModuleInfo, ServerEvent, SessionView } from "./types.js";

export class HttpError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "HttpError";
  }
}

export interface StreamHandlers {
  onMeta?: (meta: MetaData) => void;
  onToken?: (text: string) => void;
  onDone?: (reason: string) => void;
  onError?: (code: string, message: string) => void;
}

async function raiseFor(response: Response): Promise<never> {
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") code = body.code;
    if (body && typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; keep the defaults
  }
  throw new HttpError(response.status, code, message);
}

export class TutorApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ status: string; kb_modules: number }> {
    const response = await this.fetchImpl(this.url("/healthz"));
    if (!response.ok) await raiseFor(response);
    return response.json();
  }

  async listModules(): Promise<ModuleInfo[]> {
    const response = await this.fetchImpl(this.url("/api/kb/modules"));
    if (!response.ok) await raiseFor(response);
    return response.json();
  }

  async createSession(): Promise<string> {
    const response = await this.fetchImpl(this.url("/api/sessions"), {
      method: "POST",
    });
    if (!response.ok) await raiseFor(response);
    const body = await response.json();
    return body.session_id;
  }

  /** Fetch a session transcript; null when the server no longer has it. */
  async getSession(sessionId: string): Promise<SessionView | null> {
    const response = await this.fetchImpl(
      this.url(`/api/sessions/${encodeURIComponent(sessionId)}`),
    );
    if (response.status === 404) return null;
    if (!response.ok) await raiseFor(response);
    return response.json();
  }

  /**
   * Send one student message and stream the reply through `handlers`.
   * Throws HttpError before any handler fires when the server rejects the
   * request (busy tab, unknown session, shutdown).
   */
  async sendMessage(
    sessionId: string,
    text: string,
    moduleId: string | null,
    handlers: StreamHandlers,
  ): Promise<void> {
    const payload: { text: string; module_id?: string } = { text };
    if (moduleId) payload.module_id = moduleId;
    const response = await this.fetchImpl(
      this.url(`/api/sessions/${encodeURIComponent(sessionId)}/messages`),
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      },
    );
    if (!response.ok) await raiseFor(response);
    if (!response.body) {
      throw new HttpError(0, "no_body", "response had no streaming body");
    }
    await readServerEvents(response.body, (event: ServerEvent) => {
      switch (event.kind) {
        case "meta":
          handlers.onMeta?.(event.data);
          break;
        case "token":
          handlers.onToken?.(event.data.text);
          break;
        case "done":
          handlers.onDone?.(event.data.finish_reason);
          break;
        case "error":
          handlers.onError?.(event.data.code, event.data.message);
          break;
      }
    });
  }
}
