/** Orchestration between the API client, storage, and view state. */

import { HttpError, TutorApi } from "./api.js";
import {
  appendToken,
  applyMeta,
  beginExchange,
  completeExchange,
  failExchange,
  historyToMessages,
  initialState,
  withBanner,
  withToast,
} from "./state.js";
import { loadSessionId, saveSessionId, type SessionStorageLike } from "./storage.js";
import type { ChatViewState } from "./types.js";

export const UNREACHABLE_BANNER =
  "Cannot reach the tutoring service. Check your connection and retry.";
export const BUSY_TOAST = "A reply is still streaming in another tab. Try again in a moment.";

/**
 * Restore the stored session when the server still knows it, otherwise
 * create a fresh one.  The returned state carries the replayed transcript.
 */
export async function startOrResume(
  api: TutorApi,
  storage: SessionStorageLike,
): Promise<ChatViewState> {
  let state = initialState();
  try {
    const storedId = loadSessionId(storage);
    if (storedId) {
      const view = await api.getSession(storedId);
      if (view) {
        return { ...state, sessionId: storedId, messages: historyToMessages(view) };
      }
      // the server dropped it (gc, wipe); fall through to a new session
    }
    const sessionId = await api.createSession();
    saveSessionId(storage, sessionId);
    return { ...state, sessionId };
  } catch (err) {
    if (err instanceof HttpError) throw err;
    return withBanner(state, UNREACHABLE_BANNER);
  }
}

/**
 * Run one send/stream round trip.  Returns the final state; `onRender` sees
 * every intermediate state so the UI can paint tokens as they arrive.
 *
 * A concurrent-send rejection leaves the transcript exactly as it was and
 * only sets a toast.
 */
export async function runExchange(
  api: TutorApi,
  state: ChatViewState,
  text: string,
  onRender?: (state: ChatViewState) => void,
): Promise<ChatViewState> {
  if (state.streaming || !text.trim() || !state.sessionId) return state;
  const before = state;
  let current = beginExchange(state, text);
  const render = (next: ChatViewState) => {
    current = next;
    onRender?.(next);
  };
  render(current);
  try {
    await api.sendMessage(state.sessionId, text, state.moduleId, {
      onMeta: (meta) => render(applyMeta(current, meta)),
      onToken: (token) => render(appendToken(current, token)),
      onDone: () => render(completeExchange(current)),
      onError: (code) => render(failExchange(current, code)),
    });
    if (current.streaming) {
      // stream ended without a terminal event; do not leave input locked
      render(failExchange(current, "truncated"));
    }
    return current;
  } catch (err) {
    if (err instanceof HttpError && err.status === 409) {
      const rolledBack = withToast(before, BUSY_TOAST);
      onRender?.(rolledBack);
      return rolledBack;
    }
    const code = err instanceof HttpError ? err.code : "network_error";
    render(failExchange(current, code));
    return current;
  }
}
