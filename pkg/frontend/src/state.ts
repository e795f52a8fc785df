/**
 * Pure state transitions for the chat view.  Every function returns a new
 * state; callers re-render from the result.  Keeping these free of IO makes
 * the invariants (token concatenation, reload idempotence, 409 rollback)
 * directly testable.
 */

import type { ChatMessage, ChatViewState, MetaData, SessionView } from "./types.js";

export function initialState(): ChatViewState {
  return {
    sessionId: null,
    moduleId: null,
    messages: [],
    streaming: false,
    banner: null,
    toast: null,
  };
}

/**
 * Rebuild the message list from a server-side transcript.  Intent lives on
 * the student turn and strategy on the tutor turn, so the badge for a tutor
 * bubble pairs each tutor turn with the student turn before it.
 */
export function historyToMessages(view: SessionView): ChatMessage[] {
  let pendingIntent = "";
  return view.turns.map((turn) => {
    const message: ChatMessage = { role: turn.role, text: turn.text };
    if (turn.role === "student") {
      pendingIntent = turn.intent ?? "";
    } else if (turn.strategy) {
      message.meta = {
        intent: pendingIntent,
        strategy: turn.strategy,
        tags_used: turn.tags_used ?? [],
        hint_level: 0,
        module_id: "",
      };
    }
    if (turn.error_code) message.error = turn.error_code;
    return message;
  });
}

/** Push the student message plus an empty tutor bubble and lock the input. */
export function beginExchange(state: ChatViewState, text: string): ChatViewState {
  return {
    ...state,
    messages: [
      ...state.messages,
      { role: "student", text },
      { role: "tutor", text: "" },
    ],
    streaming: true,
    toast: null,
  };
}

function updateLast(
  state: ChatViewState,
  update: (last: ChatMessage) => ChatMessage,
): ChatViewState {
  if (state.messages.length === 0) return state;
  const messages = state.messages.slice();
  messages[messages.length - 1] = update(messages[messages.length - 1]);
  return { ...state, messages };
}

export function applyMeta(state: ChatViewState, meta: MetaData): ChatViewState {
  return updateLast(state, (last) => ({ ...last, meta }));
}

export function appendToken(state: ChatViewState, token: string): ChatViewState {
  return updateLast(state, (last) => ({ ...last, text: last.text + token }));
}

export function completeExchange(state: ChatViewState): ChatViewState {
  return { ...state, streaming: false };
}

/** Flag the in-progress bubble and re-enable sending. */
export function failExchange(state: ChatViewState, code: string): ChatViewState {
  const flagged = updateLast(state, (last) => ({ ...last, error: code }));
  return { ...flagged, streaming: false };
}

export function withToast(state: ChatViewState, toast: string): ChatViewState {
  return { ...state, toast };
}

export function withBanner(state: ChatViewState, banner: string | null): ChatViewState {
  return { ...state, banner };
}
