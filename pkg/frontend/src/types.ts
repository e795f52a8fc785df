/** Shared types for the chat client. */

export type Role = "student" | "tutor";

/** Routing metadata attached to a tutor reply. */
export interface MetaData {
  intent: string;
  strategy: string;
  tags_used: string[];
  hint_level: number;
  module_id: string;
  session_id?: string;
  refusal_reason?: string;
}

export interface ChatMessage {
  role: Role;
  text: string;
  meta?: MetaData;
  /** Set when the exchange ended with a server-reported error. */
  error?: string;
}

/** Everything the chat view needs to render one tab. */
export interface ChatViewState {
  sessionId: string | null;
  moduleId: string | null;
  messages: ChatMessage[];
  /** True while a reply is streaming in; send stays disabled. */
  streaming: boolean;
  /** Connectivity banner text, or null when the service is reachable. */
  banner: string | null;
  /** Transient notice (e.g. a concurrent-send rejection), or null. */
  toast: string | null;
}

export interface ModuleInfo {
  id: string;
  title: string;
  topic: string;
  tags: string[];
  hint_ladder_length: number;
  tasks: string[];
}

/**
 * One persisted utterance.  The server sets `intent` on student turns and
 * `strategy`/`tags_used` on tutor turns, and omits fields that are empty.
 */
export interface SessionTurn {
  role: Role;
  text: string;
  at: string;
  intent?: string;
  strategy?: string;
  tags_used?: string[];
  error_code?: string;
}

export interface SessionView {
  session_id: string;
  created_at: string;
  turns: SessionTurn[];
}

/** Events the message stream can deliver, in wire order. */
export type ServerEvent =
  | { kind: "meta"; data: MetaData }
  | { kind: "token"; data: { text: string } }
  | { kind: "done"; data: { finish_reason: string } }
  | { kind: "error"; data: { code: string; message: string } };
