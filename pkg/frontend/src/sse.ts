/** Incremental parser for text/event-stream response bodies. */

import type { ServerEvent } from "./types.js";

const EVENT_KINDS = new Set(["meta", "token", "done", "error"]);

/**
 * Split buffered stream text into complete frames.  Returns the parsed
 * frames plus whatever trailing partial frame must be kept for the next
 * chunk.
 */
export function emitFrames(buffer: string): { frames: string[]; rest: string } {
  const parts = buffer.split(/\r?\n\r?\n/);
  const rest = parts.pop() ?? "";
  return { frames: parts.filter((p) => p.trim().length > 0), rest };
}

/** Parse one frame into a typed event, or null for frames we ignore. */
export function parseFrame(frame: string): ServerEvent | null {
  let kind = "";
  const dataLines: string[] = [];
  for (const line of frame.split(/\r?\n/)) {
    if (line.startsWith("event:")) {
      kind = line.slice(6).trim();
    } else if (line.startsWith("data:")) {
      dataLines.push(line.slice(5).trim());
    }
    // comment lines and unknown fields fall through
  }
  if (!EVENT_KINDS.has(kind) || dataLines.length === 0) return null;
  try {
    const data = JSON.parse(dataLines.join("\n"));
    return { kind, data } as ServerEvent;
  } catch {
    return null;
  }
}

/**
 * Read a streaming body and invoke `onEvent` for each server event as it
 * arrives.  Resolves when the stream ends.
 */
export async function readServerEvents(
  body: ReadableStream<Uint8Array>,
  onEvent: (event: ServerEvent) => void,
): Promise<void> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      const { frames, rest } = emitFrames(buffer);
      buffer = rest;
      for (const frame of frames) {
        const event = parseFrame(frame);
        if (event) onEvent(event);
      }
    }
    // flush a final frame that arrived without a trailing blank line
    buffer += decoder.decode();
    if (buffer.trim()) {
      const event = parseFrame(buffer);
      if (event) onEvent(event);
    }
  } finally {
    reader.releaseLock();
  }
}
