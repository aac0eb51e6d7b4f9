// Server-sent events subscription with Last-Event-ID resume.

import type { SessionEvent } from "./types";

export type EventHandler = (event: SessionEvent) => void;
export type StatusHandler = (status: "connecting" | "open" | "closed") => void;

const EVENT_TYPES = [
  "agent_message",
  "tool_started",
  "tool_result",
  "conditions_changed",
  "error",
] as const;

export function connectEvents(
  sessionId: string,
  onEvent: EventHandler,
  onStatus: StatusHandler,
  base = "",
): () => void {
  let lastSeq = 0;
  let source: EventSource | null = null;
  let closed = false;

  const open = () => {
    if (closed) return;
    onStatus("connecting");
    // EventSource cannot set headers; resume via query parameter instead
    const url = `${base}/api/sessions/${sessionId}/events?last_event_id=${lastSeq}`;
    source = new EventSource(url);
    source.onopen = () => onStatus("open");
    for (const type of EVENT_TYPES) {
      source.addEventListener(type, (raw) => {
        const message = raw as MessageEvent<string>;
        const parsed = JSON.parse(message.data) as SessionEvent;
        lastSeq = Math.max(lastSeq, parsed.seq);
        onEvent(parsed);
      });
    }
    source.onerror = () => {
      onStatus("closed");
      source?.close();
      if (!closed) setTimeout(open, 1000); // reconnect resumes from lastSeq
    };
  };

  open();
  return () => {
    closed = true;
    source?.close();
  };
}
