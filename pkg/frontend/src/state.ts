// UI state as a pure reduction over the event log.
//
// Replaying the same log always reproduces the same state (and via render()
// the same DOM), which is what the replay tests pin down. Out-of-order
// tool_result events wait until their tool_started acknowledgment has been
// seen; duplicate seq values (SSE reconnect replays) are ignored.

import type { ChartSpec, DatasetInfo, SessionEvent } from "./types";

export interface Message {
  role: "user" | "agent";
  text: string;
  charts: ChartSpec[];
}

export interface UiState {
  messages: Message[];
  conditions: Record<string, unknown>;
  dataset: DatasetInfo | null;
  sampleQuestions: string[];
  connection: "connecting" | "open" | "closed";
  pendingJobs: string[];
  lastSeq: number;
  errors: string[];
  conditionError: string | null;
}

export type UiEvent =
  | { kind: "server"; event: SessionEvent }
  | { kind: "user_message"; text: string }
  | { kind: "dataset"; data: DatasetInfo }
  | { kind: "questions"; list: string[] }
  | { kind: "conditions"; map: Record<string, unknown> }
  | { kind: "condition_error"; message: string | null }
  | { kind: "connection"; status: UiState["connection"] };

export function initialState(): UiState {
  return {
    messages: [],
    conditions: {},
    dataset: null,
    sampleQuestions: [],
    connection: "connecting",
    pendingJobs: [],
    lastSeq: 0,
    errors: [],
    conditionError: null,
  };
}

interface Internal extends UiState {
  orphanResults: SessionEvent[];
}

function asInternal(state: UiState): Internal {
  return { orphanResults: [], ...state } as Internal;
}

function applyServer(state: Internal, event: SessionEvent): Internal {
  if (event.seq <= state.lastSeq) return state; // reconnect replay
  const next: Internal = { ...state, lastSeq: event.seq };
  const payload = event.payload;
  switch (event.type) {
    case "agent_message": {
      next.messages = [
        ...state.messages,
        {
          role: "agent",
          text: String(payload.text ?? ""),
          charts: (payload.charts as ChartSpec[]) ?? [],
        },
      ];
      return next;
    }
    case "tool_started": {
      const job = String(payload.job);
      next.pendingJobs = [...state.pendingJobs, job];
      // a result that raced ahead of its acknowledgment can surface now
      const waiting = state.orphanResults.find((e) => String(e.payload.job) === job);
      if (waiting) {
        next.orphanResults = state.orphanResults.filter((e) => e !== waiting);
        return applyToolResult(next, waiting);
      }
      return next;
    }
    case "tool_result": {
      const job = String(payload.job);
      if (!state.pendingJobs.includes(job)) {
        // never show a result before its acknowledgment
        next.orphanResults = [...state.orphanResults, event];
        return next;
      }
      return applyToolResult(next, event);
    }
    case "conditions_changed": {
      next.conditions = { ...(payload.conditions as Record<string, unknown>) };
      next.conditionError = null;
      return next;
    }
    case "error": {
      next.errors = [...state.errors, String(payload.message ?? "error")];
      const job = payload.job ? String(payload.job) : null;
      if (job) next.pendingJobs = next.pendingJobs.filter((j) => j !== job);
      return next;
    }
  }
  return next;
}

function applyToolResult(state: Internal, event: SessionEvent): Internal {
  const payload = event.payload;
  const job = String(payload.job);
  return {
    ...state,
    pendingJobs: state.pendingJobs.filter((j) => j !== job),
    messages: [
      ...state.messages,
      {
        role: "agent",
        text: String(payload.reply ?? ""),
        charts: (payload.charts as ChartSpec[]) ?? [],
      },
    ],
  };
}

export function reduce(state: UiState, event: UiEvent): UiState {
  const internal = asInternal(state);
  switch (event.kind) {
    case "server":
      return applyServer(internal, event.event);
    case "user_message":
      return { ...internal, messages: [...state.messages, { role: "user", text: event.text, charts: [] }] };
    case "dataset":
      return { ...internal, dataset: event.data };
    case "questions":
      return { ...internal, sampleQuestions: event.list };
    case "conditions":
      return { ...internal, conditions: { ...event.map }, conditionError: null };
    case "condition_error":
      return { ...internal, conditionError: event.message };
    case "connection":
      return { ...internal, connection: event.status };
  }
}

export function replay(events: UiEvent[]): UiState {
  return events.reduce(reduce, initialState());
}
