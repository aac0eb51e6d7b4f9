// Wire types mirrored from the backend API.

export interface Series {
  label: string;
  x: (number | string)[];
  y: number[];
  y_error?: number[];
}

export interface TreeNodeSpec {
  label: string;
  children: TreeNodeSpec[];
  leaf_action?: unknown;
  edge?: string;
}

export interface ChartSpec {
  kind: "bar" | "line" | "tree";
  title: string;
  series?: Series[];
  tree?: TreeNodeSpec;
}

export interface SessionEvent {
  type: "agent_message" | "tool_started" | "tool_result" | "conditions_changed" | "error";
  payload: Record<string, unknown>;
  seq: number;
}

export interface ColumnSpec {
  name: string;
  dtype: string;
  description: string;
  supported: boolean;
}

export interface DatasetInfo {
  metadata: {
    title: string;
    action: string;
    outcome: string;
    columns: ColumnSpec[];
  };
  preview: Record<string, unknown>[];
  row_count: number;
}

export interface TurnResult {
  reply: string;
  charts: ChartSpec[];
  intent: string;
  missing: string[];
  job: string | null;
  conditions_snapshot: Record<string, unknown>;
}
