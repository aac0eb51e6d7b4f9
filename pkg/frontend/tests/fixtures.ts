// Canonical event-log fixtures mirroring the backend walkthrough.

import type { SessionEvent, ChartSpec } from "../src/types";
import type { UiEvent } from "../src/state";

export const treeChart: ChartSpec = {
  kind: "tree",
  title: "Prescriptive policy tree",
  tree: {
    label: "euribor3m ≤ 2.92",
    children: [
      { label: "action: 0 (900 rows)", children: [], leaf_action: 0, edge: "yes" },
      {
        label: "job ∈ {admin, management}",
        edge: "no",
        children: [
          { label: "action: 3 (700 rows)", children: [], leaf_action: 3, edge: "yes" },
          { label: "action: 1 (400 rows)", children: [], leaf_action: 1, edge: "no" },
        ],
      },
    ],
  },
};

export const barChart: ChartSpec = {
  kind: "bar",
  title: "Current CAMPAIGN distribution",
  series: [{ label: "share of rows", x: ["0", "1", "2"], y: [0.5, 0.3, 0.2] }],
};

export const lineChart: ChartSpec = {
  kind: "line",
  title: "Effect of CAMPAIGN on CONVERSION",
  series: [
    { label: "conditioned", x: [0, 1, 2], y: [0.05, 0.12, 0.2], y_error: [0.01, 0.02, 0.02] },
    { label: "average", x: [0, 1, 2], y: [0.08, 0.1, 0.15] },
  ],
};

export function server(event: Omit<SessionEvent, "seq">, seq: number): UiEvent {
  return { kind: "server", event: { ...event, seq } };
}

// The walkthrough: question -> ack -> tool_started -> tool_result(tree),
// with a condition populated along the way.
export const walkthroughLog: UiEvent[] = [
  { kind: "user_message", text: "What if euribor3m is 4.964?" },
  server({ type: "conditions_changed", payload: { conditions: { euribor3m: 4.964 } } }, 1),
  server({ type: "agent_message", payload: { text: "Working on it!" } }, 2),
  server({ type: "tool_started", payload: { job: "job-1", tool: "counterfactual" } }, 3),
  server(
    {
      type: "tool_result",
      payload: {
        job: "job-1",
        tool: "counterfactual",
        reply: "Here is the result: best_estimate = 19.87%.",
        charts: [lineChart],
      },
    },
    4,
  ),
  { kind: "user_message", text: "Optimize with 4 rules and a budget of 3.5" },
  server({ type: "agent_message", payload: { text: "Running the optimizer." } }, 5),
  server({ type: "tool_started", payload: { job: "job-2", tool: "run_optimize" } }, 6),
  server(
    {
      type: "tool_result",
      payload: {
        job: "job-2",
        tool: "run_optimize",
        reply: "Here is the result: projected_kpi = 24.20%.",
        charts: [barChart, treeChart],
      },
    },
    7,
  ),
];
