import { beforeEach, describe, expect, it, vi } from "vitest";

import { render, type Handlers } from "../src/render";
import { initialState, reduce, replay } from "../src/state";
import { server, treeChart, walkthroughLog } from "./fixtures";
import type { DatasetInfo } from "../src/types";

function noopHandlers(): Handlers {
  return {
    onSend: vi.fn(),
    onQuestion: vi.fn(),
    onRemoveCondition: vi.fn(),
    onAddCondition: vi.fn(),
    onToggleColumn: vi.fn(),
    onPrint: vi.fn(),
  };
}

const dataset: DatasetInfo = {
  metadata: {
    title: "Bank Marketing",
    action: "CAMPAIGN",
    outcome: "CONVERSION",
    columns: [
      { name: "euribor3m", dtype: "numeric", description: "rate", supported: true },
      { name: "job", dtype: "categorical", description: "occupation", supported: false },
      { name: "CAMPAIGN", dtype: "numeric", description: "calls", supported: true },
      { name: "CONVERSION", dtype: "boolean", description: "subscribed", supported: true },
    ],
  },
  preview: [],
  row_count: 2000,
};

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("replaying fixture logs", () => {
  it("reproduces a deterministic DOM snapshot", () => {
    render(root, replay(walkthroughLog), noopHandlers());
    const first = root.innerHTML;
    render(root, replay(walkthroughLog), noopHandlers());
    expect(root.innerHTML).toBe(first);
  });

  it("renders chat order with right-aligned user messages", () => {
    render(root, replay(walkthroughLog), noopHandlers());
    const bubbles = [...root.querySelectorAll("#messages .msg:not(.pending)")];
    expect(bubbles.map((b) => (b.classList.contains("user") ? "user" : "agent"))).toEqual([
      "user",
      "agent",
      "agent",
      "user",
      "agent",
      "agent",
    ]);
    expect(bubbles[0].textContent).toContain("What if euribor3m is 4.964?");
  });

  it("shows conditions chips from the event log", () => {
    const state = { ...replay(walkthroughLog) };
    render(root, state, noopHandlers());
    const chip = root.querySelector<HTMLElement>('#conditions .chip[data-column="euribor3m"]');
    expect(chip).not.toBeNull();
    expect(chip!.textContent).toContain("euribor3m = 4.964");
  });

  it("labels tree leaves with their actions", () => {
    render(root, replay(walkthroughLog), noopHandlers());
    const leaves = [...root.querySelectorAll(".chart-tree .tree-leaf")];
    expect(leaves.map((l) => l.textContent)).toEqual([
      "yes: action: 0 (900 rows)",
      "yes: action: 3 (700 rows)",
      "no: action: 1 (400 rows)",
    ]);
  });

  it("renders error bands for line series with y_error", () => {
    render(root, replay(walkthroughLog), noopHandlers());
    expect(root.querySelector(".chart-line .error-band")).not.toBeNull();
  });
});

describe("pending indicator", () => {
  it("appears between tool_started and tool_result", () => {
    let state = initialState();
    state = reduce(state, { kind: "user_message", text: "run features" });
    state = reduce(state, server({ type: "agent_message", payload: { text: "On it" } }, 1));
    state = reduce(state, server({ type: "tool_started", payload: { job: "j1", tool: "select_features" } }, 2));
    render(root, state, noopHandlers());
    expect(root.querySelector('.pending[data-job="j1"]')).not.toBeNull();

    state = reduce(
      state,
      server({ type: "tool_result", payload: { job: "j1", tool: "select_features", reply: "done", charts: [] } }, 3),
    );
    render(root, state, noopHandlers());
    expect(root.querySelector(".pending")).toBeNull();
  });

  it("keeps one indicator per in-flight job", () => {
    let state = initialState();
    state = reduce(state, server({ type: "tool_started", payload: { job: "a", tool: "x" } }, 1));
    state = reduce(state, server({ type: "tool_started", payload: { job: "b", tool: "y" } }, 2));
    render(root, state, noopHandlers());
    expect(root.querySelectorAll(".pending")).toHaveLength(2);
  });
});

describe("composer", () => {
  it("disables send on empty input and submits trimmed text", () => {
    const handlers = noopHandlers();
    render(root, initialState(), handlers);
    const input = root.querySelector<HTMLInputElement>("#draft")!;
    const send = root.querySelector<HTMLButtonElement>("#send")!;
    expect(send.disabled).toBe(true);
    input.value = "  show the policy  ";
    input.dispatchEvent(new Event("input"));
    expect(send.disabled).toBe(false);
    root.querySelector<HTMLFormElement>("#composer")!.dispatchEvent(new Event("submit"));
    expect(handlers.onSend).toHaveBeenCalledWith("show the policy");
  });
});

describe("sidebar", () => {
  it("dims unsupported dataset columns and wires toggles", () => {
    const handlers = noopHandlers();
    let state = initialState();
    state = reduce(state, { kind: "dataset", data: dataset });
    render(root, state, handlers);
    const offRow = root.querySelector('#dataset tr[data-column="job"]')!;
    expect(offRow.classList.contains("off")).toBe(true);
    const toggle = offRow.querySelector<HTMLInputElement>("input")!;
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change"));
    expect(handlers.onToggleColumn).toHaveBeenCalledWith("job", true);
    // action/outcome rows expose no toggle
    expect(root.querySelector('tr[data-column="CAMPAIGN"] input')).toBeNull();
  });

  it("chip removal calls the delete handler", () => {
    const handlers = noopHandlers();
    let state = initialState();
    state = reduce(
      state,
      server({ type: "conditions_changed", payload: { conditions: { job: "admin" } } }, 1),
    );
    render(root, state, handlers);
    root.querySelector<HTMLButtonElement>(".chip-remove")!.click();
    expect(handlers.onRemoveCondition).toHaveBeenCalledWith("job");
  });

  it("manual condition editing submits column and value", () => {
    const handlers = noopHandlers();
    let state = initialState();
    state = reduce(state, { kind: "dataset", data: dataset });
    render(root, state, handlers);
    const form = root.querySelector<HTMLFormElement>(".condition-editor")!;
    const select = form.querySelector<HTMLSelectElement>("select")!;
    const value = form.querySelector<HTMLInputElement>("input")!;
    // only supported covariates are offered (job is toggled off, action/outcome excluded)
    expect([...select.options].map((o) => o.value)).toEqual(["euribor3m"]);
    select.value = "euribor3m";
    value.value = "4.964";
    form.dispatchEvent(new Event("submit"));
    expect(handlers.onAddCondition).toHaveBeenCalledWith("euribor3m", "4.964");
  });

  it("invalid manual edit shows an inline error", () => {
    let state = initialState();
    state = reduce(state, { kind: "condition_error", message: "cannot use 'old' for numeric" });
    render(root, state, noopHandlers());
    const error = root.querySelector(".condition-error");
    expect(error).not.toBeNull();
    expect(error!.textContent).toContain("cannot use");
    // a successful conditions update clears it
    state = reduce(state, { kind: "conditions", map: { age: 30 } });
    render(root, state, noopHandlers());
    expect(root.querySelector(".condition-error")).toBeNull();
  });

  it("question chips send their text", () => {
    const handlers = noopHandlers();
    let state = initialState();
    state = reduce(state, { kind: "questions", list: ["What can you do?", "Optimize CAMPAIGN"] });
    render(root, state, handlers);
    const chips = [...root.querySelectorAll<HTMLButtonElement>(".question-chip")];
    expect(chips).toHaveLength(2);
    chips[1].click();
    expect(handlers.onQuestion).toHaveBeenCalledWith("Optimize CAMPAIGN");
  });
});

describe("charts standalone", () => {
  it("bar chart renders one bar per level", async () => {
    const { renderChart } = await import("../src/charts");
    const el = renderChart({
      kind: "bar",
      title: "t",
      series: [{ label: "s", x: ["0", "1", "2"], y: [0.5, 0.3, 0.2] }],
    });
    expect(el.querySelectorAll("rect")).toHaveLength(3);
  });

  it("tree chart is collapsible", async () => {
    const { renderChart } = await import("../src/charts");
    const el = renderChart(treeChart);
    const details = el.querySelector("details")!;
    expect(details.open).toBe(true);
  });
});
