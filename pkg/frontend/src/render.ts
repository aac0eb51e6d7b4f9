// DOM construction as a pure function of UiState.
//
// render() rebuilds the three regions (chat, sidebar, dataset) from scratch
// every time, so the view is exactly determined by the state, which is
// exactly determined by the event log.

import { renderChart } from "./charts";
import type { UiState } from "./state";

export interface Handlers {
  onSend: (text: string) => void;
  onQuestion: (text: string) => void;
  onRemoveCondition: (column: string) => void;
  onAddCondition: (column: string, value: string) => void;
  onToggleColumn: (column: string, supported: boolean) => void;
  onPrint: () => void;
}

export function renderMessages(state: UiState): HTMLElement {
  const list = document.createElement("div");
  list.id = "messages";
  for (const message of state.messages) {
    const bubble = document.createElement("div");
    bubble.className = `msg ${message.role}`; // user bubbles right-aligned via CSS
    const text = document.createElement("p");
    text.textContent = message.text;
    bubble.appendChild(text);
    for (const chart of message.charts) bubble.appendChild(renderChart(chart));
    list.appendChild(bubble);
  }
  for (const job of state.pendingJobs) {
    const pending = document.createElement("div");
    pending.className = "msg agent pending";
    pending.dataset.job = job;
    pending.setAttribute("aria-label", "loading");
    pending.textContent = "…";
    list.appendChild(pending);
  }
  return list;
}

export function renderConditions(state: UiState, handlers: Handlers): HTMLElement {
  const panel = document.createElement("div");
  panel.id = "conditions";
  const heading = document.createElement("h2");
  heading.textContent = "Current conditions";
  panel.appendChild(heading);
  const entries = Object.entries(state.conditions);
  if (!entries.length) {
    const empty = document.createElement("p");
    empty.className = "empty";
    empty.textContent = "none set";
    panel.appendChild(empty);
  }
  for (const [column, value] of entries) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.dataset.column = column;
    const label = document.createElement("span");
    label.textContent = `${column} = ${String(value)}`;
    chip.appendChild(label);
    const remove = document.createElement("button");
    remove.className = "chip-remove";
    remove.textContent = "×";
    remove.addEventListener("click", () => handlers.onRemoveCondition(column));
    chip.appendChild(remove);
    panel.appendChild(chip);
  }

  // manual editing: pick a supported column, type a value
  const form = document.createElement("form");
  form.className = "condition-editor";
  const select = document.createElement("select");
  const columns = state.dataset
    ? state.dataset.metadata.columns.filter(
        (c) =>
          c.supported &&
          c.name !== state.dataset!.metadata.action &&
          c.name !== state.dataset!.metadata.outcome,
      )
    : [];
  for (const column of columns) {
    const option = document.createElement("option");
    option.value = column.name;
    option.textContent = column.name;
    select.appendChild(option);
  }
  const valueInput = document.createElement("input");
  valueInput.type = "text";
  valueInput.placeholder = "value";
  const add = document.createElement("button");
  add.type = "submit";
  add.textContent = "Add";
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (select.value && valueInput.value.trim()) {
      handlers.onAddCondition(select.value, valueInput.value.trim());
    }
  });
  form.append(select, valueInput, add);
  panel.appendChild(form);
  if (state.conditionError) {
    const error = document.createElement("p");
    error.className = "condition-error";
    error.textContent = state.conditionError;
    panel.appendChild(error);
  }
  return panel;
}

export function renderDataset(state: UiState, handlers: Handlers): HTMLElement {
  const panel = document.createElement("div");
  panel.id = "dataset";
  const heading = document.createElement("h2");
  heading.textContent = "Dataset";
  panel.appendChild(heading);
  if (!state.dataset) {
    const empty = document.createElement("p");
    empty.className = "empty";
    empty.textContent = "loading…";
    panel.appendChild(empty);
    return panel;
  }
  const meta = state.dataset.metadata;
  const caption = document.createElement("p");
  caption.textContent = `${meta.title}: ${state.dataset.row_count} rows, action ${meta.action}, outcome ${meta.outcome}`;
  panel.appendChild(caption);
  const table = document.createElement("table");
  for (const column of meta.columns) {
    const row = document.createElement("tr");
    row.dataset.column = column.name;
    if (!column.supported) row.classList.add("off");
    const name = document.createElement("td");
    name.textContent = column.name;
    const dtype = document.createElement("td");
    dtype.textContent = column.dtype;
    const toggleCell = document.createElement("td");
    const isFixed = column.name === meta.action || column.name === meta.outcome;
    if (!isFixed) {
      const toggle = document.createElement("input");
      toggle.type = "checkbox";
      toggle.checked = column.supported;
      toggle.addEventListener("change", () => handlers.onToggleColumn(column.name, toggle.checked));
      toggleCell.appendChild(toggle);
    }
    row.append(name, dtype, toggleCell);
    table.appendChild(row);
  }
  panel.appendChild(table);
  return panel;
}

export function renderQuestions(state: UiState, handlers: Handlers): HTMLElement {
  const panel = document.createElement("div");
  panel.id = "sample-questions";
  for (const question of state.sampleQuestions) {
    const chip = document.createElement("button");
    chip.className = "question-chip";
    chip.textContent = question;
    chip.addEventListener("click", () => handlers.onQuestion(question));
    panel.appendChild(chip);
  }
  return panel;
}

export function render(root: HTMLElement, state: UiState, handlers: Handlers): void {
  root.textContent = "";

  const chat = document.createElement("section");
  chat.id = "chat";
  const toolbar = document.createElement("div");
  toolbar.id = "toolbar";
  const status = document.createElement("span");
  status.id = "connection";
  status.dataset.status = state.connection;
  status.textContent = state.connection;
  const printButton = document.createElement("button");
  printButton.id = "print";
  printButton.textContent = "Print";
  printButton.addEventListener("click", handlers.onPrint);
  toolbar.append(printButton, status);
  chat.appendChild(toolbar);
  chat.appendChild(renderMessages(state));
  chat.appendChild(renderQuestions(state, handlers));

  const form = document.createElement("form");
  form.id = "composer";
  const input = document.createElement("input");
  input.id = "draft";
  input.type = "text";
  input.autocomplete = "off";
  input.placeholder = "Ask about effects, features, policies…";
  const send = document.createElement("button");
  send.id = "send";
  send.type = "submit";
  send.textContent = "Send";
  send.disabled = true;
  input.addEventListener("input", () => {
    send.disabled = input.value.trim() === "";
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value.trim();
    if (!text) return; // empty input: send stays disabled
    handlers.onSend(text);
  });
  form.append(input, send);
  chat.appendChild(form);

  const sidebar = document.createElement("aside");
  sidebar.id = "sidebar";
  sidebar.appendChild(renderConditions(state, handlers));
  sidebar.appendChild(renderDataset(state, handlers));

  root.append(chat, sidebar);
}
