// Application bootstrap: session, SSE subscription, state loop.

import { Api } from "./api";
import { render } from "./render";
import { initialState, reduce, type UiEvent, type UiState } from "./state";
import { connectEvents } from "./sse";

export async function boot(root: HTMLElement, api = new Api()): Promise<void> {
  let state: UiState = initialState();
  const sessionId = await api.createSession();

  const handlers = {
    onSend: (text: string) => {
      dispatch({ kind: "user_message", text });
      void api.sendMessage(sessionId, text).then(() => refreshQuestions());
    },
    onQuestion: (text: string) => {
      handlers.onSend(text);
    },
    onRemoveCondition: (column: string) => {
      void api.removeCondition(sessionId, column).then((map) => dispatch({ kind: "conditions", map }));
    },
    onAddCondition: (column: string, value: string) => {
      void api
        .putCondition(sessionId, column, value)
        .then((map) => dispatch({ kind: "conditions", map }))
        .catch((err: Error) => dispatch({ kind: "condition_error", message: err.message }));
    },
    onToggleColumn: (column: string, supported: boolean) => {
      void api.toggleColumn(column, supported).then(() => refreshDataset());
    },
    onPrint: () => {
      window.open(api.transcriptUrl(sessionId), "_blank");
    },
  };

  function paint(): void {
    const draft = root.querySelector<HTMLInputElement>("#draft");
    const hadFocus = document.activeElement === draft;
    render(root, state, handlers);
    const input = root.querySelector<HTMLInputElement>("#draft");
    if (input && (hadFocus || state.messages.length)) input.focus(); // refocus after sending
    const messages = root.querySelector("#messages");
    if (messages) messages.scrollTop = messages.scrollHeight; // auto-scroll to newest
  }

  function dispatch(event: UiEvent): void {
    state = reduce(state, event);
    paint();
  }

  function refreshDataset(): void {
    void api.dataset().then((data) => dispatch({ kind: "dataset", data }));
  }

  function refreshQuestions(): void {
    void api.sampleQuestions(sessionId).then((list) => dispatch({ kind: "questions", list }));
  }

  connectEvents(
    sessionId,
    (event) => {
      dispatch({ kind: "server", event });
      if (event.type === "tool_result") refreshQuestions();
    },
    (status) => dispatch({ kind: "connection", status }),
  );

  refreshDataset();
  refreshQuestions();
  paint();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(document.getElementById("app")!);
}
