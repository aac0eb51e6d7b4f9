"""Per-session orchestration: the query flow, thought injections, memories.

One pass of the flow classifies intent and runs every extractor on the query,
merges present values into parameter memory, then either chats (unknown
intent), follows up for missing parameters, or dispatches the tool. Replies
come from the chat provider constrained by an injected system instruction; a
numeric-token audit guarantees no fabricated numbers survive to the user.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .charts import ChartSpec, format_number, numeric_tokens
from .dataset import distinct_values
from .errors import PrescribeError, ProviderUnavailable, UnknownColumn, BadParamType
from .nlu import (
    SYSTEM_PARAMS,
    ExtractorSpec,
    Strategy,
    classify_intent,
    extract_all,
)
from .providers import ChatMessage
from .tools import ExecutionContext, ToolResult, ToolSpec, execute, lookup

DEFAULT_CHAT_K = 2

PERCENT_SCALARS = {"kpi", "projected_kpi", "baseline_kpi", "best_estimate", "baseline"}


@dataclass
class ParameterMemory:
    """Session-persistent store for extracted conditions and tool params."""

    conditions: dict[str, Any] = field(default_factory=dict)
    tool_params: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, int] = field(default_factory=dict)

    def merge(self, present: dict[str, Any], query_index: int) -> bool:
        changed = False
        for name, value in present.items():
            target = self.tool_params if name in SYSTEM_PARAMS else self.conditions
            if target.get(name) != value:
                changed = True
            target[name] = value
            self.provenance[name] = query_index
        return changed

    def remove(self, name: str) -> None:
        self.conditions.pop(name, None)
        self.tool_params.pop(name, None)
        self.provenance.pop(name, None)

    def clear(self) -> None:
        self.conditions.clear()
        self.tool_params.clear()
        self.provenance.clear()

    def snapshot(self) -> dict[str, Any]:
        out = dict(self.conditions)
        out.update(self.tool_params)
        return out


class ChatMemory:
    """Bounded store of the last k (user, agent) exchanges."""

    def __init__(self, k: int = DEFAULT_CHAT_K):
        self.k = k
        self.turns: deque[tuple[str, str]] = deque(maxlen=k)

    def add_exchange(self, user: str, agent: str) -> None:
        self.turns.append((user, agent))

    def extend_last_agent(self, more: str) -> None:
        if self.turns:
            user, agent = self.turns[-1]
            self.turns[-1] = (user, (agent + "\n" + more).strip())

    def recent(self) -> list[tuple[str, str]]:
        return list(self.turns)


@dataclass
class Injection:
    kind: str  # follow_up | present_result | tool_insight
    content: str


@dataclass
class AgentTurnResult:
    reply: str
    charts: list[ChartSpec]
    intent: str
    missing: list[str]
    job: str | None
    conditions_snapshot: dict[str, Any]

    def to_dict(self) -> dict:
        return {
            "reply": self.reply,
            "charts": [c.to_dict() for c in self.charts],
            "intent": self.intent,
            "missing": list(self.missing),
            "job": self.job,
            "conditions_snapshot": dict(self.conditions_snapshot),
        }


def render_scalars(result: ToolResult, percent_outcome: bool) -> str:
    parts = []
    for name, value in result.scalars.items():
        percent = percent_outcome and name in PERCENT_SCALARS
        parts.append(f"{name} = {format_number(float(value), percent)}")
    return ", ".join(parts)


def build_injection(kind: str, payload, percent_outcome: bool = False) -> Injection:
    if kind == "follow_up":
        names = ", ".join(payload)
        return Injection(
            kind=kind,
            content=(
                "Respond to the users query but ask to provide the following "
                f"missing parameters: [{names}]"
            ),
        )
    if kind == "present_result":
        rendered = render_scalars(payload, percent_outcome)
        return Injection(
            kind=kind,
            content=(
                f"Simply respond to the user that the result is {rendered}. "
                "Say nothing else and do not make up anything."
            ),
        )
    if kind == "tool_insight":
        return Injection(
            kind=kind,
            content=f"Inform the user you are running a tool that does {payload.description}",
        )
    raise ValueError(f"unknown injection kind {kind!r}")


class _FallbackStrategy:
    """Route to the primary strategy, degrading to the fallback on provider errors."""

    def __init__(self, primary: Strategy, fallback: Strategy | None):
        self.primary = primary
        self.fallback = fallback

    def classify(self, query: str) -> str:
        try:
            return self.primary.classify(query)
        except ProviderUnavailable:
            if self.fallback is None:
                raise
            return self.fallback.classify(query)

    def extract(self, query: str, spec: ExtractorSpec):
        try:
            return self.primary.extract(query, spec)
        except ProviderUnavailable:
            if self.fallback is None:
                raise
            return self.fallback.extract(query, spec)


class Session:
    """One user's conversation: memories, flow state, background jobs."""

    def __init__(
        self,
        *,
        ctx: ExecutionContext,
        specs: list[ExtractorSpec],
        strategy: Strategy,
        provider,
        system_prompt: str,
        fallback_strategy: Strategy | None = None,
        k: int = DEFAULT_CHAT_K,
        event_sink: Callable[[str, dict], None] | None = None,
    ):
        self.ctx = ctx
        self.specs = specs
        self.strategy = _FallbackStrategy(strategy, fallback_strategy)
        self.provider = provider
        self.system_prompt = system_prompt
        self.memory = ParameterMemory()
        self.chat = ChatMemory(k=k)
        self.event_sink = event_sink or (lambda kind, payload: None)
        self.lock = threading.RLock()
        self.query_count = 0
        self.last_tool: str | None = None
        self.last_results: dict[str, ToolResult] = {}
        self._job_counter = 0
        self._pending: dict[str, Any] = {}

    # -- helpers -----------------------------------------------------------

    def _percent(self) -> bool:
        return self.ctx.outcome_is_rate()

    def _emit(self, kind: str, payload: dict) -> None:
        self.event_sink(kind, payload)

    def conditions_snapshot(self) -> dict[str, Any]:
        with self.lock:
            return self.memory.snapshot()

    def provenance_snapshot(self) -> dict[str, int]:
        with self.lock:
            return dict(self.memory.provenance)

    # -- chat --------------------------------------------------------------

    def _template_reply(self, injection: Injection | None, result: ToolResult | None = None) -> str:
        meta = self.ctx.meta
        if injection is None:
            return (
                f"I can analyze how {meta.action_column} affects {meta.outcome_column}: "
                "ask about the current policy, important features, causal effects, "
                "what-if conditions, or policy optimization."
            )
        if injection.kind == "follow_up":
            names = injection.content.rsplit("[", 1)[-1].rstrip("]")
            return f"Happy to help! Please provide the following missing parameters: [{names}]."
        if injection.kind == "present_result":
            rendered = render_scalars(result, self._percent()) if result else injection.content
            return f"Here is the result: {rendered}."
        if injection.kind == "tool_insight":
            return "On it! " + injection.content.replace(
                "Inform the user you are running a tool that does",
                "I am running a tool that does",
            )
        return injection.content

    def chat_reply(
        self,
        user_query: str | None,
        injection: Injection | None = None,
        result: ToolResult | None = None,
    ) -> str:
        """Provider completion constrained by the optional injected instruction,
        guarded by the numeric-token audit with a deterministic fallback."""
        messages = [ChatMessage(role="system", content=self.system_prompt)]
        for user, agent in self.chat.recent():
            messages.append(ChatMessage(role="user", content=user))
            messages.append(ChatMessage(role="agent", content=agent))
        if user_query:
            messages.append(ChatMessage(role="user", content=user_query))
        if injection is not None:
            messages.append(ChatMessage(role="injected_system", content=injection.content))
        try:
            reply = self.provider.complete(messages)
        except (PrescribeError, ValueError):
            return self._template_reply(injection, result)

        allowed: set[str] = set()
        if injection is not None:
            allowed |= numeric_tokens(injection.content)
        if result is not None:
            allowed |= result.allowed_numeric_tokens()
        if not numeric_tokens(reply) <= allowed:
            return self._template_reply(injection, result)
        return reply

    # -- flow --------------------------------------------------------------

    def handle_query(self, query: str, executor=None) -> AgentTurnResult:
        with self.lock:
            self.query_count += 1
            qidx = self.query_count

        intent = classify_intent(query, self.strategy)
        extraction = extract_all(query, self.specs, self.strategy)

        with self.lock:
            changed = self.memory.merge(extraction.present(), qidx)
            snapshot = self.memory.snapshot()
        if changed:
            self._emit("conditions_changed", {"conditions": snapshot})

        if intent == "unknown":
            reply = self.chat_reply(query)
            with self.lock:
                self.chat.add_exchange(query, reply)
            self._emit("agent_message", {"text": reply})
            return AgentTurnResult(
                reply=reply,
                charts=[],
                intent=intent,
                missing=[],
                job=None,
                conditions_snapshot=snapshot,
            )

        tool = lookup(intent)
        params = self._assemble_params(tool)
        missing = [
            p.name
            for p in tool.params
            if p.required and params.get(p.name) in (None, {})
        ]
        if missing:
            injection = build_injection("follow_up", missing)
            reply = self.chat_reply(query, injection)
            with self.lock:
                self.chat.add_exchange(query, reply)
            self._emit("agent_message", {"text": reply})
            return AgentTurnResult(
                reply=reply,
                charts=[],
                intent=intent,
                missing=missing,
                job=None,
                conditions_snapshot=snapshot,
            )

        ctx = self._context_for(tool)
        if executor is not None:
            with self.lock:
                self._job_counter += 1
                job_id = f"job-{self._job_counter}"
            insight = build_injection("tool_insight", tool)
            reply = self.chat_reply(query, insight)
            with self.lock:
                self.chat.add_exchange(query, reply)
            self._emit("agent_message", {"text": reply})
            started = {"job": job_id, "tool": tool.name, "params": _wire_params(params)}
            if ctx is not self.ctx:
                with self.lock:
                    started["conditions"] = dict(self.memory.conditions)
            self._emit("tool_started", started)
            with self.lock:
                # register before the job can complete, else the pop is lost
                future = executor.submit(self._run_tool, job_id, tool, params, ctx)
                self._pending[job_id] = future
            return AgentTurnResult(
                reply=reply,
                charts=[],
                intent=intent,
                missing=[],
                job=job_id,
                conditions_snapshot=snapshot,
            )

        # synchronous execution: reply carries the result directly
        try:
            result = execute(tool, params, ctx)
        except PrescribeError as exc:
            reply = f"I could not complete {tool.name}: {exc}"
            with self.lock:
                self.chat.add_exchange(query, reply)
            self._emit("error", {"tool": tool.name, "message": str(exc)})
            return AgentTurnResult(
                reply=reply,
                charts=[],
                intent=intent,
                missing=[],
                job=None,
                conditions_snapshot=snapshot,
            )
        injection = build_injection("present_result", result, self._percent())
        reply = self.chat_reply(query, injection, result)
        with self.lock:
            self.chat.add_exchange(query, reply)
            self.last_tool = tool.name
            self.last_results[tool.name] = result
        self._emit("agent_message", {"text": reply, "charts": [c.to_dict() for c in result.charts]})
        return AgentTurnResult(
            reply=reply,
            charts=result.charts,
            intent=intent,
            missing=[],
            job=None,
            conditions_snapshot=snapshot,
        )

    def _assemble_params(self, tool: ToolSpec) -> dict:
        with self.lock:
            if tool.name == "counterfactual":
                return {"conditions": dict(self.memory.conditions)}
            out = {}
            for p in tool.params:
                if p.name in self.memory.tool_params:
                    out[p.name] = self.memory.tool_params[p.name]
            return out

    def _context_for(self, tool: ToolSpec) -> ExecutionContext:
        """Stored conditions also scope the optimizer: run_optimize learns on
        the condition-matching segment (what-if policy fine-tuning)."""
        if tool.name != "run_optimize":
            return self.ctx
        with self.lock:
            conditions = dict(self.memory.conditions)
        if not conditions:
            return self.ctx
        from .causal import subset_table, condition_mask

        mask = condition_mask(self.ctx.table, self.ctx.meta, conditions)
        if not mask.any():
            return self.ctx
        return ExecutionContext(
            meta=self.ctx.meta,
            table=subset_table(self.ctx.table, mask),
            seed=self.ctx.seed,
            folds=self.ctx.folds,
        )

    def _run_tool(self, job_id: str, tool: ToolSpec, params: dict, ctx: ExecutionContext | None = None) -> None:
        try:
            result = execute(tool, params, ctx or self.ctx)
        except PrescribeError as exc:
            self._emit("error", {"job": job_id, "tool": tool.name, "message": str(exc)})
            with self.lock:
                self._pending.pop(job_id, None)
            return
        injection = build_injection("present_result", result, self._percent())
        reply = self.chat_reply(None, injection, result)
        with self.lock:
            self.chat.extend_last_agent(reply)
            self.last_tool = tool.name
            self.last_results[tool.name] = result
            self._pending.pop(job_id, None)
        self._emit(
            "tool_result",
            {
                "job": job_id,
                "tool": tool.name,
                "reply": reply,
                "scalars": dict(result.scalars),
                "charts": [c.to_dict() for c in result.charts],
            },
        )

    def wait_idle(self, timeout: float = 60.0) -> bool:
        """Block until background jobs finish; True when idle."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self.lock:
                pending = list(self._pending.values())
            if not pending:
                return True
            pending[0].result(timeout=max(0.01, deadline - time.monotonic()))
        with self.lock:
            return not self._pending

    # -- conditions --------------------------------------------------------

    def set_condition(self, column: str, value) -> dict[str, Any]:
        meta = self.ctx.meta
        if column in SYSTEM_PARAMS:
            gated = _gate_system_param(column, value)
            if gated is None:
                raise BadParamType(column, f"cannot use {value!r}")
            with self.lock:
                self.memory.tool_params[column] = gated
                self.memory.provenance[column] = self.query_count
                snapshot = self.memory.snapshot()
        else:
            supported = {c.name: c for c in meta.supported_covariates()}
            if column not in supported:
                raise UnknownColumn(f"{column!r} is not a supported column")
            gated = _gate_column_value(supported[column].dtype, value)
            if gated is None:
                raise BadParamType(column, f"cannot use {value!r} for {supported[column].dtype}")
            with self.lock:
                self.memory.conditions[column] = gated
                self.memory.provenance[column] = self.query_count
                snapshot = self.memory.snapshot()
        self._emit("conditions_changed", {"conditions": snapshot})
        return snapshot

    def remove_condition(self, column: str) -> dict[str, Any]:
        meta = self.ctx.meta
        known = {c.name for c in meta.supported_covariates()} | set(SYSTEM_PARAMS)
        if column not in known:
            raise UnknownColumn(f"{column!r} is not a supported column")
        with self.lock:
            self.memory.remove(column)
            snapshot = self.memory.snapshot()
        self._emit("conditions_changed", {"conditions": snapshot})
        return snapshot

    def clear_conditions(self) -> dict[str, Any]:
        with self.lock:
            self.memory.clear()
            snapshot = self.memory.snapshot()
        self._emit("conditions_changed", {"conditions": snapshot})
        return snapshot

    # -- sample questions ----------------------------------------------------

    def sample_questions(self) -> list[str]:
        """Two or three next-step suggestions keyed on the last executed tool."""
        meta = self.ctx.meta
        action, outcome = meta.action_column, meta.outcome_column
        default_budget = self._default_budget()
        optimize_q = (
            f"Optimize {action} with 4 rules and an average budget of {default_budget}"
        )
        with self.lock:
            last = self.last_tool
            results = dict(self.last_results)

        if last is None:
            return ["What can you do?", f"What is the current {action} policy?"]
        if last == "show_current_policy":
            return [f"How does {action} affect {outcome}?", optimize_q]
        if last == "select_features":
            feature = None
            details = results.get("select_features")
            if details is not None:
                ranked = details.details.get("ranked") or details.details.get("selected")
                if ranked:
                    feature = ranked[0]
            questions = [f"How does {action} affect {outcome}?"]
            if feature is not None:
                value = self._example_value(feature)
                if value is not None:
                    questions.insert(0, f"What if {feature} is {value}?")
            questions.append(optimize_q)
            return questions[:3]
        if last in ("show_causal_effect", "counterfactual"):
            return [f"What is the current {action} policy?", optimize_q]
        if last == "run_optimize":
            details = results.get("run_optimize")
            budget = default_budget
            if details is not None and details.details.get("average_budget") is not None:
                budget = details.details["average_budget"]
            varied = round(float(budget) * 1.5, 1)
            return [
                f"Use an average budget of {varied}",
                f"What is the current {action} policy?",
            ]
        return ["What can you do?", optimize_q]

    def _default_budget(self) -> float:
        values = [
            v
            for v in self.ctx.table.column(self.ctx.meta.action_column)
            if isinstance(v, (int, float))
        ]
        if not values:
            return 1.0
        return round(sum(values) / len(values), 1)

    def _example_value(self, column: str):
        try:
            values = distinct_values(self.ctx.table, column, limit=3)
        except UnknownColumn:
            return None
        if not values:
            return None
        value = values[-1]
        if isinstance(value, bool):
            return "yes" if value else "no"
        if isinstance(value, float) and value == int(value):
            return int(value)
        return value


def _wire_params(params: dict) -> dict:
    return {k: (dict(v) if isinstance(v, dict) else v) for k, v in params.items()}


def _gate_column_value(dtype: str, value):
    if dtype == "numeric":
        if isinstance(value, bool):
            return None
        if isinstance(value, (int, float)):
            return float(value)
        try:
            return float(str(value))
        except ValueError:
            return None
    if dtype == "boolean":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("yes", "true", "1"):
            return True
        if text in ("no", "false", "0"):
            return False
        return None
    text = str(value).strip()
    return text or None


def _gate_system_param(name: str, value):
    if name == "show_error":
        return _gate_column_value("boolean", value)
    return _gate_column_value("numeric", value)
