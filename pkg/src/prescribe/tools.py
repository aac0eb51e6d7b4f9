"""The five prescriptive tools: declarative specs plus execution dispatch.

Tool names, aliases, parameters and descriptions are a wire contract shared
with the NLU label set, the prompt database and the API payloads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import causal, policy
from .charts import ChartSpec, Series, format_number, numeric_tokens
from .dataset import DataTable, DatasetMetadata
from .errors import BadParamType, MissingParam


@dataclass(frozen=True)
class ParamSpec:
    name: str
    dtype: str  # integer | numeric | boolean | map
    required: bool
    default: Any = None


@dataclass(frozen=True)
class ToolSpec:
    name: str
    aliases: tuple[str, ...]
    params: tuple[ParamSpec, ...]
    description: str
    returns: tuple[str, ...]

    def required_params(self) -> list[str]:
        return [p.name for p in self.params if p.required]


@dataclass
class ToolResult:
    tool: str
    scalars: dict[str, float]
    text_summary: str
    charts: list[ChartSpec] = field(default_factory=list)
    params_used: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)  # orchestrator-facing extras, not wire data

    def allowed_numeric_tokens(self) -> set[str]:
        """Every numeric token a grounded reply may legitimately contain."""
        allowed: set[str] = set()
        for value in self.scalars.values():
            allowed |= numeric_tokens(str(value))
            if isinstance(value, (int, float)):
                allowed |= numeric_tokens(format_number(float(value)))
                allowed |= numeric_tokens(format_number(float(value), percent=True))
        for chart in self.charts:
            for series in chart.series:
                for v in list(series.x) + list(series.y):
                    allowed |= numeric_tokens(str(v))
                    if isinstance(v, (int, float)):
                        allowed |= numeric_tokens(format_number(float(v)))
        for value in self.params_used.values():
            allowed |= numeric_tokens(str(value))
        allowed |= numeric_tokens(self.text_summary)
        return allowed

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "scalars": dict(self.scalars),
            "text_summary": self.text_summary,
            "charts": [c.to_dict() for c in self.charts],
            "params_used": {k: v for k, v in self.params_used.items()},
        }


_REGISTRY: tuple[ToolSpec, ...] = (
    ToolSpec(
        name="show_current_policy",
        aliases=("show_base_policy",),
        params=(),
        description="Shows what the current policy is and any relevant KPIs.",
        returns=("scalar", "chart"),
    ),
    ToolSpec(
        name="select_features",
        aliases=(),
        params=(),
        description=(
            "Covariate selection tool that selects most the important features "
            "that affect the outcome."
        ),
        returns=("text", "chart"),
    ),
    ToolSpec(
        name="show_causal_effect",
        aliases=(),
        params=(ParamSpec("show_error", "boolean", required=False, default=False),),
        description="Plots how the action affects the outcome in the average case.",
        returns=("chart",),
    ),
    ToolSpec(
        name="counterfactual",
        aliases=(),
        params=(ParamSpec("conditions", "map", required=True),),
        description="Plots how the action affects the outcome under the provided conditions.",
        returns=("chart",),
    ),
    ToolSpec(
        name="run_optimize",
        aliases=("run_opt",),
        params=(
            ParamSpec("num_rules", "integer", required=True),
            ParamSpec("average_budget", "numeric", required=True),
        ),
        description=(
            "Produces the optimized KPI and policy through a prescriptive tree "
            "constrained by an average budget per row."
        ),
        returns=("scalar", "chart"),
    ),
)


def registry() -> list[ToolSpec]:
    return list(_REGISTRY)


def lookup(name: str) -> ToolSpec | None:
    for spec in _REGISTRY:
        if spec.name == name or name in spec.aliases:
            return spec
    return None


@dataclass
class ExecutionContext:
    meta: DatasetMetadata
    table: DataTable
    seed: int = 0
    folds: int = 5

    def covariates(self) -> list[str]:
        return [c.name for c in self.meta.supported_covariates()]

    def outcome_is_rate(self) -> bool:
        return self.meta.column(self.meta.outcome_column).dtype == "boolean"


def _coerce(spec: ParamSpec, value):
    if spec.dtype == "integer":
        if isinstance(value, bool):
            raise BadParamType(spec.name, "expected an integer")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value == int(value):
            return int(value)
        raise BadParamType(spec.name, f"expected an integer, got {value!r}")
    if spec.dtype == "numeric":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadParamType(spec.name, f"expected a number, got {value!r}")
        return float(value)
    if spec.dtype == "boolean":
        if not isinstance(value, bool):
            raise BadParamType(spec.name, f"expected a boolean, got {value!r}")
        return value
    if spec.dtype == "map":
        if not isinstance(value, dict):
            raise BadParamType(spec.name, f"expected a mapping, got {value!r}")
        return dict(value)
    raise BadParamType(spec.name, f"unhandled dtype {spec.dtype!r}")


def validate_params(tool: ToolSpec, params: dict) -> dict:
    """Coerce/check params; report every missing required one in spec order."""
    missing = [
        p.name
        for p in tool.params
        if p.required and (p.name not in params or params[p.name] in (None, {}, ""))
    ]
    if missing:
        raise MissingParam(missing)
    out: dict = {}
    for p in tool.params:
        if p.name in params and params[p.name] is not None:
            out[p.name] = _coerce(p, params[p.name])
        elif not p.required:
            out[p.name] = p.default
    return out


def execute(tool: ToolSpec, params: dict, ctx: ExecutionContext) -> ToolResult:
    used = validate_params(tool, params)
    percent = ctx.outcome_is_rate()
    action = ctx.meta.action_column
    outcome = ctx.meta.outcome_column

    if tool.name == "show_current_policy":
        snap = causal.current_policy(ctx.table, ctx.meta)
        text = (
            f"The current policy achieves a mean {outcome} of "
            f"{format_number(snap.kpi, percent)} over {snap.n} rows."
        )
        return ToolResult(
            tool=tool.name,
            scalars={"kpi": snap.kpi, "n": snap.n},
            text_summary=text,
            charts=[causal.policy_chart(snap, action)],
            params_used=used,
        )

    if tool.name == "select_features":
        report = causal.select_features(ctx.table, ctx.meta, folds=ctx.folds, seed=ctx.seed)
        names = ", ".join(report.selected) if report.selected else "none"
        text = (
            f"Cross-validated selection kept {len(report.selected)} features: {names}."
        )
        return ToolResult(
            tool=tool.name,
            scalars={"n_selected": len(report.selected)},
            text_summary=text,
            charts=[causal.cv_curve_chart(report)],
            params_used=used,
            details={
                "selected": list(report.selected),
                "ranked": [name for name, _ in report.ranked_features],
            },
        )

    if tool.name == "show_causal_effect":
        est = causal.effect_curve(
            ctx.table,
            ctx.meta,
            ctx.covariates(),
            show_error=bool(used.get("show_error", False)),
            seed=ctx.seed,
        )
        return _effect_result(tool, est, None, used, action, outcome, percent)

    if tool.name == "counterfactual":
        conditions = used["conditions"]
        est = causal.conditional_effect(
            ctx.table, ctx.meta, conditions, ctx.covariates(), seed=ctx.seed
        )
        average = causal.effect_curve(ctx.table, ctx.meta, ctx.covariates(), seed=ctx.seed)
        return _effect_result(tool, est, average, used, action, outcome, percent)

    if tool.name == "run_optimize":
        result = policy.learn_policy(
            ctx.table,
            ctx.meta,
            ctx.covariates(),
            num_rules=used["num_rules"],
            average_budget=used["average_budget"],
            seed=ctx.seed,
        )
        items = sorted(result.action_distribution.items())
        dist_chart = ChartSpec(
            kind="bar",
            title=f"Optimized {action} distribution",
            series=[
                Series(
                    label="share of rows",
                    x=[str(k) for k, _ in items],
                    y=[v for _, v in items],
                )
            ],
        )
        text = (
            f"Optimization projects a mean {outcome} of "
            f"{format_number(result.projected_kpi, percent)} versus the current "
            f"{format_number(result.baseline_kpi, percent)}, spending "
            f"{format_number(result.budget_used)} per row of the "
            f"{format_number(result.average_budget)} budget."
        )
        return ToolResult(
            tool=tool.name,
            scalars={
                "projected_kpi": result.projected_kpi,
                "baseline_kpi": result.baseline_kpi,
                "budget_used": result.budget_used,
            },
            text_summary=text,
            charts=[dist_chart, policy.render_tree(result.tree)],
            params_used=used,
            details={"average_budget": result.average_budget, "num_rules": result.tree.num_rules},
        )

    raise ValueError(f"no dispatch for tool {tool.name!r}")


def _effect_result(
    tool: ToolSpec,
    est: causal.EffectEstimate,
    average: causal.EffectEstimate | None,
    used: dict,
    action: str,
    outcome: str,
    percent: bool,
) -> ToolResult:
    best_idx = max(range(len(est.estimates)), key=lambda i: est.estimates[i])
    best_level = est.action_levels[best_idx]
    best_value = est.estimates[best_idx]
    numeric_level = isinstance(best_level, (int, float)) and not isinstance(best_level, bool)
    level_text = format_number(float(best_level)) if numeric_level else str(best_level)
    where = "under the given conditions" if est.conditions else "on average"
    text = (
        f"{action} level {level_text} gives the highest "
        f"expected {outcome} {where}: {format_number(best_value, percent)} versus a "
        f"baseline of {format_number(est.baseline, percent)}."
    )
    scalars = {
        "best_estimate": best_value,
        "baseline": est.baseline,
    }
    if numeric_level:
        scalars["best_level"] = float(best_level)
    return ToolResult(
        tool=tool.name,
        scalars=scalars,
        text_summary=text,
        charts=[causal.effect_chart(est, action, outcome, average=average)],
        params_used=used,
    )
