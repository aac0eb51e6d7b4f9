"""Prescriptive policy trees under an average-budget-per-row constraint.

The learner grows a binary segment tree greedily and assigns one action per
leaf by solving the allocation problem max sum(w_l * Q(l, a_l)) subject to
sum(w_l * cost(a_l)) <= budget with dynamic programming. Candidate splits are
scored by the budget-constrained objective they make achievable, so at small
sizes (single split) the search is exhaustive and matches brute force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .causal import (
    action_levels_and_codes,
    combine_codes,
    covariate_codes,
    current_policy,
    outcome_array,
    quantile_edges,
    standardized_means,
)
from .charts import ChartSpec, TreeNodeSpec, format_number
from .dataset import DataTable, DatasetMetadata
from .errors import (
    InfeasibleBudget,
    NonNumericActionWithoutCosts,
    TooFewRules,
    UnknownColumn,
)

MIN_LEAF_ROWS = 5
BUDGET_GRID_STEPS = 1000
EXACT_DP_CAPACITY_MAX = 2_000_000
_EPS = 1e-9


# ---------------------------------------------------------------------------
# tree structure
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    column: str | None = None
    threshold: float | None = None
    members: tuple | None = None
    yes: "TreeNode | None" = None
    no: "TreeNode | None" = None
    action: Any | None = None
    coverage: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.column is None

    def predicate_label(self) -> str:
        if self.is_leaf:
            return f"action: {self.action}"
        if self.threshold is not None:
            return f"{self.column} ≤ {format_number(self.threshold)}"
        inner = ", ".join(str(m) for m in self.members or ())
        return f"{self.column} ∈ {{{inner}}}"

    def matches(self, value) -> bool:
        """Does a cell value take the yes-branch? Missing cells go to no."""
        if value is None:
            return False
        if self.threshold is not None:
            return value <= self.threshold
        return value in (self.members or ())


@dataclass
class PolicyTree:
    root: TreeNode
    num_rules: int
    features: tuple[str, ...] = field(default_factory=tuple)

    def leaves(self) -> list[TreeNode]:
        out: list[TreeNode] = []

        def walk(node: TreeNode):
            if node.is_leaf:
                out.append(node)
            else:
                walk(node.yes)
                walk(node.no)

        walk(self.root)
        return out

    def node_count(self) -> int:
        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return 1
            return 1 + walk(node.yes) + walk(node.no)

        return walk(self.root)

    def split_columns(self) -> list[str]:
        cols: list[str] = []

        def walk(node: TreeNode):
            if not node.is_leaf:
                if node.column not in cols:
                    cols.append(node.column)
                walk(node.yes)
                walk(node.no)

        walk(self.root)
        return cols

    def route(self, table: DataTable) -> list[TreeNode]:
        """Leaf reached by each table row."""
        for col in self.split_columns():
            if not table.has_column(col):
                raise UnknownColumn(f"tree splits on {col!r}, absent from table")
        leaves = []
        for i in range(table.row_count):
            node = self.root
            while not node.is_leaf:
                value = table.column(node.column)[i]
                node = node.yes if node.matches(value) else node.no
            leaves.append(node)
        return leaves

    def to_dict(self) -> dict:
        def walk(node: TreeNode) -> dict:
            if node.is_leaf:
                return {"action": node.action, "coverage": node.coverage}
            return {
                "column": node.column,
                "threshold": node.threshold,
                "members": list(node.members) if node.members else None,
                "yes": walk(node.yes),
                "no": walk(node.no),
            }

        return {
            "root": walk(self.root),
            "num_rules": self.num_rules,
            "features": list(self.features),
        }


@dataclass
class OptimizationResult:
    tree: PolicyTree
    projected_kpi: float
    baseline_kpi: float
    budget_used: float
    average_budget: float | None
    action_distribution: dict
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tree": self.tree.to_dict(),
            "projected_kpi": self.projected_kpi,
            "baseline_kpi": self.baseline_kpi,
            "budget_used": self.budget_used,
            "average_budget": self.average_budget,
            "action_distribution": {str(k): v for k, v in self.action_distribution.items()},
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# costs
# ---------------------------------------------------------------------------

def action_costs(meta: DatasetMetadata, levels: list) -> list[float]:
    """Per-level action cost: explicit metadata map, else the numeric value.
    Costs must be nonnegative for the budget DP."""
    if meta.action_costs is not None:
        try:
            costs = [float(meta.action_costs[str(level)]) for level in levels]
        except KeyError as exc:
            raise NonNumericActionWithoutCosts(
                f"action_costs has no entry for level {exc.args[0]!r}"
            ) from None
    else:
        dtype = meta.column(meta.action_column).dtype
        if dtype != "numeric":
            raise NonNumericActionWithoutCosts(
                f"action column {meta.action_column!r} is {dtype}; supply action_costs in metadata"
            )
        costs = [float(level) for level in levels]
    if any(c < 0 for c in costs):
        raise NonNumericActionWithoutCosts(
            "negative action costs are unsupported; supply a nonnegative action_costs map"
        )
    return costs


# ---------------------------------------------------------------------------
# budget-constrained leaf assignment
# ---------------------------------------------------------------------------

def allocate_actions(
    leaf_sizes: Sequence[int],
    leaf_q: Sequence[np.ndarray],
    costs: Sequence[float],
    average_budget: float,
    n_total: int,
) -> tuple[list[int], float]:
    """Choose one action index per leaf maximizing total weighted Q subject to
    the average budget. Returns (action index per leaf, objective value).

    Exact integer DP when every leaf cost contribution is integral (the
    common whole-number-cost case); otherwise a fixed-step grid DP with
    ceiling-rounded contributions, which never overshoots the true budget.
    """
    weights = [s / n_total for s in leaf_sizes]

    # Constraint slack? Take per-leaf argmaxes directly.
    best = [int(np.argmax(q)) for q in leaf_q]
    best_cost = sum(w * costs[a] for w, a in zip(weights, best))
    if best_cost <= average_budget + _EPS:
        value = sum(w * q[a] for w, q, a in zip(weights, leaf_q, best))
        return best, float(value)

    budget_total = average_budget * n_total
    contributions = [[size * c for c in costs] for size in leaf_sizes]

    integral = all(abs(c - round(c)) < 1e-6 for row in contributions for c in row)
    if integral:
        capacity = int(math.floor(budget_total + _EPS))
        if capacity <= EXACT_DP_CAPACITY_MAX:
            units = [[int(round(c)) for c in row] for row in contributions]
            return _dp(units, leaf_q, weights, capacity)
    # Conservative grid: contributions round up, capacity rounds down.
    unit = budget_total / BUDGET_GRID_STEPS if budget_total > 0 else 1.0
    units = [
        [int(math.ceil(c / unit - 1e-12)) for c in row] for row in contributions
    ]
    capacity = BUDGET_GRID_STEPS if budget_total > 0 else 0
    return _dp(units, leaf_q, weights, capacity)


def _dp(
    units: list[list[int]],
    leaf_q: Sequence[np.ndarray],
    weights: Sequence[float],
    capacity: int,
) -> tuple[list[int], float]:
    n_leaves = len(units)
    n_actions = len(units[0])
    neg = -np.inf
    value = np.zeros(capacity + 1)
    choice = np.zeros((n_leaves, capacity + 1), dtype=np.int16)
    for li in range(n_leaves):
        new = np.full(capacity + 1, neg)
        pick = np.zeros(capacity + 1, dtype=np.int16)
        for a in range(n_actions):
            c = units[li][a]
            if c > capacity:
                continue
            gain = weights[li] * float(leaf_q[li][a])
            shifted = np.full(capacity + 1, neg)
            if c == 0:
                shifted = value + gain
            else:
                shifted[c:] = value[:-c] + gain
            better = shifted > new
            new[better] = shifted[better]
            pick[better] = a
        value = new
        choice[li] = pick
        if not np.isfinite(value).any():
            raise InfeasibleBudget(
                "even the cheapest per-leaf actions exceed the average budget"
            )
    # dp[c] is best using exactly budget <= c reachable states; take the best state
    end = int(np.argmax(value))
    if not np.isfinite(value[end]):
        raise InfeasibleBudget("no feasible action assignment under the budget")
    actions = [0] * n_leaves
    c = end
    for li in range(n_leaves - 1, -1, -1):
        a = int(choice[li][c])
        actions[li] = a
        c -= units[li][a]
    return actions, float(value[end])


# ---------------------------------------------------------------------------
# learning
# ---------------------------------------------------------------------------

@dataclass
class _Candidate:
    column: str
    threshold: float | None
    members: tuple | None
    label: tuple  # dedupe/ordering key


def _split_candidates(table: DataTable, meta: DatasetMetadata, features: Sequence[str]) -> list[_Candidate]:
    out: list[_Candidate] = []
    for name in features:
        col = meta.column(name)
        values = table.column(name)
        if col.dtype == "numeric":
            present = np.asarray([v for v in values if v is not None], dtype=float)
            if present.size == 0:
                continue
            edges = quantile_edges(present, 4)
            bounds = np.unique(np.concatenate(([present.min()], edges, [present.max()])))
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                thr = (lo + hi) / 2.0
                out.append(_Candidate(name, float(thr), None, (name, float(thr))))
        elif col.dtype == "boolean":
            out.append(_Candidate(name, None, (True,), (name, "true")))
        else:
            for level in sorted(set(v for v in values if v is not None)):
                out.append(_Candidate(name, None, (level,), (name, str(level))))
    return out


class _Learner:
    def __init__(self, table: DataTable, meta: DatasetMetadata, features: Sequence[str]):
        self.table = table
        self.meta = meta
        self.features = list(features)
        self.n = table.row_count
        self.y = outcome_array(table, meta)
        self.levels, self.action_codes, self.action_flags = action_levels_and_codes(table, meta)
        self.n_actions = len(self.levels)
        parts = [covariate_codes(table, meta, f) for f in self.features]
        self.strata_codes, _ = combine_codes(parts, self.n)
        self.raw_columns = {f: table.column(f) for f in self.features}
        self.fallback_used = False

    def q_values(self, rows: np.ndarray, parent_q: np.ndarray | None) -> np.ndarray:
        sub_strata = self.strata_codes[rows]
        _, dense = np.unique(sub_strata, return_inverse=True)
        q = standardized_means(
            self.y[rows],
            self.action_codes[rows],
            self.n_actions,
            dense,
            int(dense.max()) + 1 if len(dense) else 1,
        )
        if parent_q is not None:
            missing = ~np.isfinite(q)
            if missing.any():
                self.fallback_used = True
                q = np.where(missing, parent_q, q)
        return q

    def partition(self, rows: np.ndarray, cand: _Candidate) -> tuple[np.ndarray, np.ndarray]:
        values = self.raw_columns[cand.column]
        if cand.threshold is not None:
            mask = np.asarray(
                [values[i] is not None and values[i] <= cand.threshold for i in rows]
            )
        else:
            mask = np.asarray([values[i] in cand.members for i in rows])
        return rows[mask], rows[~mask]


def learn_policy(
    table: DataTable,
    meta: DatasetMetadata,
    features: Sequence[str],
    num_rules: int,
    average_budget: float,
    seed: int = 0,
) -> OptimizationResult:
    """Learn a prescriptive tree maximizing projected KPI under the budget."""
    if num_rules < 1:
        raise TooFewRules(f"num_rules must be >= 1, got {num_rules}")
    if average_budget < 0:
        raise ValueError("average_budget must be >= 0")
    for f in features:
        meta.column(f)

    learner = _Learner(table, meta, features)
    costs = action_costs(meta, learner.levels)
    candidates = _split_candidates(table, meta, features)

    root = TreeNode(coverage=learner.n)
    all_rows = np.arange(learner.n)
    root_q = learner.q_values(all_rows, None)
    # segments: parallel lists of (node, rows, q)
    seg_nodes = [root]
    seg_rows = [all_rows]
    seg_q = [root_q]

    def allocate(rows_list, q_list):
        return allocate_actions(
            [len(r) for r in rows_list], q_list, costs, average_budget, learner.n
        )

    _, objective = allocate(seg_rows, seg_q)

    while len(seg_nodes) < num_rules:
        best = None  # (value, seg index, candidate, yes_rows, no_rows, yes_q, no_q)
        for si in range(len(seg_nodes)):
            seen_partitions: set = set()
            for cand in candidates:
                yes_rows, no_rows = learner.partition(seg_rows[si], cand)
                if len(yes_rows) < MIN_LEAF_ROWS or len(no_rows) < MIN_LEAF_ROWS:
                    continue
                key = yes_rows.tobytes()
                if key in seen_partitions:
                    continue
                seen_partitions.add(key)
                yes_q = learner.q_values(yes_rows, seg_q[si])
                no_q = learner.q_values(no_rows, seg_q[si])
                trial_rows = seg_rows[:si] + [yes_rows, no_rows] + seg_rows[si + 1 :]
                trial_q = seg_q[:si] + [yes_q, no_q] + seg_q[si + 1 :]
                try:
                    _, value = allocate(trial_rows, trial_q)
                except InfeasibleBudget:
                    continue
                if best is None or value > best[0] + 1e-12:
                    best = (value, si, cand, yes_rows, no_rows, yes_q, no_q)
        if best is None or best[0] <= objective + 1e-12:
            break
        value, si, cand, yes_rows, no_rows, yes_q, no_q = best
        node = seg_nodes[si]
        node.column = cand.column
        node.threshold = cand.threshold
        node.members = cand.members
        node.yes = TreeNode(coverage=len(yes_rows))
        node.no = TreeNode(coverage=len(no_rows))
        seg_nodes[si : si + 1] = [node.yes, node.no]
        seg_rows[si : si + 1] = [yes_rows, no_rows]
        seg_q[si : si + 1] = [yes_q, no_q]
        objective = value

    assignment, objective = allocate(seg_rows, seg_q)
    for node, rows, a in zip(seg_nodes, seg_rows, assignment):
        node.action = learner.levels[a]
        node.coverage = len(rows)

    tree = PolicyTree(root=root, num_rules=len(seg_nodes), features=tuple(features))
    weights = [len(r) / learner.n for r in seg_rows]
    budget_used = float(sum(w * costs[a] for w, a in zip(weights, assignment)))
    assert budget_used <= average_budget + _EPS, "budget constraint violated"

    distribution: dict = {}
    for w, a in zip(weights, assignment):
        level = learner.levels[a]
        distribution[level] = distribution.get(level, 0.0) + w
    distribution = {k: distribution[k] for k in sorted(distribution)}

    flags = list(learner.action_flags)
    if learner.fallback_used:
        flags.append("q_fallback")

    return OptimizationResult(
        tree=tree,
        projected_kpi=float(objective),
        baseline_kpi=current_policy(table, meta).kpi,
        budget_used=budget_used,
        average_budget=average_budget,
        action_distribution=distribution,
        flags=flags,
    )


def evaluate_policy(
    tree: PolicyTree,
    table: DataTable,
    meta: DatasetMetadata,
    average_budget: float | None = None,
) -> OptimizationResult:
    """Re-score a learned tree against a (possibly different) table."""
    learner = _Learner(table, meta, tree.features)
    costs_by_level = dict(zip(learner.levels, action_costs(meta, learner.levels)))
    routed = tree.route(table)

    # Recompute q with the same parent-fallback rule used during learning.
    flags: list[str] = []

    def node_rows(node: TreeNode, rows: np.ndarray, acc: dict):
        acc[id(node)] = rows
        if node.is_leaf:
            return
        values = table.column(node.column)
        mask = np.asarray([node.matches(values[i]) for i in rows])
        node_rows(node.yes, rows[mask], acc)
        node_rows(node.no, rows[~mask], acc)

    rows_by_node: dict = {}
    node_rows(tree.root, np.arange(table.row_count), rows_by_node)

    q_by_node: dict = {}

    def fill_q(node: TreeNode, parent_q: np.ndarray | None):
        rows = rows_by_node[id(node)]
        if len(rows):
            q = learner.q_values(rows, parent_q)
        else:
            q = parent_q if parent_q is not None else np.full(learner.n_actions, np.nan)
        q_by_node[id(node)] = q
        if not node.is_leaf:
            fill_q(node.yes, q)
            fill_q(node.no, q)

    fill_q(tree.root, None)

    level_index = {level: i for i, level in enumerate(learner.levels)}
    n = table.row_count
    projected = 0.0
    budget_used = 0.0
    distribution: dict = {}
    baseline = current_policy(table, meta).kpi
    for leaf in tree.leaves():
        rows = rows_by_node[id(leaf)]
        leaf.coverage = len(rows)
        if len(rows) == 0:
            continue
        w = len(rows) / n
        action = leaf.action
        if action in level_index:
            q = float(q_by_node[id(leaf)][level_index[action]])
            if not np.isfinite(q):
                q = baseline
                flags.append("no_data_for_action")
        else:
            q = baseline
            flags.append("no_data_for_action")
        cost = costs_by_level.get(action)
        if cost is None:
            if meta.action_costs and str(action) in meta.action_costs:
                cost = float(meta.action_costs[str(action)])
            elif isinstance(action, (int, float)) and not isinstance(action, bool):
                cost = float(action)
            else:
                cost = 0.0
                flags.append("no_cost_for_action")
        projected += w * q
        budget_used += w * cost
        distribution[action] = distribution.get(action, 0.0) + w

    if learner.fallback_used:
        flags.append("q_fallback")

    return OptimizationResult(
        tree=tree,
        projected_kpi=projected,
        baseline_kpi=baseline,
        budget_used=budget_used,
        average_budget=average_budget,
        action_distribution={k: distribution[k] for k in sorted(distribution)},
        flags=flags,
    )


def render_tree(tree: PolicyTree) -> ChartSpec:
    """Nested node spec with human-readable predicate labels."""

    def walk(node: TreeNode, edge: str | None) -> TreeNodeSpec:
        if node.is_leaf:
            return TreeNodeSpec(
                label=f"action: {node.action} ({node.coverage} rows)",
                leaf_action=node.action,
                edge=edge,
            )
        return TreeNodeSpec(
            label=node.predicate_label(),
            children=[walk(node.yes, "yes"), walk(node.no, "no")],
            edge=edge,
        )

    return ChartSpec(
        kind="tree",
        title="Prescriptive policy tree",
        tree=walk(tree.root, None),
    )
