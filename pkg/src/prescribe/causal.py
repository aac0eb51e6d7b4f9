"""Analysis backends: covariate selection, effect curves, policy snapshot.

Estimation strategy is deliberately model-free so results are exactly
reproducible and brute-force checkable: outcomes are summarized by
piecewise-constant group means over quantile-binned covariate strata, and
adjusted effect curves weight stratum means by stratum frequency
(standardization), skipping strata with no support and renormalizing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .charts import ChartSpec, Series
from .dataset import DataTable, DatasetMetadata
from .errors import EmptyTable, NoCovariates, NoMatchingRows, TooFewRows

COVARIATE_BINS = 4
ACTION_BINS = 5
ACTION_RAW_LEVEL_MAX = 10
BOOTSTRAP_RESAMPLES = 200
MIN_SUPPORT_WARN = 30
MIN_SUPPORT_ERROR = 5


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class EffectEstimate:
    """Expected outcome per action level, optionally covariate-adjusted."""

    action_levels: list
    estimates: list[float]
    baseline: float
    n_per_level: list[int]
    standard_errors: list[float] | None = None
    conditions: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.action_levels) == len(self.estimates) == len(self.n_per_level)):
            raise ValueError("action_levels, estimates and n_per_level must align")

    def contrast(self, a1, a2) -> float:
        """Estimated effect of action level a1 versus a2."""
        i1 = self.action_levels.index(a1)
        i2 = self.action_levels.index(a2)
        return self.estimates[i1] - self.estimates[i2]

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "action_levels": list(self.action_levels),
            "estimates": list(self.estimates),
            "baseline": self.baseline,
            "n_per_level": list(self.n_per_level),
            "conditions": dict(self.conditions),
            "flags": list(self.flags),
        }
        if self.standard_errors is not None:
            d["standard_errors"] = list(self.standard_errors)
        return d


@dataclass
class FeatureReport:
    ranked_features: list[tuple[str, float]]
    selected: list[str]
    cv_curve: list[tuple[int, float]]
    baseline_loss: float

    def to_dict(self) -> dict:
        return {
            "ranked_features": [[n, s] for n, s in self.ranked_features],
            "selected": list(self.selected),
            "cv_curve": [[int(k), float(v)] for k, v in self.cv_curve],
            "baseline_loss": self.baseline_loss,
        }


@dataclass
class PolicySnapshot:
    action_distribution: dict
    kpi: float
    n: int

    def to_dict(self) -> dict:
        return {
            "action_distribution": {str(k): v for k, v in self.action_distribution.items()},
            "kpi": self.kpi,
            "n": self.n,
        }


# ---------------------------------------------------------------------------
# binning / coding helpers
# ---------------------------------------------------------------------------

def quantile_edges(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Interior quantile cut points, deduplicated. Values equal to an edge
    fall into the lower bin (searchsorted side='left')."""
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    return np.unique(np.quantile(values, qs))


def outcome_array(table: DataTable, meta: DatasetMetadata) -> np.ndarray:
    col = meta.column(meta.outcome_column)
    values = table.column(meta.outcome_column)
    if col.dtype == "boolean":
        return np.asarray([1.0 if v else 0.0 for v in values])
    if col.dtype == "numeric":
        return np.asarray(values, dtype=float)
    raise ValueError(f"outcome column {meta.outcome_column!r} must be numeric or boolean")


def covariate_codes(table: DataTable, meta: DatasetMetadata, name: str) -> tuple[np.ndarray, int]:
    """Integer stratum code per row for one covariate.

    Numeric columns get COVARIATE_BINS quantile bins; categorical/boolean use
    their levels. Missing cells form their own level so rows are retained.
    """
    col = meta.column(name)
    values = table.column(name)
    if col.dtype == "numeric":
        present = np.asarray([v for v in values if v is not None], dtype=float)
        edges = quantile_edges(present, COVARIATE_BINS) if present.size else np.asarray([])
        n_levels = len(edges) + 1
        codes = np.asarray(
            [
                n_levels if v is None else int(np.searchsorted(edges, v, side="left"))
                for v in values
            ]
        )
        return codes, n_levels + 1
    if col.dtype == "boolean":
        codes = np.asarray([2 if v is None else (1 if v else 0) for v in values])
        return codes, 3
    levels: dict = {}
    codes_list = []
    for v in values:
        if v is None:
            codes_list.append(-1)
            continue
        if v not in levels:
            levels[v] = len(levels)
        codes_list.append(levels[v])
    missing_code = len(levels)
    codes = np.asarray([missing_code if c == -1 else c for c in codes_list])
    return codes, missing_code + 1


def combine_codes(
    parts: Sequence[tuple[np.ndarray, int]], n_rows: int
) -> tuple[np.ndarray, int]:
    """Fold per-feature codes into one compressed stratum code per row."""
    if not parts:
        return np.zeros(n_rows, dtype=np.int64), 1
    codes, n = parts[0]
    codes = codes.astype(np.int64)
    for more, m in parts[1:]:
        codes = codes * m + more
        uniq, codes = np.unique(codes, return_inverse=True)
        n = len(uniq)
    uniq, codes = np.unique(codes, return_inverse=True)
    return codes, len(uniq)


def action_levels_and_codes(
    table: DataTable, meta: DatasetMetadata
) -> tuple[list, np.ndarray, list[str]]:
    """Action level list, per-row level code, and degeneracy flags.

    Numeric actions with few distinct values keep raw levels (campaign-style
    small integers); wide numeric actions collapse to ACTION_BINS quantile
    bins represented by the member mean.
    """
    col = meta.column(meta.action_column)
    values = table.column(meta.action_column)
    flags: list[str] = []
    if col.dtype == "numeric":
        arr = np.asarray(values, dtype=float)
        distinct = np.unique(arr)
        if distinct.size <= ACTION_RAW_LEVEL_MAX:
            levels = [float(v) for v in distinct]
            codes = np.searchsorted(distinct, arr)
        else:
            edges = quantile_edges(arr, ACTION_BINS)
            raw = np.searchsorted(edges, arr, side="left")
            present = sorted(set(int(b) for b in raw))
            remap = {b: i for i, b in enumerate(present)}
            codes = np.asarray([remap[int(b)] for b in raw])
            levels = [float(arr[codes == i].mean()) for i in range(len(present))]
            flags.append("action_binned")
    elif col.dtype == "boolean":
        levels = [False, True]
        codes = np.asarray([1 if v else 0 for v in values])
        present = sorted(set(int(c) for c in codes))
        if len(present) == 1:
            levels = [bool(present[0])]
            codes = np.zeros(len(values), dtype=np.int64)
    else:
        levels = sorted(set(values))
        idx = {v: i for i, v in enumerate(levels)}
        codes = np.asarray([idx[v] for v in values])
    if len(levels) == 1:
        flags.append("single_action_level")
    return levels, codes, flags


# ---------------------------------------------------------------------------
# standardization kernel
# ---------------------------------------------------------------------------

def standardized_means(
    y: np.ndarray,
    action_codes: np.ndarray,
    n_actions: int,
    strata_codes: np.ndarray,
    n_strata: int,
) -> np.ndarray:
    """Per-action standardized outcome means.

    estimate[a] = sum_s w_s * mean(y | a, s) over strata s with support for a,
    with w_s renormalized over the supporting strata.
    """
    strat_counts = np.bincount(strata_codes, minlength=n_strata).astype(float)
    cell = action_codes.astype(np.int64) * n_strata + strata_codes
    size = n_actions * n_strata
    cell_n = np.bincount(cell, minlength=size).reshape(n_actions, n_strata)
    cell_sum = np.bincount(cell, weights=y, minlength=size).reshape(n_actions, n_strata)
    out = np.full(n_actions, np.nan)
    for a in range(n_actions):
        support = cell_n[a] > 0
        if not support.any():
            continue
        w = strat_counts[support]
        means = cell_sum[a, support] / cell_n[a, support]
        out[a] = float((w * means).sum() / w.sum())
    return out


def _bootstrap_errors(
    y: np.ndarray,
    action_codes: np.ndarray,
    n_actions: int,
    strata_codes: np.ndarray,
    n_strata: int,
    seed: int,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
) -> list[float]:
    n = len(y)
    draws = np.empty((n_resamples, n_actions))
    seeds = np.random.SeedSequence(seed).spawn(n_resamples)
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=n)
        draws[i] = standardized_means(
            y[idx], action_codes[idx], n_actions, strata_codes[idx], n_strata
        )
    with np.errstate(invalid="ignore"):
        se = np.nanstd(draws, axis=0, ddof=1)
    return [float(v) if np.isfinite(v) else 0.0 for v in se]


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _validate_features(meta: DatasetMetadata, features: Sequence[str]) -> None:
    for f in features:
        meta.column(f)  # raises UnknownColumn
        if f in (meta.action_column, meta.outcome_column):
            raise ValueError(f"{f!r} is the action/outcome column, not a covariate")


def effect_curve(
    table: DataTable,
    meta: DatasetMetadata,
    features: Sequence[str],
    show_error: bool = False,
    seed: int = 0,
) -> EffectEstimate:
    """Average effect of the action on the outcome, adjusted for `features`.

    With no features this reduces exactly to raw per-level outcome means.
    """
    if table.row_count == 0:
        raise EmptyTable("cannot estimate on an empty table")
    _validate_features(meta, features)

    y = outcome_array(table, meta)
    levels, action_codes, flags = action_levels_and_codes(table, meta)
    parts = [covariate_codes(table, meta, f) for f in features]
    strata_codes, n_strata = combine_codes(parts, table.row_count)

    estimates = standardized_means(y, action_codes, len(levels), strata_codes, n_strata)
    n_per_level = np.bincount(action_codes, minlength=len(levels))

    errors = None
    if show_error:
        errors = _bootstrap_errors(
            y, action_codes, len(levels), strata_codes, n_strata, seed
        )

    return EffectEstimate(
        action_levels=levels,
        estimates=[float(e) for e in estimates],
        baseline=float(y.mean()),
        n_per_level=[int(c) for c in n_per_level],
        standard_errors=errors,
        flags=flags,
    )


def condition_mask(
    table: DataTable, meta: DatasetMetadata, conditions: dict
) -> np.ndarray:
    """Boolean row mask for a condition map.

    Numeric conditions use the nearest-bin rule: a cell matches when it lies
    within half the width of the quantile bin containing the condition value.
    """
    mask = np.ones(table.row_count, dtype=bool)
    for name, target in conditions.items():
        col = meta.column(name)  # raises UnknownColumn
        values = table.column(name)
        if col.dtype == "numeric":
            present = np.asarray([v for v in values if v is not None], dtype=float)
            if present.size == 0:
                raise NoMatchingRows(f"column {name!r} has no present values")
            edges = quantile_edges(present, COVARIATE_BINS)
            bounds = np.concatenate(([present.min()], edges, [present.max()]))
            bounds = np.unique(bounds)
            target_f = float(target)
            if len(bounds) < 2:
                tol = 0.0
            else:
                b = int(np.searchsorted(bounds[1:-1], target_f, side="left"))
                b = min(b, len(bounds) - 2)
                tol = (bounds[b + 1] - bounds[b]) / 2.0
            col_mask = np.asarray(
                [v is not None and abs(v - target_f) <= tol for v in values]
            )
        else:
            col_mask = np.asarray([v is not None and v == target for v in values])
        mask &= col_mask
    return mask


def subset_table(table: DataTable, mask: np.ndarray) -> DataTable:
    idx = np.flatnonzero(mask)
    cols = {name: [vals[i] for i in idx] for name, vals in table.columns.items()}
    return DataTable(
        columns=cols,
        row_count=len(idx),
        dropped_rows=table.dropped_rows,
        column_order=table.column_order,
    )


def conditional_effect(
    table: DataTable,
    meta: DatasetMetadata,
    conditions: dict,
    features: Sequence[str],
    show_error: bool = False,
    seed: int = 0,
) -> EffectEstimate:
    """Effect curve on the condition-satisfying subset.

    The baseline reported is the unconditional outcome mean of the full table
    so conditioned and average curves are directly comparable.
    """
    if not conditions:
        return effect_curve(table, meta, features, show_error=show_error, seed=seed)
    mask = condition_mask(table, meta, conditions)
    n_match = int(mask.sum())
    if n_match < MIN_SUPPORT_ERROR:
        raise NoMatchingRows(
            f"only {n_match} rows satisfy {conditions!r} (need at least {MIN_SUPPORT_ERROR})"
        )
    est = effect_curve(subset_table(table, mask), meta, features, show_error=show_error, seed=seed)
    est.conditions = dict(conditions)
    est.baseline = float(outcome_array(table, meta).mean())
    if n_match < MIN_SUPPORT_WARN:
        est.flags.append("low_support")
    return est


def current_policy(table: DataTable, meta: DatasetMetadata) -> PolicySnapshot:
    if table.row_count == 0:
        raise EmptyTable("cannot snapshot an empty table")
    values = table.column(meta.action_column)
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    order = sorted(counts)
    distribution = {v: counts[v] / table.row_count for v in order}
    kpi = float(outcome_array(table, meta).mean())
    return PolicySnapshot(action_distribution=distribution, kpi=kpi, n=table.row_count)


def select_features(
    table: DataTable, meta: DatasetMetadata, folds: int = 5, seed: int = 0
) -> FeatureReport:
    """Greedy forward selection by K-fold cross-validated prediction loss.

    The outcome model is piecewise constant over (binned action x selected
    covariate strata); squared error doubles as the Brier score for boolean
    outcomes. Ties break on lexicographic column name.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if table.row_count < 2 * folds:
        raise TooFewRows(f"{table.row_count} rows is too few for {folds}-fold CV")
    covariates = [c.name for c in meta.supported_covariates()]
    if not covariates:
        raise NoCovariates("metadata declares no supported covariates")

    n = table.row_count
    y = outcome_array(table, meta)
    _, action_codes, _ = action_levels_and_codes(table, meta)
    action_part = (action_codes, int(action_codes.max()) + 1)
    cov_parts = {name: covariate_codes(table, meta, name) for name in covariates}

    rng = np.random.default_rng(seed)
    fold_id = np.empty(n, dtype=np.int64)
    fold_id[rng.permutation(n)] = np.arange(n) % folds

    def cv_loss(feature_names: list[str]) -> float:
        parts = [action_part] + [cov_parts[f] for f in feature_names]
        strata, n_strata = combine_codes(parts, n)
        sse = 0.0
        for k in range(folds):
            test = fold_id == k
            train = ~test
            t_n = np.bincount(strata[train], minlength=n_strata).astype(float)
            t_sum = np.bincount(strata[train], weights=y[train], minlength=n_strata)
            global_mean = float(y[train].mean())
            with np.errstate(invalid="ignore", divide="ignore"):
                means = np.where(t_n > 0, t_sum / np.maximum(t_n, 1), global_mean)
            pred = means[strata[test]]
            sse += float(((y[test] - pred) ** 2).sum())
        return sse / n

    baseline_loss = cv_loss([])
    selected_order: list[str] = []
    ranked: list[tuple[str, float]] = []
    curve: list[tuple[int, float]] = []
    remaining = sorted(covariates)
    prev_loss = baseline_loss
    while remaining:
        losses = [(cv_loss(selected_order + [c]), c) for c in remaining]
        best_loss, best_col = min(losses)  # ties fall to lexicographic name
        selected_order.append(best_col)
        remaining.remove(best_col)
        ranked.append((best_col, prev_loss - best_loss))
        curve.append((len(selected_order), best_loss))
        prev_loss = best_loss

    losses_by_k = [baseline_loss] + [v for _, v in curve]
    best_k = int(np.argmin(losses_by_k))  # ties prefer the shorter prefix
    return FeatureReport(
        ranked_features=ranked,
        selected=selected_order[:best_k],
        cv_curve=curve,
        baseline_loss=baseline_loss,
    )


# ---------------------------------------------------------------------------
# chart builders
# ---------------------------------------------------------------------------

def cv_curve_chart(report: FeatureReport) -> ChartSpec:
    return ChartSpec(
        kind="line",
        title="Cross-validated loss by number of features",
        series=[
            Series(
                label="cv loss",
                x=[k for k, _ in report.cv_curve],
                y=[v for _, v in report.cv_curve],
            )
        ],
    )


def effect_chart(
    estimate: EffectEstimate,
    action_name: str,
    outcome_name: str,
    average: EffectEstimate | None = None,
) -> ChartSpec:
    label = "conditioned" if estimate.conditions else "average"
    series = [
        Series(
            label=label,
            x=list(estimate.action_levels),
            y=list(estimate.estimates),
            y_error=list(estimate.standard_errors) if estimate.standard_errors else None,
        )
    ]
    if average is not None:
        series.append(
            Series(label="average", x=list(average.action_levels), y=list(average.estimates))
        )
    return ChartSpec(
        kind="line",
        title=f"Effect of {action_name} on {outcome_name}",
        series=series,
    )


def policy_chart(snapshot: PolicySnapshot, action_name: str) -> ChartSpec:
    items = list(snapshot.action_distribution.items())
    return ChartSpec(
        kind="bar",
        title=f"Current {action_name} distribution",
        series=[
            Series(
                label="share of rows",
                x=[str(k) for k, _ in items],
                y=[v for _, v in items],
            )
        ],
    )
