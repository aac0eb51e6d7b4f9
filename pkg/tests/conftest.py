"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import pytest

from prescribe.dataset import ColumnSpec, DatasetMetadata, DataTable
from prescribe.fixtures import demo_dataset


def make_meta(
    columns: list[tuple[str, str]],
    action: str,
    outcome: str,
    title: str = "Test Data",
    unsupported: set[str] | None = None,
    action_costs: dict | None = None,
) -> DatasetMetadata:
    unsupported = unsupported or set()
    specs = tuple(
        ColumnSpec(
            name=name,
            dtype=dtype,
            description=f"{name} column",
            supported=name not in unsupported,
        )
        for name, dtype in columns
    )
    return DatasetMetadata(
        title=title,
        path="<memory>",
        action_column=action,
        outcome_column=outcome,
        columns=specs,
        action_costs=action_costs,
    )


def make_table(columns: dict[str, list]) -> DataTable:
    names = list(columns)
    n = len(columns[names[0]])
    assert all(len(v) == n for v in columns.values())
    return DataTable(columns=dict(columns), row_count=n, column_order=tuple(names))


def brute_standardized(
    rows: list[dict],
    action: str,
    outcome: str,
    strata: list[str],
    actions: list | None = None,
) -> dict:
    """Exact standardization by nested dict group-by, independent of numpy.

    Assumes covariates are discrete-valued so exact values are the strata
    (fixtures are engineered so the implementation's bins coincide).
    Actions with no support anywhere map to nan.
    """
    stratum_counts: dict = {}
    cell_sum: dict = {}
    cell_n: dict = {}
    for r in rows:
        s = tuple(r[k] for k in strata)
        a = r[action]
        stratum_counts[s] = stratum_counts.get(s, 0) + 1
        cell_sum[(a, s)] = cell_sum.get((a, s), 0.0) + float(r[outcome])
        cell_n[(a, s)] = cell_n.get((a, s), 0) + 1
    if actions is None:
        actions = sorted(set(r[action] for r in rows))
    out = {}
    for a in actions:
        num = 0.0
        den = 0.0
        for s, count in stratum_counts.items():
            if cell_n.get((a, s), 0) > 0:
                num += count * (cell_sum[(a, s)] / cell_n[(a, s)])
                den += count
        out[a] = num / den if den else float("nan")
    return out


@pytest.fixture(scope="session")
def bank(tmp_path_factory):
    out = tmp_path_factory.mktemp("bankdata")
    meta, table = demo_dataset(out, n=2000, seed=11)
    return meta, table
