"""Dataset loading: metadata JSON, CSV ingestion, typed column access.

Everything downstream (template filling, estimation, policy learning) works
off the two immutable objects built here: DatasetMetadata and DataTable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import (
    ActionEqualsOutcome,
    DuplicateColumn,
    EmptyTable,
    HeaderMismatch,
    MissingField,
    UnknownColumn,
    UnknownDtype,
)

DTYPES = ("numeric", "categorical", "boolean")

# Strict literal syntax: integers and decimals only, no thousands separators,
# no exponents, so parsing is locale-free and reproducible.
_NUMERIC_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)$")
_TRUE_WORDS = {"yes", "true", "1"}
_FALSE_WORDS = {"no", "false", "0"}
_MISSING_CELLS = {"", "NA"}

DEFAULT_DISTINCT_LIMIT = 25


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    dtype: str
    description: str
    supported: bool = True


@dataclass(frozen=True)
class DatasetMetadata:
    title: str
    path: str
    action_column: str
    outcome_column: str
    columns: tuple[ColumnSpec, ...]
    action_costs: dict[str, float] | None = None  # optional per-level cost override

    def column(self, name: str) -> ColumnSpec:
        for col in self.columns:
            if col.name == name:
                return col
        raise UnknownColumn(f"column {name!r} not in metadata")

    def has_column(self, name: str) -> bool:
        return any(col.name == name for col in self.columns)

    def supported_covariates(self) -> list[ColumnSpec]:
        """Columns that participate in NLU and analysis, excluding action/outcome."""
        return [
            c
            for c in self.columns
            if c.supported and c.name not in (self.action_column, self.outcome_column)
        ]

    def with_supported(self, name: str, supported: bool) -> "DatasetMetadata":
        if not self.has_column(name):
            raise UnknownColumn(f"column {name!r} not in metadata")
        cols = tuple(
            replace(c, supported=supported) if c.name == name else c for c in self.columns
        )
        return replace(self, columns=cols)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "title": self.title,
            "path": self.path,
            "action": self.action_column,
            "outcome": self.outcome_column,
            "columns": [
                {
                    "name": c.name,
                    "dtype": c.dtype,
                    "description": c.description,
                    "supported": c.supported,
                }
                for c in self.columns
            ],
        }
        if self.action_costs is not None:
            d["action_costs"] = dict(self.action_costs)
        return d


@dataclass(frozen=True)
class DataTable:
    """Column-major typed storage. None marks a missing cell."""

    columns: dict[str, list]
    row_count: int
    dropped_rows: int = 0
    column_order: tuple[str, ...] = field(default_factory=tuple)

    def column(self, name: str) -> list:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(f"column {name!r} not in table") from None

    def has_column(self, name: str) -> bool:
        return name in self.columns

    def digest(self) -> str:
        payload = json.dumps(
            {
                "order": list(self.column_order),
                "columns": {k: self.columns[k] for k in self.column_order},
                "rows": self.row_count,
                "dropped": self.dropped_rows,
            },
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def parse_metadata(raw: dict) -> DatasetMetadata:
    """Validate a parsed metadata document and build DatasetMetadata."""
    for key in ("title", "path", "action", "outcome", "columns"):
        if key not in raw:
            raise MissingField(f"metadata is missing required field {key!r}")

    specs: list[ColumnSpec] = []
    seen: set[str] = set()
    for entry in raw["columns"]:
        for key in ("name", "dtype", "description"):
            if key not in entry:
                raise MissingField(f"column entry is missing required field {key!r}")
        name = entry["name"]
        if name in seen:
            raise DuplicateColumn(f"column {name!r} declared twice")
        seen.add(name)
        dtype = entry["dtype"]
        if dtype not in DTYPES:
            raise UnknownDtype(f"column {name!r} has unknown dtype {dtype!r}")
        if not entry["description"]:
            raise MissingField(f"column {name!r} has an empty description")
        specs.append(
            ColumnSpec(
                name=name,
                dtype=dtype,
                description=entry["description"],
                supported=bool(entry.get("supported", True)),
            )
        )

    action, outcome = raw["action"], raw["outcome"]
    if action == outcome:
        raise ActionEqualsOutcome(f"action and outcome are both {action!r}")
    if action not in seen:
        raise MissingField(f"action column {action!r} has no column entry")
    if outcome not in seen:
        raise MissingField(f"outcome column {outcome!r} has no column entry")

    costs = raw.get("action_costs")
    if costs is not None:
        costs = {str(k): float(v) for k, v in costs.items()}

    return DatasetMetadata(
        title=raw["title"],
        path=raw["path"],
        action_column=action,
        outcome_column=outcome,
        columns=tuple(specs),
        action_costs=costs,
    )


def load_metadata(path: str | Path) -> DatasetMetadata:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"metadata file not found: {p}")
    with open(p, encoding="utf-8") as fh:
        raw = json.load(fh)
    return parse_metadata(raw)


def parse_cell(text: str, dtype: str):
    """Parse one CSV cell to its typed value, or None when missing/unparseable."""
    cell = text.strip()
    if cell in _MISSING_CELLS:
        return None
    if dtype == "numeric":
        if _NUMERIC_RE.match(cell):
            return float(cell)
        return None
    if dtype == "boolean":
        low = cell.lower()
        if low in _TRUE_WORDS:
            return True
        if low in _FALSE_WORDS:
            return False
        return None
    return cell  # categorical keeps the raw token


def load_table(meta: DatasetMetadata, csv_path: str | Path | None = None) -> DataTable:
    """Load and type the CSV backing `meta`.

    Rows whose action or outcome cell fails to parse are dropped and counted;
    unparseable covariate cells become missing markers and the row is kept.
    """
    path = Path(csv_path) if csv_path is not None else Path(meta.path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")

    wanted = [c.name for c in meta.columns]
    dtypes = {c.name: c.dtype for c in meta.columns}

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTable(f"{path} has no header row") from None
        header = [h.strip() for h in header]
        missing = [name for name in wanted if name not in header]
        if missing:
            raise HeaderMismatch(f"CSV header lacks metadata columns: {missing}")
        index = {name: header.index(name) for name in wanted}

        columns: dict[str, list] = {name: [] for name in wanted}
        dropped = 0
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            parsed = {}
            for name in wanted:
                cell = row[index[name]] if index[name] < len(row) else ""
                parsed[name] = parse_cell(cell, dtypes[name])
            if parsed[meta.action_column] is None or parsed[meta.outcome_column] is None:
                dropped += 1
                continue
            for name in wanted:
                columns[name].append(parsed[name])

    row_count = len(columns[meta.action_column])
    if row_count == 0:
        raise EmptyTable(f"{path} contains no usable rows (dropped {dropped})")
    return DataTable(
        columns=columns,
        row_count=row_count,
        dropped_rows=dropped,
        column_order=tuple(wanted),
    )


def distinct_values(table: DataTable, column: str, limit: int = DEFAULT_DISTINCT_LIMIT) -> list:
    """First-occurrence-ordered distinct values of a column, missing excluded."""
    values = table.column(column)
    seen: list = []
    seen_set: set = set()
    for v in values:
        if v is None or v in seen_set:
            continue
        seen.append(v)
        seen_set.add(v)
        if len(seen) >= limit:
            break
    return seen
