"""Structured chart payloads handed to the UI and the transcript exporter.

The wire carries declarative specs only; rendering happens client-side (or in
the standalone SVG exporter). Three kinds: bar, line, tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any


@dataclass
class Series:
    label: str
    x: list[Any]
    y: list[float]
    y_error: list[float] | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"label": self.label, "x": list(self.x), "y": list(self.y)}
        if self.y_error is not None:
            d["y_error"] = list(self.y_error)
        return d


@dataclass
class TreeNodeSpec:
    label: str
    children: list["TreeNodeSpec"] = field(default_factory=list)
    leaf_action: Any | None = None
    edge: str | None = None  # "yes"/"no" on the edge from the parent

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"label": self.label, "children": [c.to_dict() for c in self.children]}
        if self.leaf_action is not None:
            d["leaf_action"] = self.leaf_action
        if self.edge is not None:
            d["edge"] = self.edge
        return d


@dataclass
class ChartSpec:
    kind: str  # bar | line | tree
    title: str
    series: list[Series] = field(default_factory=list)
    tree: TreeNodeSpec | None = None

    def __post_init__(self):
        if self.kind not in ("bar", "line", "tree"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        for s in self.series:
            if len(s.x) != len(s.y):
                raise ValueError(f"series {s.label!r}: x and y lengths differ")
            if s.y_error is not None and len(s.y_error) != len(s.y):
                raise ValueError(f"series {s.label!r}: y_error length differs from y")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "title": self.title}
        if self.kind == "tree":
            d["tree"] = self.tree.to_dict() if self.tree else None
        else:
            d["series"] = [s.to_dict() for s in self.series]
        return d


_NUMERIC_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?")


def numeric_tokens(text: str) -> set[str]:
    """All digit-bearing tokens in a rendered string, for groundedness audits."""
    return set(_NUMERIC_TOKEN_RE.findall(text))


def format_number(value: float, percent: bool = False) -> str:
    """Render a numeric result for user-facing text.

    Percentages get two decimals (boolean-mean KPIs); everything else is
    trimmed to four significant digits. Integral values lose the trailing .0.
    """
    if percent:
        return f"{value * 100:.2f}%"
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.4g}"
