"""Quantitative evaluation of intent classification and extraction.

Test sets come from a seeded, rule-based paraphrase perturber (label-safe by
construction: gold labels are copied verbatim and value literals are never
touched). Metrics follow the usual confusion-matrix identities and are
cross-checked in tests against an independent counting path.
"""

from __future__ import annotations

import io
import json
import re
import time
from dataclasses import dataclass, field
from typing import Sequence

from .errors import UnsupportedFormat
from .nlu import (
    ExtractorSpec,
    PromptSample,
    Strategy,
    classify_intent,
    extract_param,
    format_output_literal,
)

INTENT_ORDER = (
    "select_features",
    "show_causal_effect",
    "run_optimize",
    "show_current_policy",
    "counterfactual",
    "unknown",
)


@dataclass
class LabeledQuery:
    query: str
    gold: PromptSample  # carries intent + params; query field is the source text


@dataclass
class MetricsReport:
    label: str
    n: int
    accuracy: float
    accuracy_display: str
    f1_macro: float
    precision_macro: float
    recall_macro: float
    confusion_labels: list[str]
    confusion: list[list[int]]
    mean_latency: float
    extractor_rates: dict[str, float] = field(default_factory=dict)
    averaging: str = "macro"

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "accuracy": self.accuracy,
            "accuracy_display": self.accuracy_display,
            "f1_macro": self.f1_macro,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "confusion_labels": list(self.confusion_labels),
            "confusion": [list(r) for r in self.confusion],
            "mean_latency": self.mean_latency,
            "latency_display": f"{self.mean_latency:.2f}s",
            "extractor_rates": dict(self.extractor_rates),
            "averaging": self.averaging,
        }


# ---------------------------------------------------------------------------
# perturbation (paraphrase substitute)
# ---------------------------------------------------------------------------

_SYNONYMS = {
    "show": "display",
    "important": "relevant",
    "best": "optimal",
    "features": "variables",
    "effect": "impact",
    "current": "present",
    "policy": "strategy",
    "optimize": "improve",
}

_PREFIXES = ("could you ", "please ", "hey, ", "kindly ")
_SUFFIXES = (" please", " thanks", "!!", "?")


def _protected_tokens(sample: PromptSample) -> set[str]:
    protected: set[str] = set()
    for value in sample.params.values():
        if value is None:
            continue
        for tok in re.findall(r"[\w.\-]+", str(value).lower()):
            protected.add(tok)
    return protected


def _synonym_swap(text: str, protected: set[str], rng) -> str:
    words = text.split(" ")
    out = []
    for w in words:
        core = w.strip(".,!?").lower()
        if core in _SYNONYMS and core not in protected and rng.random() < 0.9:
            repl = _SYNONYMS[core]
            out.append(w.lower().replace(core, repl))
        else:
            out.append(w)
    return " ".join(out)


def _reorder(text: str) -> str:
    m = re.match(r"^what if (.+?)\??$", text, flags=re.IGNORECASE)
    if m:
        return f"If {m.group(1)}, what would happen?"
    return text


def perturb_queries(
    db: Sequence[PromptSample], seed: int = 0, n_target: int = 238
) -> list[LabeledQuery]:
    """Label-preserving rewrites of prompt-database queries.

    Transforms compose per item: synonym substitution from a fixed lexicon,
    politeness prefix/suffix, punctuation and case jitter, and clause
    reordering for the what-if template. Gold labels are copied verbatim.
    """
    import random

    rng = random.Random(seed)
    source = list(db)
    out: list[LabeledQuery] = []
    i = 0
    order = list(range(len(source)))
    rng.shuffle(order)
    while len(out) < n_target:
        sample = source[order[i % len(order)]]
        i += 1
        protected = _protected_tokens(sample)
        text = sample.query
        if rng.random() < 0.8:
            text = _synonym_swap(text, protected, rng)
        if rng.random() < 0.5:
            text = _reorder(text)
        if rng.random() < 0.7:
            text = rng.choice(_PREFIXES) + text[0].lower() + text[1:]
        if rng.random() < 0.4:
            text = text.rstrip(".?!") + rng.choice(_SUFFIXES)
        if rng.random() < 0.3:
            text = text.lower()
        if text == sample.query:
            text = "please " + text[0].lower() + text[1:]
        out.append(LabeledQuery(query=text, gold=sample))
    return out


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _confusion(golds: list[str], preds: list[str]) -> tuple[list[str], list[list[int]]]:
    labels = [l for l in INTENT_ORDER if l in set(golds) | set(preds)]
    index = {l: i for i, l in enumerate(labels)}
    matrix = [[0] * len(labels) for _ in labels]
    for g, p in zip(golds, preds):
        matrix[index[g]][index[p]] += 1
    return labels, matrix


def _macro_metrics(labels: list[str], matrix: list[list[int]], golds: list[str]) -> tuple[float, float, float]:
    """Macro precision/recall/F1 over the classes present in gold."""
    present = [l for l in labels if l in set(golds)]
    precisions, recalls, f1s = [], [], []
    for label in present:
        i = labels.index(label)
        tp = matrix[i][i]
        fp = sum(matrix[r][i] for r in range(len(labels))) - tp
        fn = sum(matrix[i]) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    k = len(present)
    return (sum(precisions) / k, sum(recalls) / k, sum(f1s) / k) if k else (0.0, 0.0, 0.0)


def metrics_from_predictions(
    golds: list[str], preds: list[str], latencies: list[float], label: str
) -> MetricsReport:
    n = len(golds)
    labels, matrix = _confusion(golds, preds)
    correct = sum(matrix[i][i] for i in range(len(labels)))
    accuracy = correct / n if n else 0.0
    precision, recall, f1 = _macro_metrics(labels, matrix, golds)
    return MetricsReport(
        label=label,
        n=n,
        accuracy=accuracy,
        accuracy_display=f"{accuracy:.2f} ({correct}/{n})",
        f1_macro=f1,
        precision_macro=precision,
        recall_macro=recall,
        confusion_labels=labels,
        confusion=matrix,
        mean_latency=sum(latencies) / n if n else 0.0,
    )


def evaluate_intent(
    strategy: Strategy, testset: Sequence[LabeledQuery], label: str = "strategy"
) -> MetricsReport:
    golds, preds, latencies = [], [], []
    for item in testset:
        start = time.perf_counter()
        preds.append(classify_intent(item.query, strategy))
        latencies.append(time.perf_counter() - start)
        golds.append(item.gold.intent)
    return metrics_from_predictions(golds, preds, latencies, label)


def evaluate_extractors(
    strategy: Strategy,
    specs: Sequence[ExtractorSpec],
    testset: Sequence[LabeledQuery],
    label: str = "strategy",
) -> MetricsReport:
    """Exact-match rate per extractor; absent counts as a value."""
    rates: dict[str, float] = {}
    latencies: list[float] = []
    for spec in specs:
        hits = 0
        for item in testset:
            start = time.perf_counter()
            got = extract_param(item.query, spec, strategy)
            latencies.append(time.perf_counter() - start)
            gold = item.gold.params.get(spec.param)
            if format_output_literal(got, spec.null_default) == format_output_literal(
                gold, spec.null_default
            ):
                hits += 1
        rates[spec.param] = hits / len(testset) if testset else 0.0
    mean_rate = sum(rates.values()) / len(rates) if rates else 0.0
    n = len(testset)
    return MetricsReport(
        label=label,
        n=n,
        accuracy=mean_rate,
        accuracy_display=f"{mean_rate:.2f}",
        f1_macro=mean_rate,
        precision_macro=mean_rate,
        recall_macro=mean_rate,
        confusion_labels=[],
        confusion=[],
        mean_latency=sum(latencies) / len(latencies) if latencies else 0.0,
        extractor_rates=rates,
    )


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

_METRIC_COLUMNS = ("label", "n", "accuracy_display", "f1_macro", "precision_macro", "recall_macro", "latency")


def emit_report(reports: MetricsReport | list[MetricsReport], fmt: str = "json") -> bytes:
    if isinstance(reports, MetricsReport):
        reports = [reports]
    if fmt == "json":
        return (
            json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
        ).encode("utf-8")
    if fmt == "markdown":
        buf = io.StringIO()
        buf.write("| " + " | ".join(_METRIC_COLUMNS) + " |\n")
        buf.write("|" + "---|" * len(_METRIC_COLUMNS) + "\n")
        for r in reports:
            row = [
                r.label,
                str(r.n),
                r.accuracy_display,
                f"{r.f1_macro:.2f}",
                f"{r.precision_macro:.2f}",
                f"{r.recall_macro:.2f}",
                f"{r.mean_latency:.2f}s",
            ]
            buf.write("| " + " | ".join(row) + " |\n")
        for r in reports:
            if not r.confusion_labels:
                continue
            buf.write(f"\n### Confusion ({r.label})\n\n")
            buf.write("| gold\\pred | " + " | ".join(r.confusion_labels) + " |\n")
            buf.write("|" + "---|" * (len(r.confusion_labels) + 1) + "\n")
            for label, row in zip(r.confusion_labels, r.confusion):
                buf.write("| " + label + " | " + " | ".join(str(v) for v in row) + " |\n")
        return buf.getvalue().encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(_METRIC_COLUMNS) + "\n")
        for r in reports:
            buf.write(
                ",".join(
                    [
                        r.label,
                        str(r.n),
                        f"{r.accuracy:.4f}",
                        f"{r.f1_macro:.4f}",
                        f"{r.precision_macro:.4f}",
                        f"{r.recall_macro:.4f}",
                        f"{r.mean_latency:.2f}",
                    ]
                )
                + "\n"
            )
        return buf.getvalue().encode("utf-8")
    raise UnsupportedFormat(f"unknown report format {fmt!r}")
