"""Intent classification and parameter extraction.

Two pluggable strategies share one contract: a deterministic matcher working
off the generated prompt database (offline baseline), and a few-shot strategy
driving any chat-completion provider. Whatever a strategy returns passes
through a closed-set intent gate and per-dtype value gates, so numeric
extractors can never surface non-numeric values and intents outside the tool
set collapse to "unknown".
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

from .dataset import DataTable, DatasetMetadata, distinct_values
from .errors import ProviderUnavailable
from .tools import lookup

INTENTS = (
    "select_features",
    "show_causal_effect",
    "run_optimize",
    "show_current_policy",
    "counterfactual",
    "unknown",
)

SYSTEM_PARAMS = ("num_rules", "average_budget", "show_error")

DTYPE_NULL_DEFAULTS = {
    "numeric": "-1",
    "categorical": "Unknown",
    "boolean": "Unknown",
    "numeric_pair": "Unknown-Unknown",
}

INSTRUCTION_TEMPLATE = """From each command given, extract out the value of "{param}" if specified.
Only output values corresponding to the datatype {dtype}.
If none is given or you are not sure, output {null_default}.

{param} description:
{description}

<examples>"""

INTENT_INSTRUCTION = """Classify command as one of following API calls.
If none can be matched, just output unknown.
'select_features' cross validation plot of the causally relevant features
'show_causal_effect' shows the causal effect conditioned on given features.
'run_opt' produces the optimized pricing policy for given conditions.
'show_current_policy' shows the historical policy for given conditions.
'counterfactual' predicts the counterfactual outcome when columns are fixed.

If the intent is unclear, output `unknown'"""

SYSTEM_PARAM_SPECS = {
    "num_rules": ("numeric", "number of segments (rules) the optimized policy tree may use"),
    "average_budget": ("numeric", "average per-row action budget for policy optimization"),
    "show_error": ("boolean", "whether effect plots should include error bars"),
}

_PARAM_SYNONYMS = {
    "num_rules": ("num_rules", "num rules", "number of rules", "rules", "segments"),
    "average_budget": (
        "average_budget",
        "avg_budget",
        "average budget",
        "avg budget",
        "budget",
    ),
    "show_error": ("show_error", "show error", "error bars", "error bar", "with error"),
}

# Token canonicalization used by the fuzzy matcher: common paraphrase verbs
# collapse to one representative so "display/plot the causal effect" lands on
# the same template as "show the causal effect".
_TOKEN_CANON = {
    "display": "show",
    "plot": "show",
    "graph": "show",
    "visualize": "show",
    "optimal": "best",
    "optimise": "optimize",
    "relevant": "important",
    "key": "important",
    "variables": "features",
    "columns": "features",
    "fields": "features",
    "strategy": "policy",
    "plan": "policy",
}

_STOPWORD_VALUES = {"yes", "no", "true", "false", "the", "and", "all", "any", "not"}

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)$")


@dataclass(frozen=True)
class ExtractorSpec:
    param: str
    dtype: str
    description: str
    null_default: str
    init_text: str


@dataclass(frozen=True)
class PromptSample:
    """One (query, multilabel) pair: gold intent plus every param's value."""

    query: str
    intent: str
    params: dict[str, Any] = field(default_factory=dict, hash=False, compare=False)


@dataclass
class Extraction:
    values: dict[str, Any]
    latencies: dict[str, float]
    errors: list[str] = field(default_factory=list)

    def present(self) -> dict[str, Any]:
        return {k: v for k, v in self.values.items() if v is not None}


def render_instruction(param: str, dtype: str, description: str) -> str:
    return INSTRUCTION_TEMPLATE.format(
        param=param,
        dtype=dtype,
        null_default=DTYPE_NULL_DEFAULTS[dtype],
        description=description,
    )


def make_extractor_spec(param: str, dtype: str, description: str) -> ExtractorSpec:
    return ExtractorSpec(
        param=param,
        dtype=dtype,
        description=description,
        null_default=DTYPE_NULL_DEFAULTS[dtype],
        init_text=render_instruction(param, dtype, description),
    )


def extractor_specs(meta: DatasetMetadata) -> list[ExtractorSpec]:
    """One extractor per supported covariate plus the system parameters."""
    specs = [
        make_extractor_spec(c.name, c.dtype, c.description)
        for c in meta.supported_covariates()
    ]
    for name, (dtype, description) in SYSTEM_PARAM_SPECS.items():
        specs.append(make_extractor_spec(name, dtype, description))
    return specs


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def canonical_intent(raw: str) -> str:
    """Collapse any strategy output onto the closed intent set."""
    text = raw.strip().splitlines()[0] if raw.strip() else ""
    text = text.strip().strip("'\"`.,:;! ").lower()
    if not text:
        return "unknown"
    if text in INTENTS:
        return text
    spec = lookup(text)
    if spec is not None and spec.name in INTENTS:
        return spec.name
    return "unknown"


def parse_number(text: str) -> float | None:
    token = text.strip().rstrip(".,!?")
    if not _NUMBER_RE.match(token):
        return None
    value = float(token)
    if value != value or value in (float("inf"), float("-inf")):
        return None
    return value


def gate_value(spec: ExtractorSpec, raw: str | None):
    """Enforce dtype on a strategy's raw output; anything dubious is absent."""
    if raw is None:
        return None
    text = raw.strip().splitlines()[0].strip() if raw.strip() else ""
    if not text or text == spec.null_default or text.lower() == "unknown":
        return None
    if spec.dtype == "numeric":
        return parse_number(text)
    if spec.dtype == "boolean":
        low = text.strip(".,!? ").lower()
        if low in ("yes", "true", "1"):
            return True
        if low in ("no", "false", "0"):
            return False
        return None
    if spec.dtype == "numeric_pair":
        m = re.match(r"^(.+?)\s*-\s*(.+)$", text)
        if not m:
            return None

        def side(s: str):
            return None if s.strip().lower() == "unknown" else parse_number(s)

        lo, hi = side(m.group(1)), side(m.group(2))
        if lo is None and hi is None:
            return None
        return (lo, hi)
    # categorical: a short free token, quotes stripped
    return text.strip("'\"") or None


# ---------------------------------------------------------------------------
# strategy protocol and operations
# ---------------------------------------------------------------------------

class Strategy(Protocol):
    def classify(self, query: str) -> str: ...

    def extract(self, query: str, spec: ExtractorSpec) -> Any: ...


def classify_intent(query: str, strategy: Strategy) -> str:
    return canonical_intent(strategy.classify(query))


def extract_param(query: str, spec: ExtractorSpec, strategy: Strategy):
    raw = strategy.extract(query, spec)
    if raw is None or isinstance(raw, str):
        return gate_value(spec, raw)
    # strategies may return typed values directly; still enforce the dtype
    if spec.dtype == "numeric":
        return float(raw) if isinstance(raw, (int, float)) and not isinstance(raw, bool) else None
    if spec.dtype == "boolean":
        return raw if isinstance(raw, bool) else None
    if spec.dtype == "numeric_pair":
        return raw if isinstance(raw, tuple) else None
    return str(raw)


def extract_all(query: str, specs: Sequence[ExtractorSpec], strategy: Strategy) -> Extraction:
    if not specs:
        return Extraction(values={}, latencies={})
    values: dict[str, Any] = {}
    latencies: dict[str, float] = {}
    errors: list[str] = []
    for spec in specs:
        start = time.perf_counter()
        try:
            values[spec.param] = extract_param(query, spec, strategy)
        except ProviderUnavailable as exc:
            values[spec.param] = None
            errors.append(f"{spec.param}: {exc}")
        latencies[spec.param] = time.perf_counter() - start
    return Extraction(values=values, latencies=latencies, errors=errors)


# ---------------------------------------------------------------------------
# deterministic strategy
# ---------------------------------------------------------------------------

def _normalize_tokens(text: str) -> list[str]:
    tokens = re.findall(r"[a-z0-9_.]+", text.lower())
    out = []
    for tok in tokens:
        tok = tok.rstrip(".")
        if not tok:
            continue
        tok = _TOKEN_CANON.get(tok, tok)
        if len(tok) >= 4 and tok.endswith("s") and not tok.endswith("ss"):
            tok = tok[:-1]
        tok = _TOKEN_CANON.get(tok, tok)
        out.append(tok)
    return out


def _column_synonyms(name: str) -> list[str]:
    syns = [name.lower()]
    spaced = name.lower().replace("_", " ")
    if spaced != name.lower():
        syns.append(spaced)
    alpha_prefix = re.match(r"^([a-z]{4,})", name.lower())
    if alpha_prefix and alpha_prefix.group(1) != name.lower():
        syns.append(alpha_prefix.group(1))
    return syns


class DeterministicStrategy:
    """Nearest-template intent matching plus pattern-rule extraction.

    Intent: exact query match first (guaranteeing a perfect round trip on the
    prompt database itself), then token-set overlap against every database
    query with threshold theta.
    Params: "<column-or-synonym> ... <literal>" window rules plus bare
    category literals drawn from the column's distinct values.
    """

    def __init__(
        self,
        prompt_db: Sequence[PromptSample],
        meta: DatasetMetadata,
        table: DataTable | None = None,
        theta: float = 0.35,
    ):
        self.meta = meta
        self.theta = theta
        self.samples = list(prompt_db)
        self._exact = {}
        self._norm_exact = {}
        self._token_sets = []
        for sample in self.samples:
            key = sample.query.strip()
            self._exact.setdefault(key, sample.intent)
            toks = _normalize_tokens(sample.query)
            self._norm_exact.setdefault(" ".join(toks), sample.intent)
            self._token_sets.append((frozenset(toks), sample.intent))
        self._synonyms: dict[str, list[str]] = {}
        for col in meta.supported_covariates():
            self._synonyms[col.name] = _column_synonyms(col.name)
        for name in SYSTEM_PARAMS:
            self._synonyms[name] = list(_PARAM_SYNONYMS[name])
        self._category_values: dict[str, list[str]] = {}
        if table is not None:
            for col in meta.supported_covariates():
                if col.dtype == "categorical" and table.has_column(col.name):
                    self._category_values[col.name] = [
                        str(v)
                        for v in distinct_values(table, col.name)
                        if len(str(v)) >= 3 and str(v).lower() not in _STOPWORD_VALUES
                    ]

    # -- intent ------------------------------------------------------------

    def classify(self, query: str) -> str:
        key = query.strip()
        if key in self._exact:
            return self._exact[key]
        tokens = _normalize_tokens(query)
        norm = " ".join(tokens)
        if norm in self._norm_exact:
            return self._norm_exact[norm]
        qset = frozenset(tokens)
        if not qset:
            return "unknown"
        best_score, best_intent = 0.0, "unknown"
        for tset, intent in self._token_sets:
            union = len(qset | tset)
            if union == 0:
                continue
            score = len(qset & tset) / union
            if score > best_score:
                best_score, best_intent = score, intent
        if best_score >= self.theta:
            return best_intent
        return "unknown"

    # -- params ------------------------------------------------------------

    def extract(self, query: str, spec: ExtractorSpec) -> Any:
        tokens = self._raw_tokens(query)
        synonyms = self._synonyms.get(spec.param, _column_synonyms(spec.param))
        hit = self._find_synonym(tokens, synonyms)
        if spec.dtype == "numeric":
            if hit is None:
                return None
            return self._nearest_number(tokens, hit)
        if spec.dtype == "boolean":
            if hit is None:
                return None
            window = tokens[max(0, hit[0] - 3) : hit[1] + 4]
            if any(t in ("no", "without", "off", "false") for t in window):
                return False
            literal = self._nearest_literal(tokens, hit, ("yes", "no", "true", "false"))
            if literal is not None:
                return literal in ("yes", "true")
            if spec.param == "show_error":
                return True  # "with error bars" carries the value by presence
            return None
        if spec.dtype == "categorical":
            values = self._category_values.get(spec.param, [])
            if hit is not None:
                literal = self._nearest_value(tokens, hit, values)
                if literal is not None:
                    return literal
            for value in values:
                vtoks = self._raw_tokens(value)
                if vtoks and self._contains_seq(tokens, vtoks):
                    return value
            return None
        return None

    @staticmethod
    def _raw_tokens(text: str) -> list[str]:
        return [t for t in re.findall(r"[a-z0-9_.\-]+", text.lower()) if t.strip(".")]

    @staticmethod
    def _contains_seq(tokens: list[str], sub: list[str]) -> bool:
        k = len(sub)
        return any(tokens[i : i + k] == sub for i in range(len(tokens) - k + 1))

    def _find_synonym(self, tokens: list[str], synonyms: list[str]) -> tuple[int, int] | None:
        """(start, end) token span of the first synonym occurrence."""
        best = None
        for syn in synonyms:
            syn_tokens = self._raw_tokens(syn)
            k = len(syn_tokens)
            for i in range(len(tokens) - k + 1):
                if tokens[i : i + k] == syn_tokens:
                    if best is None or i < best[0]:
                        best = (i, i + k - 1)
                    break
        return best

    @staticmethod
    def _nearest_number(tokens: list[str], hit: tuple[int, int]) -> float | None:
        start, end = hit
        order = sorted(
            range(len(tokens)),
            key=lambda i: min(abs(i - start), abs(i - end)),
        )
        for i in order:
            if min(abs(i - start), abs(i - end)) > 4:
                break
            if i >= start and i <= end:
                continue
            value = parse_number(tokens[i])
            if value is not None:
                return value
        return None

    @staticmethod
    def _nearest_literal(tokens, hit, allowed) -> str | None:
        start, end = hit
        for offset in range(1, 5):
            for i in (end + offset, start - offset):
                if 0 <= i < len(tokens) and tokens[i] in allowed:
                    return tokens[i]
        return None

    def _nearest_value(self, tokens, hit, values) -> str | None:
        start, end = hit
        lowered = {v.lower(): v for v in values}
        for offset in range(1, 5):
            for i in (end + offset, start - offset):
                if 0 <= i < len(tokens) and tokens[i] in lowered:
                    return lowered[tokens[i]]
        return None


# ---------------------------------------------------------------------------
# few-shot strategy
# ---------------------------------------------------------------------------

def format_output_literal(value: Any, null_default: str = "") -> str:
    """Canonical prompt-facing rendering of a gold/extracted value."""
    if value is None:
        return null_default
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return str(value)


def sample_examples(
    prompt_db: Sequence[PromptSample], k: int, seed: int
) -> list[PromptSample]:
    """Deterministic intent-stratified sample of k examples."""
    import random

    groups: dict[str, list[PromptSample]] = {}
    for s in prompt_db:
        groups.setdefault(s.intent, []).append(s)
    rng = random.Random(seed)
    shuffled = {intent: rng.sample(items, len(items)) for intent, items in sorted(groups.items())}
    picked: list[PromptSample] = []
    idx = 0
    while len(picked) < min(k, len(prompt_db)):
        progressed = False
        for intent in sorted(shuffled):
            items = shuffled[intent]
            if idx < len(items):
                picked.append(items[idx])
                progressed = True
                if len(picked) >= min(k, len(prompt_db)):
                    break
        if not progressed:
            break
        idx += 1
    return picked


class FewShotStrategy:
    """Few-shot prompting through a chat-completion provider.

    All classifiers/extractors share the same example pool drawn from the
    centralized prompt database; outputs pass the same gates as any strategy.
    """

    def __init__(
        self,
        prompt_db: Sequence[PromptSample],
        provider,
        k_examples: int = 16,
        seed: int = 0,
    ):
        self.provider = provider
        self.examples = sample_examples(prompt_db, k_examples, seed)
        self.malformed = 0

    def _complete(self, prompt: str) -> str:
        from .providers import ChatMessage

        messages = [
            ChatMessage(role="system", content="Follow the task instruction exactly."),
            ChatMessage(role="user", content=prompt),
        ]
        return self.provider.complete(messages)

    def classify(self, query: str) -> str:
        blocks = [INTENT_INSTRUCTION, ""]
        for ex in self.examples:
            blocks.append(f"command: {ex.query}")
            blocks.append(ex.intent)
            blocks.append("")
        blocks.append(f"command: {query}")
        raw = self._complete("\n".join(blocks))
        label = canonical_intent(raw)
        if label == "unknown" and raw.strip() and raw.strip().lower() != "unknown":
            self.malformed += 1
        return label

    def extract(self, query: str, spec: ExtractorSpec) -> str | None:
        examples = []
        for ex in self.examples:
            value = ex.params.get(spec.param)
            examples.append(
                f"command: {ex.query}\n{format_output_literal(value, spec.null_default)}"
            )
        prompt = spec.init_text.replace("<examples>", "\n\n".join(examples))
        prompt += f"\n\ncommand: {query}\n"
        raw = self._complete(prompt)
        gated = gate_value(spec, raw)
        if gated is None and raw.strip() and raw.strip() != spec.null_default:
            if raw.strip().lower() != "unknown":
                self.malformed += 1
        return raw
