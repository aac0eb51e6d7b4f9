"""Automated domain-adaptation pipeline.

From a dataset plus metadata this produces everything the NLU layer needs for
a new domain: the centralized prompt database of (query, multilabel) samples,
per-extractor training files, model configuration files for an external
prompt-tuning service, and the rendered system prompt. Execution of any
tuning is out of scope; the emitted files are the integration point.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dataset import DataTable, DatasetMetadata, distinct_values
from .errors import NoSupportedColumns
from .nlu import (
    INTENT_INSTRUCTION,
    SYSTEM_PARAMS,
    ExtractorSpec,
    PromptSample,
    extractor_specs,
    format_output_literal,
)

DEFAULT_TARGET = 100

BASE_MODEL = "google/flan-t5-xl"
PROMPT_TUNING_HYPERPARAMS = {
    "gradient_accumulation_steps": 16,
    "learning_rate": 0.3,
    "num_virtual_tokens": 500,
}

SYSTEM_PROMPT_TEMPLATE = """You are a friendly and cheery AI agent named PrecAIse, pronounced `Precise'.
Your job is to assist analysts to determine the optimal policy.
You were built with a goal to help business users make better decisions by
leveraging the power of AI.

You are working with prescriptive policy models using a {TITLE} dataset.
Action variable is {ACTION}.
Outcome is {OUTCOME}.

Based on every user's query, you identify their intent from the following:
- select_features
- show_causal_effect
- run_opt
- show_base_policy
- counterfactual

The key functionalities that you currently support include
- selecting the important features for treatment effect estimation
- quantifying the treatment effect
- quantifying the treatment effect conditioned on covariate values
- generating a set of optimized policies
- evaluating the KPIs
- and predicting counterfactual scenarios.

When a user query can be mapped to one of the existing functionalities
with necessary parameters, reply with enthusiasm that you are happy to
assist the user and you are working on the query.

You are harmless and refrain from generating content involving any form
of bias, violence, discrimination or inappropriate content.
Do not say anything outside the field of the dataset and
prescriptive analysis and do not start a conversation off topic to causal
inference.

If prompted off topic or given a silly request, kindly redirect user
back to the task at hand.
If the user is asking for a tool to be used, tell them you're happy to
help with that. Always keep responses as short (under 50 words) and
concise as possible and only expand when prompted.
Do not make up information."""

# Fixed domain-agnostic seed samples, a handful per intent. Off-topic lines
# teach the unknown label.
DOMAIN_AGNOSTIC_SAMPLES: tuple[tuple[str, str], ...] = (
    ("What are the most important features?", "select_features"),
    ("Which features matter most for the outcome?", "select_features"),
    ("Run feature selection", "select_features"),
    ("Which covariates should I pay attention to?", "select_features"),
    ("Find the features that drive the outcome", "select_features"),
    ("What is the best action?", "show_causal_effect"),
    ("Show the causal effect", "show_causal_effect"),
    ("How effective is the action on average?", "show_causal_effect"),
    ("What does the effect curve look like?", "show_causal_effect"),
    ("Show me the average treatment effect", "show_causal_effect"),
    ("Can you optimize my strategy?", "run_optimize"),
    ("Optimize the policy", "run_optimize"),
    ("Find the best policy for my budget", "run_optimize"),
    ("Help me improve my strategy", "run_optimize"),
    ("Run the optimizer", "run_optimize"),
    ("What is the current policy?", "show_current_policy"),
    ("Show the base policy", "show_current_policy"),
    ("What does our strategy look like today?", "show_current_policy"),
    ("How are we doing right now?", "show_current_policy"),
    ("What KPI does the current policy achieve?", "show_current_policy"),
    ("Predict the counterfactual outcome", "counterfactual"),
    ("What would happen under different conditions?", "counterfactual"),
    ("Run a what-if analysis", "counterfactual"),
    ("Show me a counterfactual scenario", "counterfactual"),
    ("What's the weather like today?", "unknown"),
    ("Tell me a joke", "unknown"),
    ("Who won the game last night?", "unknown"),
)

# Domain-specific templates. Slots: [ACTION], [OUTCOME] from metadata;
# [COLUMN]/[VALUE] cycle through supported columns and their distinct values
# (the multilabel then carries that column: value pair); [NUM_RULES] and
# [BUDGET] feed the system-parameter extractors.
DOMAIN_TEMPLATES: tuple[tuple[str, str, str], ...] = (
    ("How does [ACTION] affect [OUTCOME]?", "show_causal_effect", ""),
    ("What if [COLUMN] is [VALUE]?", "counterfactual", "cv"),
    ("Is [COLUMN] an important variable?", "select_features", ""),
    ("Does [ACTION] improve [OUTCOME]?", "show_causal_effect", ""),
    ("What happens to [OUTCOME] when [COLUMN] is [VALUE]?", "counterfactual", "cv"),
    ("Show the effect of [ACTION] on [OUTCOME]", "show_causal_effect", ""),
    ("Show the causal effect when [COLUMN] is [VALUE]", "counterfactual", "cv"),
    ("Suppose [COLUMN] is [VALUE], what should we expect?", "counterfactual", "cv"),
    ("Is [COLUMN] relevant for [OUTCOME]?", "select_features", ""),
    ("What drives [OUTCOME]?", "select_features", ""),
    ("What is the current [ACTION] strategy?", "show_current_policy", ""),
    ("What [OUTCOME] rate does the current policy achieve?", "show_current_policy", ""),
    ("Optimize [ACTION] with [NUM_RULES] rules and an average budget of [BUDGET]", "run_optimize", "rb"),
    ("Optimize with [NUM_RULES] rules", "run_optimize", "r"),
    ("Use [NUM_RULES] rules", "run_optimize", "r"),
    ("Set the average budget to [BUDGET]", "run_optimize", "b"),
    ("Use an average budget of [BUDGET]", "run_optimize", "b"),
    ("Optimize [ACTION] under a budget of [BUDGET] per row", "run_optimize", "b"),
    ("Show the causal effect with error bars", "show_causal_effect", "e"),
    ("How does [ACTION] affect [OUTCOME]? Include error bars", "show_causal_effect", "e"),
)


@dataclass
class ModelConfig:
    param: str
    dtype: str
    init_text: str
    base_model: str = BASE_MODEL
    init_method: str = "text"
    hyperparams: dict = field(default_factory=lambda: dict(PROMPT_TUNING_HYPERPARAMS))

    def to_dict(self) -> dict:
        return {
            "param": self.param,
            "dtype": self.dtype,
            "base_model": self.base_model,
            "init_method": self.init_method,
            "init_text": self.init_text,
            "hyperparams": dict(self.hyperparams),
        }


@dataclass
class SystemPrompt:
    text: str


@dataclass
class SetupBundle:
    out_dir: Path
    prompt_db_path: Path
    training_paths: dict[str, Path]
    config_paths: dict[str, Path]
    system_prompt_path: Path
    metadata_path: Path

    def all_paths(self) -> list[Path]:
        return sorted(
            [self.prompt_db_path, self.system_prompt_path, self.metadata_path]
            + list(self.training_paths.values())
            + list(self.config_paths.values())
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for path in self.all_paths():
            h.update(str(path.relative_to(self.out_dir)).encode())
            h.update(path.read_bytes())
        return h.hexdigest()


def _param_keys(meta: DatasetMetadata) -> list[str]:
    return [c.name for c in meta.supported_covariates()] + list(SYSTEM_PARAMS)


def _value_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return str(value)


def generate_prompt_database(
    meta: DatasetMetadata,
    table: DataTable,
    seed: int = 0,
    target: int = DEFAULT_TARGET,
) -> list[PromptSample]:
    """Union of fixed domain-agnostic samples and seeded template instances.

    Every sample's multilabel covers the identical param key set (supported
    columns plus system params); instantiated [COLUMN]=[VALUE] pairs update it.
    """
    covariates = meta.supported_covariates()
    if not covariates:
        raise NoSupportedColumns("no supported covariates to build extractors for")
    keys = _param_keys(meta)

    def blank_params() -> dict[str, Any]:
        return {k: None for k in keys}

    samples: list[PromptSample] = []
    seen_queries: set[str] = set()

    def add(query: str, intent: str, params: dict[str, Any]):
        if query in seen_queries:
            return
        seen_queries.add(query)
        samples.append(PromptSample(query=query, intent=intent, params=params))

    for query, intent in DOMAIN_AGNOSTIC_SAMPLES:
        add(query, intent, blank_params())

    rng = random.Random(seed)
    values_by_column: dict[str, list] = {}
    for col in covariates:
        vals = distinct_values(table, col.name, limit=8)
        rng.shuffle(vals)
        values_by_column[col.name] = vals
    col_cycle = [c.name for c in covariates]
    rng.shuffle(col_cycle)

    col_i = 0
    val_i: dict[str, int] = {c: 0 for c in col_cycle}
    attempts = 0
    while len(samples) < target and attempts < 40 * target:
        attempts += 1
        template, intent, slot = DOMAIN_TEMPLATES[attempts % len(DOMAIN_TEMPLATES)]
        params = blank_params()
        query = template.replace("[ACTION]", meta.action_column).replace(
            "[OUTCOME]", meta.outcome_column
        )
        if "[COLUMN]" in query:
            column = col_cycle[col_i % len(col_cycle)]
            col_i += 1
            values = values_by_column[column]
            if not values:
                continue
            value = values[val_i[column] % len(values)]
            val_i[column] += 1
            query = query.replace("[COLUMN]", column)
            if "[VALUE]" in query:
                query = query.replace("[VALUE]", _value_literal(value))
                if slot == "cv":
                    params[column] = value
        if "r" in slot:
            rules = rng.randint(2, 8)
            query = query.replace("[NUM_RULES]", str(rules))
            params["num_rules"] = float(rules)
        if "b" in slot:
            budget = round(rng.uniform(0.5, 5.0), 1)
            query = query.replace("[BUDGET]", _value_literal(budget))
            params["average_budget"] = budget
        if slot == "e":
            params["show_error"] = True
        add(query, intent, params)

    return samples


def split_training_files(
    db: list[PromptSample], specs: list[ExtractorSpec]
) -> dict[str, list[dict]]:
    """Per-extractor (input, output) files plus the intent file; line i of
    every file corresponds to db[i]."""
    files: dict[str, list[dict]] = {}
    for spec in specs:
        files[spec.param] = [
            {
                "input": s.query,
                "output": format_output_literal(s.params.get(spec.param), spec.null_default),
            }
            for s in db
        ]
    files["intent"] = [{"input": s.query, "output": s.intent} for s in db]
    return files


def generate_model_configs(specs: list[ExtractorSpec], meta: DatasetMetadata) -> list[ModelConfig]:
    configs = [
        ModelConfig(param=spec.param, dtype=spec.dtype, init_text=spec.init_text)
        for spec in specs
    ]
    configs.append(ModelConfig(param="intent", dtype="categorical", init_text=INTENT_INSTRUCTION))
    return configs


def render_system_prompt(meta: DatasetMetadata) -> SystemPrompt:
    text = SYSTEM_PROMPT_TEMPLATE.format(
        TITLE=meta.title, ACTION=meta.action_column, OUTCOME=meta.outcome_column
    )
    return SystemPrompt(text=text)


def prompt_db_to_jsonl(db: list[PromptSample]) -> str:
    lines = []
    for s in db:
        doc = {"query": s.query, "labels": {"intent": s.intent, "params": s.params}}
        lines.append(json.dumps(doc, sort_keys=True))
    return "\n".join(lines) + "\n"


def load_prompt_db(path: str | Path) -> list[PromptSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            samples.append(
                PromptSample(
                    query=doc["query"],
                    intent=doc["labels"]["intent"],
                    params=doc["labels"]["params"],
                )
            )
    return samples


def run_setup(
    meta: DatasetMetadata,
    table: DataTable,
    seed: int = 0,
    out_dir: str | Path = "bundle",
    target: int = DEFAULT_TARGET,
) -> SetupBundle:
    """Write the full bundle; byte-identical for identical (inputs, seed)."""
    out = Path(out_dir)
    (out / "train").mkdir(parents=True, exist_ok=True)
    (out / "configs").mkdir(parents=True, exist_ok=True)

    db = generate_prompt_database(meta, table, seed=seed, target=target)
    specs = extractor_specs(meta)

    prompt_db_path = out / "prompt_db.jsonl"
    prompt_db_path.write_text(prompt_db_to_jsonl(db), encoding="utf-8")

    training_paths: dict[str, Path] = {}
    for param, rows in split_training_files(db, specs).items():
        path = out / "train" / f"{param}.jsonl"
        path.write_text(
            "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n", encoding="utf-8"
        )
        training_paths[param] = path

    config_paths: dict[str, Path] = {}
    for config in generate_model_configs(specs, meta):
        path = out / "configs" / f"{config.param}.json"
        path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        config_paths[config.param] = path

    system_prompt_path = out / "system_prompt.txt"
    system_prompt_path.write_text(render_system_prompt(meta).text, encoding="utf-8")

    metadata_path = out / "metadata.json"
    metadata_path.write_text(
        json.dumps(meta.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    return SetupBundle(
        out_dir=out,
        prompt_db_path=prompt_db_path,
        training_paths=training_paths,
        config_paths=config_paths,
        system_prompt_path=system_prompt_path,
        metadata_path=metadata_path,
    )


def load_bundle(bundle_dir: str | Path) -> tuple[DatasetMetadata, list[PromptSample], str]:
    """Read back (metadata, prompt database, system prompt) from a bundle."""
    from .dataset import load_metadata

    bundle = Path(bundle_dir)
    meta = load_metadata(bundle / "metadata.json")
    db = load_prompt_db(bundle / "prompt_db.jsonl")
    system_prompt = (bundle / "system_prompt.txt").read_text(encoding="utf-8")
    return meta, db, system_prompt
