"""Scripted end-to-end walkthrough on the synthetic bank-style fixture.

Runs the canonical conversation offline: capabilities question, feature
selection (ack then result), a conditioned counterfactual that populates the
euribor3m condition, the current-policy snapshot, then the optimizer with two
follow-ups (num_rules, then average_budget) before executing at budget 3.5
and emitting the policy tree. No network access anywhere; conversational
turns come from a scripted provider and result presentations from the
deterministic template path.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agent import AgentTurnResult, Session
from .fixtures import demo_dataset
from .genpipeline import SetupBundle, generate_prompt_database, render_system_prompt, run_setup
from .nlu import DeterministicStrategy, extractor_specs
from .providers import ScriptedProvider, ScriptRule
from .tools import ExecutionContext
from .transcript import render_transcript_html

DEMO_SCRIPT_RULES = [
    {
        "match": "missing parameters: [num_rules, average_budget]",
        "respond": "Happy to help optimize! Could you give me num_rules and average_budget?",
    },
    {
        "match": "missing parameters: [average_budget]",
        "respond": "Almost there. What average budget per client should I plan for?",
    },
    {
        "match": "Covariate selection tool",
        "respond": "On it! Feature selection can take a little while, so I'm running it in the background.",
    },
    {
        "match": "running a tool",
        "respond": "Working on it! The tool is running in the background and I'll report back.",
    },
    {
        "match": "what can you do",
        "respond": (
            "I can show your current policy and KPIs, select the most important "
            "features, plot causal effects, explore what-if conditions, and "
            "optimize your strategy under a budget. A good place to start is "
            "asking for the most important features."
        ),
    },
]

DEMO_TURNS = [
    "What can you do?",
    "What are the most important features?",
    "What if euribor3m is 4.964?",
    "What is the current policy?",
    "Can you optimize my strategy?",
    "Use 4 rules",
    "Set the average budget to 3.5",
]


@dataclass
class DemoArtifacts:
    out_dir: Path
    bundle: SetupBundle
    script_path: Path
    transcript_path: Path
    events_path: Path
    events: list[dict] = field(default_factory=list)
    turns: list[AgentTurnResult] = field(default_factory=list)


def write_demo_script(path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rule in DEMO_SCRIPT_RULES:
            fh.write(json.dumps(rule) + "\n")
    return path


def run_demo(out_dir: str | Path, n: int = 2000, seed: int = 11) -> DemoArtifacts:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    meta, table = demo_dataset(out / "data", n=n, seed=seed)
    bundle = run_setup(meta, table, seed=seed, out_dir=out / "bundle")
    script_path = write_demo_script(out / "script.jsonl")
    provider = ScriptedProvider([ScriptRule(r["match"], r["respond"]) for r in DEMO_SCRIPT_RULES])

    db = generate_prompt_database(meta, table, seed=seed)
    strategy = DeterministicStrategy(db, meta, table)

    log: list[dict] = []

    def sink(kind: str, payload: dict) -> None:
        log.append({"type": kind, "payload": payload})

    session = Session(
        ctx=ExecutionContext(meta=meta, table=table, seed=seed, folds=5),
        specs=extractor_specs(meta),
        strategy=strategy,
        provider=provider,
        system_prompt=render_system_prompt(meta).text,
        event_sink=sink,
    )

    turns: list[AgentTurnResult] = []
    with ThreadPoolExecutor(max_workers=2) as pool:
        for text in DEMO_TURNS:
            log.append({"type": "user_message", "payload": {"text": text}})
            turn = session.handle_query(text, executor=pool)
            turns.append(turn)
            session.wait_idle(timeout=120)

    transcript_path = out / "transcript.html"
    transcript_path.write_text(
        render_transcript_html(log, title=f"{meta.title} walkthrough"), encoding="utf-8"
    )
    events_path = out / "events.json"
    events_path.write_text(json.dumps(log, indent=2, default=str), encoding="utf-8")

    return DemoArtifacts(
        out_dir=out,
        bundle=bundle,
        script_path=script_path,
        transcript_path=transcript_path,
        events_path=events_path,
        events=log,
        turns=turns,
    )
