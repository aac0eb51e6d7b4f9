"""Acceptance suite: one test per release criterion, with pinned tolerances
and runtime budgets. Run with `pytest tests/test_acceptance.py -s` to see one
PASS line per criterion."""

from __future__ import annotations

import json
import random
import socket
import time

import pytest

from prescribe.agent import Session
from prescribe.causal import effect_curve
from prescribe.charts import numeric_tokens
from prescribe.evaluation import evaluate_intent, metrics_from_predictions, perturb_queries
from prescribe.evaluation import LabeledQuery
from prescribe.genpipeline import generate_prompt_database, render_system_prompt
from prescribe.nlu import DeterministicStrategy, extractor_specs
from prescribe.policy import learn_policy
from prescribe.providers import ScriptedProvider, ScriptRule
from prescribe.tools import ExecutionContext

from tests.conftest import brute_standardized
from tests.test_causal import confounded_fixture, linear_fixture
from tests.test_policy import oracle_optimum, random_instance

INTENTS_5 = [
    "select_features",
    "show_causal_effect",
    "run_optimize",
    "show_current_policy",
    "counterfactual",
]


def report(name: str, detail: str = ""):
    print(f"PASS: {name}" + (f" ({detail})" if detail else ""))


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_metric_fidelity():
    with Timer() as t:
        rng = random.Random(0)
        golds = [INTENTS_5[i % 5] for i in range(238)]
        preds = list(golds)
        for i in rng.sample(range(238), 12):
            preds[i] = INTENTS_5[(INTENTS_5.index(golds[i]) + 1) % 5]
        fixture_report = metrics_from_predictions(golds, preds, [0.0] * 238, "fixture")
        assert fixture_report.accuracy_display == "0.95 (226/238)"

        for trial in range(100):
            trial_rng = random.Random(trial)
            n = trial_rng.randint(20, 150)
            g = [trial_rng.choice(INTENTS_5 + ["unknown"]) for _ in range(n)]
            p = [trial_rng.choice(INTENTS_5 + ["unknown"]) for _ in range(n)]
            r = metrics_from_predictions(g, p, [0.0] * n, "rand")
            trace = sum(r.confusion[i][i] for i in range(len(r.confusion_labels)))
            assert r.accuracy == trace / n  # exact identity
            for i, label in enumerate(r.confusion_labels):
                assert sum(r.confusion[i]) == g.count(label)  # exact row sums
    assert t.elapsed < 1.0, f"runtime {t.elapsed:.2f}s exceeds 1s"
    report("metric fidelity", f"0.95 (226/238); 100 random matrices exact; {t.elapsed:.2f}s")


def test_nlu_round_trip(bank):
    meta, table = bank
    with Timer() as t:
        db = generate_prompt_database(meta, table, seed=0, target=100)
        assert 90 <= len(db) <= 110
        strategy = DeterministicStrategy(db, meta, table)

        own = [LabeledQuery(query=s.query, gold=s) for s in db]
        own_report = evaluate_intent(strategy, own, label="round-trip")
        assert own_report.accuracy == 1.0

        accuracies = []
        for _ in range(2):  # deterministic across runs
            testset = perturb_queries(db, seed=0, n_target=238)
            perturbed_report = evaluate_intent(
                DeterministicStrategy(db, meta, table), testset, label="perturbed"
            )
            accuracies.append(perturbed_report.accuracy)
        assert accuracies[0] == accuracies[1]
        assert accuracies[0] >= 0.90
    assert t.elapsed < 10.0, f"runtime {t.elapsed:.2f}s exceeds 10s"
    report(
        "NLU round-trip",
        f"db accuracy 1.000; perturbed {accuracies[0]:.3f} >= 0.90; {t.elapsed:.2f}s",
    )


def test_effect_recovery():
    with Timer() as t:
        meta, table = linear_fixture(n=2000, seed=7)
        est = effect_curve(table, meta, ["X1"])
        assert abs(est.contrast(1.0, 0.0) - 2.0) < 1e-9
        assert abs(est.contrast(2.0, 1.0) - 2.0) < 1e-9

        cmeta, ctable = confounded_fixture(n=5000)
        raw = effect_curve(ctable, cmeta, [])
        adjusted = effect_curve(ctable, cmeta, ["X1"])
        raw_contrast = raw.contrast(1.0, 0.0)
        adj_contrast = adjusted.contrast(1.0, 0.0)
        assert raw_contrast >= 0.2
        assert -0.05 <= adj_contrast <= 0.05

        rows = [
            {"A": a, "Y": y, "X1": x}
            for a, y, x in zip(ctable.column("A"), ctable.column("Y"), ctable.column("X1"))
        ]
        oracle = brute_standardized(rows, "A", "Y", ["X1"])
        for level, value in zip(adjusted.action_levels, adjusted.estimates):
            assert value == pytest.approx(oracle[level], abs=1e-12)
    assert t.elapsed < 5.0, f"runtime {t.elapsed:.2f}s exceeds 5s"
    report(
        "effect recovery",
        f"unit contrast 2.0 exact; adjusted {adj_contrast:+.4f} in [-0.05, 0.05], "
        f"raw {raw_contrast:.3f} >= 0.2; {t.elapsed:.2f}s",
    )


def test_policy_oracle_equivalence():
    with Timer() as t:
        for seed in range(50):
            meta, table, rows, features, budget, num_rules = random_instance(1000 + seed)
            result = learn_policy(table, meta, features, num_rules, budget, seed=0)
            expected = oracle_optimum(rows, features, budget, num_rules)
            assert result.projected_kpi == pytest.approx(expected, abs=1e-9), f"seed {seed}"
            assert result.budget_used <= budget + 1e-9, f"budget violated at seed {seed}"
    assert t.elapsed < 30.0, f"runtime {t.elapsed:.2f}s exceeds 30s"
    report("policy oracle equivalence", f"50/50 instances exact; {t.elapsed:.2f}s")


def test_budget_monotonicity(bank):
    meta, table = bank
    max_cost = max(table.column("CAMPAIGN"))
    kpis = []
    for budget in (0.5, 1.0, 2.0, 3.0, max_cost):
        result = learn_policy(
            table, meta, ["job", "euribor3m", "age", "housing"], 4, budget, seed=0
        )
        assert result.budget_used <= budget + 1e-9
        kpis.append(result.projected_kpi)
    assert all(b >= a - 1e-9 for a, b in zip(kpis, kpis[1:])), kpis
    report("budget monotonicity", " -> ".join(f"{k:.4f}" for k in kpis))


def test_setup_determinism(bank, tmp_path):
    from click.testing import CliRunner

    from prescribe.cli import cli
    from prescribe.fixtures import demo_dataset

    demo_dataset(tmp_path / "data", n=600, seed=11)
    runner = CliRunner()
    digests = []
    for name in ("a", "b"):
        result = runner.invoke(
            cli,
            [
                "setup",
                "--meta",
                str(tmp_path / "data" / "bank_meta.json"),
                "--out",
                str(tmp_path / name),
                "--seed",
                "5",
                "--skip-feature-selection",
                "--format",
                "json",
            ],
        )
        assert result.exit_code == 0, result.output
        digests.append(json.loads(result.output[result.output.index("{") :])["digest"])
    assert digests[0] == digests[1]

    db_lines = (tmp_path / "a" / "prompt_db.jsonl").read_text().splitlines()
    intents = {json.loads(line)["labels"]["intent"] for line in db_lines}
    assert set(INTENTS_5) <= intents  # >= 1 sample per intent

    config = json.loads((tmp_path / "a" / "configs" / "intent.json").read_text())
    assert config["hyperparams"] == {
        "gradient_accumulation_steps": 16,
        "learning_rate": 0.3,
        "num_virtual_tokens": 500,
    }
    report("setup determinism", f"digest {digests[0][:12]}..; hyperparams exact")


def test_flow_conformance(tmp_path, monkeypatch):
    from prescribe.demo import run_demo

    # the walkthrough must run with zero network access
    def deny(*args, **kwargs):
        raise AssertionError("network access attempted during demo")

    monkeypatch.setattr(socket.socket, "connect", deny)

    with Timer() as t:
        artifacts = run_demo(tmp_path / "demo", n=900, seed=11)
    assert t.elapsed < 60.0, f"runtime {t.elapsed:.2f}s exceeds 60s"

    turns = artifacts.turns
    events = artifacts.events

    # 1. capabilities reply: unknown intent, no dispatch
    assert turns[0].intent == "unknown" and turns[0].job is None
    assert "features" in turns[0].reply.lower()

    # 2. select_features: ack then result
    assert turns[1].intent == "select_features" and turns[1].job is not None
    started = [e for e in events if e["type"] == "tool_started"]
    results = [e for e in events if e["type"] == "tool_result"]
    assert [e["payload"]["tool"] for e in started] == [
        "select_features",
        "counterfactual",
        "show_current_policy",
        "run_optimize",
    ]
    assert [e["payload"]["tool"] for e in results] == [
        "select_features",
        "counterfactual",
        "show_current_policy",
        "run_optimize",
    ]
    for s, r in zip(started, results):
        assert s["payload"]["job"] == r["payload"]["job"]

    # 3. conditioned counterfactual populated the euribor3m condition
    assert turns[2].intent == "counterfactual"
    assert turns[2].conditions_snapshot["euribor3m"] == 4.964

    # 4. current policy snapshot
    assert turns[3].intent == "show_current_policy"

    # 5-7. optimizer follow-ups then execution at 3.5 with a tree chart
    assert turns[4].intent == "run_optimize"
    assert turns[4].missing == ["num_rules", "average_budget"]
    assert turns[5].missing == ["average_budget"]
    assert turns[6].missing == [] and turns[6].job is not None
    opt_started = started[-1]["payload"]
    assert opt_started["params"]["num_rules"] == 4.0
    assert opt_started["params"]["average_budget"] == 3.5
    final_charts = results[-1]["payload"]["charts"]
    assert [c["kind"] for c in final_charts] == ["bar", "tree"]
    report("flow conformance", f"{len(events)} events, no network; {t.elapsed:.2f}s")


def test_memory_bound(bank):
    meta, table = bank
    db = generate_prompt_database(meta, table, seed=0, target=100)
    captured: list[list] = []

    class Capture:
        def complete(self, messages):
            captured.append(list(messages))
            return "ok"

    session = Session(
        ctx=ExecutionContext(meta=meta, table=table, seed=0, folds=3),
        specs=extractor_specs(meta),
        strategy=DeterministicStrategy(db, meta, table),
        provider=Capture(),
        system_prompt=render_system_prompt(meta).text,
        k=2,
    )
    rng = random.Random(3)
    phrases = [
        "hello there",
        "tell me a joke",
        "who are you",
        "whats new",
        "good morning",
    ]
    for i in range(50):
        history = len(session.chat.turns)
        session.handle_query(rng.choice(phrases) + f" #{i}")
        prompt = captured[-1]
        user_count = sum(1 for m in prompt if m.role == "user")
        agent_count = sum(1 for m in prompt if m.role == "agent")
        assert agent_count == min(2, history)  # exactly the retained exchanges
        assert user_count == min(2, history) + 1  # plus the live turn
        assert len(session.chat.turns) <= 2
    report("memory bound", "50 random turns, retained <= 2, prompt window exact")


def test_groundedness_audit(bank):
    meta, table = bank
    db = generate_prompt_database(meta, table, seed=0, target=100)
    liar = ScriptedProvider(
        [
            ScriptRule("the result is", "Fantastic! You hit 87654321 conversions, a 42% jump!"),
            ScriptRule("missing parameters", "Sure - also, profits rose 42% yesterday!"),
            ScriptRule("", "Did you know 87654321 customers love this? 42% do!"),
        ]
    )
    transcript: list[str] = []

    def sink(kind, payload):
        if kind in ("agent_message", "tool_result"):
            transcript.append(payload.get("text") or payload.get("reply") or "")

    session = Session(
        ctx=ExecutionContext(meta=meta, table=table, seed=0, folds=3),
        specs=extractor_specs(meta),
        strategy=DeterministicStrategy(db, meta, table),
        provider=liar,
        system_prompt=render_system_prompt(meta).text,
        event_sink=sink,
    )

    present_result_replies = 0
    queries = [
        "What is the current policy?",
        "What if euribor3m is 4.964?",
        "Show the causal effect",
        "What are the most important features?",
    ]
    session.set_condition("num_rules", 3)
    session.set_condition("average_budget", 2.0)
    queries.append("Optimize the policy")
    for query in queries:
        turn = session.handle_query(query)
        if turn.intent != "unknown" and not turn.missing:
            present_result_replies += 1
    assert present_result_replies == 5

    # 100% of result replies engaged the fallback; no fabricated numerals anywhere
    joined = "\n".join(transcript)
    assert "87654321" not in joined
    assert "42" not in joined
    audited = [r for r in transcript if r.startswith("Here is the result:")]
    assert len(audited) == 5
    for reply, (name, result) in zip(audited, session.last_results.items()):
        assert numeric_tokens(reply), "grounded template should carry real numbers"
    for name, result in session.last_results.items():
        allowed = result.allowed_numeric_tokens()
        matching = [r for r in audited if numeric_tokens(r) <= allowed]
        assert matching, f"no audited reply grounded in {name} result"
    report("groundedness audit", "5/5 result replies grounded, 0 fabricated numerals")
