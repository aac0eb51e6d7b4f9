from __future__ import annotations

import json

import pytest

from prescribe.errors import NoSupportedColumns
from prescribe.genpipeline import (
    PROMPT_TUNING_HYPERPARAMS,
    generate_model_configs,
    generate_prompt_database,
    load_bundle,
    load_prompt_db,
    render_system_prompt,
    run_setup,
    split_training_files,
)
from prescribe.nlu import SYSTEM_PARAMS, extractor_specs

from tests.conftest import make_meta, make_table


@pytest.fixture(scope="module")
def db(bank):
    meta, table = bank
    return generate_prompt_database(meta, table, seed=0, target=100)


class TestPromptDatabase:
    def test_size_near_target(self, db):
        assert 90 <= len(db) <= 110

    def test_every_intent_covered(self, db):
        intents = {s.intent for s in db}
        assert {
            "select_features",
            "show_causal_effect",
            "run_optimize",
            "show_current_policy",
            "counterfactual",
        } <= intents

    def test_uniform_param_key_set(self, bank, db):
        meta, _ = bank
        expected = {c.name for c in meta.supported_covariates()} | set(SYSTEM_PARAMS)
        for sample in db:
            assert set(sample.params) == expected

    def test_action_outcome_template_instantiated(self, db):
        queries = [s.query for s in db]
        assert "How does CAMPAIGN affect CONVERSION?" in queries
        sample = next(s for s in db if s.query == "How does CAMPAIGN affect CONVERSION?")
        assert sample.intent == "show_causal_effect"
        assert all(v is None for v in sample.params.values())

    def test_what_if_template_carries_value_pair(self, db):
        what_ifs = [s for s in db if s.query.startswith("What if euribor3m is ")]
        assert what_ifs, "expected a what-if instantiation for euribor3m"
        for sample in what_ifs:
            assert sample.intent == "counterfactual"
            assert sample.params["euribor3m"] is not None
            literal = str(sample.params["euribor3m"]).rstrip("0").rstrip(".")
            assert literal in sample.query

    def test_deterministic_per_seed(self, bank):
        meta, table = bank
        a = generate_prompt_database(meta, table, seed=5, target=100)
        b = generate_prompt_database(meta, table, seed=5, target=100)
        c = generate_prompt_database(meta, table, seed=6, target=100)
        assert [(s.query, s.intent) for s in a] == [(s.query, s.intent) for s in b]
        assert [s.query for s in a] != [s.query for s in c]

    def test_unique_queries(self, db):
        queries = [s.query for s in db]
        assert len(queries) == len(set(queries))

    def test_no_supported_columns(self):
        table = make_table({"A": [0.0, 1.0], "Y": [0.0, 1.0], "X": [1.0, 2.0]})
        meta = make_meta(
            [("A", "numeric"), ("Y", "numeric"), ("X", "numeric")],
            action="A",
            outcome="Y",
            unsupported={"X"},
        )
        with pytest.raises(NoSupportedColumns):
            generate_prompt_database(meta, table, seed=0)


class TestTrainingFiles:
    def test_one_file_per_extractor_plus_intent(self, bank, db):
        meta, _ = bank
        specs = extractor_specs(meta)
        files = split_training_files(db, specs)
        assert set(files) == {s.param for s in specs} | {"intent"}
        for rows in files.values():
            assert len(rows) == len(db)

    def test_line_order_follows_db(self, bank, db):
        meta, _ = bank
        files = split_training_files(db, extractor_specs(meta))
        for i, sample in enumerate(db):
            assert files["intent"][i]["input"] == sample.query
            assert files["intent"][i]["output"] == sample.intent

    def test_absent_numeric_uses_sentinel(self, bank, db):
        meta, _ = bank
        files = split_training_files(db, extractor_specs(meta))
        sample_idx = next(
            i for i, s in enumerate(db) if s.params["euribor3m"] is None
        )
        assert files["euribor3m"][sample_idx]["output"] == "-1"

    def test_intent_line_for_canonical_query(self, bank, db):
        meta, _ = bank
        files = split_training_files(db, extractor_specs(meta))
        idx = next(i for i, s in enumerate(db) if s.query == "Show the causal effect")
        assert files["intent"][idx]["output"] == "show_causal_effect"


class TestModelConfigs:
    def test_one_config_per_extractor_plus_intent(self, bank):
        meta, _ = bank
        specs = extractor_specs(meta)
        configs = generate_model_configs(specs, meta)
        assert len(configs) == len(specs) + 1
        params = [c.param for c in configs]
        assert "intent" in params and "euribor3m" in params

    def test_hyperparams_exact(self, bank):
        meta, _ = bank
        for config in generate_model_configs(extractor_specs(meta), meta):
            assert config.hyperparams == {
                "gradient_accumulation_steps": 16,
                "learning_rate": 0.3,
                "num_virtual_tokens": 500,
            }
            assert config.init_method == "text"
        assert PROMPT_TUNING_HYPERPARAMS["num_virtual_tokens"] == 500

    def test_init_texts(self, bank):
        meta, _ = bank
        configs = {c.param: c for c in generate_model_configs(extractor_specs(meta), meta)}
        assert 'extract out the value of "euribor3m"' in configs["euribor3m"].init_text
        assert "output -1" in configs["euribor3m"].init_text
        assert "Classify command as one of following API calls." in configs["intent"].init_text


class TestSystemPrompt:
    def test_substitutions(self, bank):
        meta, _ = bank
        prompt = render_system_prompt(meta).text
        assert "Action variable is CAMPAIGN." in prompt
        assert "Outcome is CONVERSION." in prompt
        assert "using a Bank Marketing dataset" in prompt

    def test_intent_names_present(self, bank):
        meta, _ = bank
        prompt = render_system_prompt(meta).text
        for name in ("select_features", "show_causal_effect", "run_opt", "show_base_policy", "counterfactual"):
            assert name in prompt

    def test_no_unsubstituted_braces(self, bank):
        meta, _ = bank
        assert "{" not in render_system_prompt(meta).text


class TestRunSetup:
    def test_bundle_layout_and_determinism(self, bank, tmp_path):
        meta, table = bank
        bundle_a = run_setup(meta, table, seed=3, out_dir=tmp_path / "a")
        bundle_b = run_setup(meta, table, seed=3, out_dir=tmp_path / "b")
        assert bundle_a.digest() == bundle_b.digest()
        assert bundle_a.prompt_db_path.exists()
        assert len(bundle_a.config_paths) >= 5

    def test_seed_changes_db_not_system_prompt(self, bank, tmp_path):
        meta, table = bank
        a = run_setup(meta, table, seed=1, out_dir=tmp_path / "a")
        b = run_setup(meta, table, seed=2, out_dir=tmp_path / "b")
        assert a.prompt_db_path.read_bytes() != b.prompt_db_path.read_bytes()
        assert a.system_prompt_path.read_bytes() == b.system_prompt_path.read_bytes()

    def test_prompt_db_jsonl_round_trip(self, bank, tmp_path):
        meta, table = bank
        bundle = run_setup(meta, table, seed=0, out_dir=tmp_path / "bundle")
        db = load_prompt_db(bundle.prompt_db_path)
        again = generate_prompt_database(meta, table, seed=0)
        assert [(s.query, s.intent) for s in db] == [(s.query, s.intent) for s in again]
        for x, y in zip(db, again):
            assert x.params == y.params

    def test_jsonl_schema(self, bank, tmp_path):
        meta, table = bank
        bundle = run_setup(meta, table, seed=0, out_dir=tmp_path / "bundle")
        first = json.loads(bundle.prompt_db_path.read_text().splitlines()[0])
        assert set(first) == {"query", "labels"}
        assert set(first["labels"]) == {"intent", "params"}
        train_first = json.loads(
            (bundle.out_dir / "train" / "intent.jsonl").read_text().splitlines()[0]
        )
        assert set(train_first) == {"input", "output"}

    def test_load_bundle(self, bank, tmp_path):
        meta, table = bank
        run_setup(meta, table, seed=0, out_dir=tmp_path / "bundle")
        loaded_meta, db, system_prompt = load_bundle(tmp_path / "bundle")
        assert loaded_meta.action_column == meta.action_column
        assert len(db) >= 90
        assert "PrecAIse" in system_prompt
