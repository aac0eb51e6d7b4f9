"""Operator entry points: setup, serve, eval, ask, demo.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import PrescribeError


@click.group()
def cli():
    """Conversational prescriptive-analytics agent."""


@cli.command()
@click.option("--meta", "meta_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--target-count", default=100, show_default=True, type=int)
@click.option("--skip-feature-selection", is_flag=True, default=False)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def setup(meta_path, data_path, out_dir, seed, target_count, skip_feature_selection, fmt):
    """Run the generalization pipeline: emit prompt db, training files,
    model configs, and the system prompt."""
    from .causal import select_features
    from .dataset import load_metadata, load_table
    from .genpipeline import run_setup

    meta = load_metadata(meta_path)
    table = load_table(meta, csv_path=data_path)

    selected = None
    if not skip_feature_selection:
        report = select_features(table, meta, seed=seed)
        selected = report.selected
        if selected:
            for col in meta.supported_covariates():
                meta = meta.with_supported(col.name, col.name in selected)
        else:
            click.echo("feature selection kept no columns; keeping all supported", err=True)

    bundle = run_setup(meta, table, seed=seed, out_dir=out_dir, target=target_count)
    manifest = {
        "selected_columns": selected,
        "out_dir": str(bundle.out_dir),
        "files": [str(p.relative_to(bundle.out_dir)) for p in bundle.all_paths()],
        "digest": bundle.digest(),
    }
    if fmt == "json":
        click.echo(json.dumps(manifest, indent=2))
    else:
        if selected is not None:
            click.echo(f"selected columns: {', '.join(selected) if selected else '(none)'}")
        click.echo(f"bundle digest: {manifest['digest']}")
        for f in manifest["files"]:
            click.echo(f"  {f}")


def _build_provider(provider_kind: str, script: str | None, endpoint: str | None):
    from .providers import ProviderConfig, build_provider

    config = ProviderConfig(
        kind=provider_kind,
        script_path=script,
        endpoint=endpoint,
        auth_env="PRESCRIBE_API_TOKEN",
    )
    return build_provider(config)


@cli.command()
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", type=click.Path(exists=True), default=None)
@click.option("--meta", "meta_path", type=click.Path(exists=True), default=None)
@click.option("--provider", "provider_kind", type=click.Choice(["scripted", "http", "echo"]), default="echo")
@click.option("--script", type=click.Path(exists=True), default=None)
@click.option("--endpoint", default=None)
@click.option("--fewshot", is_flag=True, default=False, help="Use few-shot NLU through the provider.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--ui-dir", type=click.Path(), default=None)
@click.option("--seed", default=0, show_default=True, type=int)
def serve(bundle_dir, data_path, meta_path, provider_kind, script, endpoint, fewshot, host, port, ui_dir, seed):
    """Serve the chat API (and the built UI when present)."""
    import uvicorn

    from .server import build_state_from_paths, create_app

    provider = _build_provider(provider_kind, script, endpoint)
    state = build_state_from_paths(
        bundle_dir,
        data_path=data_path,
        meta_path=meta_path,
        provider=provider,
        seed=seed,
        use_fewshot=fewshot,
    )
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = default_ui if default_ui.is_dir() else None
    app = create_app(state, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


@cli.command(name="eval")
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", type=click.Path(exists=True), default=None)
@click.option("--strategy", "strategy_kind", type=click.Choice(["deterministic", "fewshot"]), required=True)
@click.option("--provider", "provider_kind", type=click.Choice(["scripted", "http", "echo"]), default="echo")
@click.option("--script", type=click.Path(exists=True), default=None)
@click.option("--endpoint", default=None)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n", "n_target", default=238, show_default=True, type=int, help="0 evaluates on the prompt database itself.")
@click.option("--format", "fmt", type=click.Choice(["json", "markdown", "csv"]), default="markdown")
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_cmd(bundle_dir, data_path, strategy_kind, provider_kind, script, endpoint, seed, n_target, fmt, out_path):
    """Evaluate intent classification and extraction on a perturbed test set."""
    from .dataset import load_table
    from .evaluation import LabeledQuery, emit_report, evaluate_extractors, evaluate_intent, perturb_queries
    from .genpipeline import load_bundle
    from .nlu import DeterministicStrategy, FewShotStrategy, extractor_specs

    meta, db, _ = load_bundle(bundle_dir)
    table = load_table(meta, csv_path=data_path)
    if strategy_kind == "deterministic":
        strategy = DeterministicStrategy(db, meta, table)
    else:
        strategy = FewShotStrategy(db, _build_provider(provider_kind, script, endpoint), seed=seed)

    if n_target and n_target > 0:
        testset = perturb_queries(db, seed=seed, n_target=n_target)
    else:
        testset = [LabeledQuery(query=s.query, gold=s) for s in db]

    intent_report = evaluate_intent(strategy, testset, label=f"{strategy_kind}-intent")
    extractor_report = evaluate_extractors(
        strategy, extractor_specs(meta), testset, label=f"{strategy_kind}-extractors"
    )
    payload = emit_report([intent_report, extractor_report], fmt)
    if out_path:
        Path(out_path).write_bytes(payload)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload.decode("utf-8"), nl=False)


@cli.command()
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", type=click.Path(exists=True), default=None)
@click.option("--provider", "provider_kind", type=click.Choice(["scripted", "http", "echo"]), default="echo")
@click.option("--script", type=click.Path(exists=True), default=None)
@click.option("--endpoint", default=None)
@click.option("--seed", default=0, show_default=True, type=int)
@click.argument("query")
def ask(bundle_dir, data_path, provider_kind, script, endpoint, seed, query):
    """Run one query through the flow and print the turn result as JSON."""
    from .agent import Session
    from .dataset import load_table
    from .genpipeline import load_bundle, render_system_prompt
    from .nlu import DeterministicStrategy, extractor_specs
    from .tools import ExecutionContext

    meta, db, _ = load_bundle(bundle_dir)
    table = load_table(meta, csv_path=data_path)
    provider = _build_provider(provider_kind, script, endpoint)
    session = Session(
        ctx=ExecutionContext(meta=meta, table=table, seed=seed),
        specs=extractor_specs(meta),
        strategy=DeterministicStrategy(db, meta, table),
        provider=provider,
        system_prompt=render_system_prompt(meta).text,
    )
    turn = session.handle_query(query)
    click.echo(json.dumps(turn.to_dict(), indent=2, default=str))


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=11, show_default=True, type=int)
@click.option("--rows", default=2000, show_default=True, type=int)
def demo(out_dir, seed, rows):
    """Generate the synthetic fixture and replay the scripted walkthrough."""
    from .demo import run_demo

    artifacts = run_demo(out_dir, n=rows, seed=seed)
    click.echo(f"transcript: {artifacts.transcript_path}")
    click.echo(f"events:     {artifacts.events_path}")
    click.echo(f"bundle:     {artifacts.bundle.out_dir}")
    tool_events = [e["type"] for e in artifacts.events if e["type"].startswith("tool")]
    click.echo(f"tool events: {tool_events}")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except PrescribeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
