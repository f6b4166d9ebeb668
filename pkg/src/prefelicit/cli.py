"""Command-line entry points for the experiment harness and the session service."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import click

from .experiments import (
    ExperimentPlan,
    run_gradient_variance_study,
    run_inference_study,
    run_policy_study,
    write_manifest,
    write_records_csv,
)

FULL_INFERENCE = dict(
    shapes=("linear", "concave", "convex", "mixture"),
    comparison_counts=(20, 40, 60, 80),
    bias_proportions=(0.0, 0.1, 0.2, 0.3),
    repetitions=20,
)
FULL_POLICY = dict(
    settings=tuple((n, 3) for n in range(6, 11)) + tuple((8, m) for m in range(2, 6)),
    repetitions=20,
    mcts_budget=300,
)


def _load_plan(plan_path: str | None, study: str, seed: int | None, full: bool) -> ExperimentPlan:
    if plan_path:
        plan = ExperimentPlan.from_json(Path(plan_path).read_text())
    else:
        overrides = (FULL_INFERENCE if study == "inference" else FULL_POLICY) if full else {}
        plan = ExperimentPlan(study=study, **overrides)
    if seed is not None:
        plan = replace(plan, base_seed=seed)
    return plan


@click.group()
def main() -> None:
    """Bayesian interactive preference elicitation toolkit."""


@main.command("infer-study")
@click.option("--plan", "plan_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=1)
@click.option("--full", is_flag=True, help="Run the full factor grid instead of desk scale.")
def infer_study(plan_path, out_path, seed, workers, full) -> None:
    """ASP comparison of the rt / no-rt / SOR inference methods."""
    plan = _load_plan(plan_path, "inference", seed, full)
    records = run_inference_study(plan, workers=workers)
    write_records_csv(records, out_path)
    write_manifest(plan, Path(out_path).with_suffix(".manifest.json"))
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command("policy-study")
@click.option("--plan", "plan_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=1)
@click.option("--full", is_flag=True)
def policy_study(plan_path, out_path, seed, workers, full) -> None:
    """Interactive questioning-policy comparison (uncertainty metrics per round)."""
    plan = _load_plan(plan_path, "policy", seed, full)
    records = run_policy_study(plan, workers=workers)
    write_records_csv(records, out_path)
    write_manifest(plan, Path(out_path).with_suffix(".manifest.json"))
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command("gradvar")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--configs", type=int, default=10)
@click.option("--repeats", type=int, default=100)
@click.option("--grad-samples", type=int, default=1000)
def gradvar(out_path, seed, configs, repeats, grad_samples) -> None:
    """Variance comparison of the two gradient estimators."""
    records = run_gradient_variance_study(
        n_configs=configs, repeats=repeats, grad_samples=grad_samples, base_seed=seed
    )
    write_records_csv(records, out_path)
    write_manifest(None, Path(out_path).with_suffix(".manifest.json"),
                   extra={"seed": seed, "configs": configs, "repeats": repeats})
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", envvar="PREFELICIT_BIND_HOST")
@click.option("--port", default=8000, type=int, envvar="PREFELICIT_BIND_PORT")
@click.option("--data-dir", default=None, envvar="PREFELICIT_DATA_DIR")
@click.option("--seed", default=0, type=int, envvar="PREFELICIT_SEED")
def serve(host, port, data_dir, seed) -> None:
    """Run the live session service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir=data_dir, server_seed=seed), host=host, port=port)


if __name__ == "__main__":
    main()
