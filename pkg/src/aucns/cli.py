"""Command-line front end: train, sweep, probe, eval."""

import functools
import json
from pathlib import Path

import click

from .data import load_ratings, popularity_profile, to_implicit_and_split
from .errors import AucnsError
from .experiment import ExperimentConfig, config_hash, run_experiment
from .experiment import sweep as run_sweep
from .metrics import evaluate
from .mf import load_checkpoint, save_checkpoint
from .probes import DEFAULT_PROBE_SEED, PROBE_NAMES, run_probe


def _friendly_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AucnsError as err:
            raise click.ClickException(str(err)) from err

    return wrapper


def _load_config(path, seed=None, sampler=None, out=None):
    with open(path) as fh:
        raw = json.load(fh)
    if seed is not None:
        raw["seed"] = seed
    if sampler is not None:
        raw.setdefault("train", {})["sampler"] = sampler
    if out is not None:
        raw["output_dir"] = out
    return ExperimentConfig.from_dict(raw)


@click.group()
@click.version_option(package_name="aucns")
def main():
    """Train and evaluate implicit-feedback recommenders with popularity-aware
    negative sampling, and run the validation probes."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--sampler", type=click.Choice(["rns", "pns", "dns", "aucns"]),
              default=None, help="Override the configured sampler.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Override the output directory.")
@_friendly_errors
def train(config_path, seed, sampler, out):
    """Run one training + evaluation experiment from a JSON config."""
    config = _load_config(config_path, seed=seed, sampler=sampler, out=out)
    result = run_experiment(config)
    save_checkpoint(result.output_dir / "model.npz",
                    result.train_result.model, config.seed, result.config_hash)
    smallest_k = min(config.eval_k)
    rep = result.reports[smallest_k]
    click.echo(json.dumps({
        "output_dir": str(result.output_dir),
        "config_hash": result.config_hash,
        f"precision_at_{smallest_k}": rep.precision,
        f"ndcg_at_{smallest_k}": rep.ndcg,
        "ohr": rep.ohr,
    }, sort_keys=True, indent=2))


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--param", required=True, type=click.Choice(["alpha", "beta", "gamma"]))
@click.option("--values", required=True,
              help="Comma-separated parameter values, e.g. 0.5,0.75,1.0")
@_friendly_errors
def sweep(config_path, param, values):
    """Run one experiment per value (shared seed) and emit a sweep table."""
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as err:
        raise click.ClickException(f"--values must be comma-separated numbers: {err}")
    config = _load_config(config_path)
    rows = run_sweep(config, param, parsed)
    click.echo(json.dumps({
        "table": str(Path(config.output_dir) / f"sweep_{param}.csv"),
        "points": [
            {"value": v, "precision_at_5": rr.reports[5].precision,
             "ohr": rr.reports[5].ohr}
            for v, rr in rows
        ],
    }, sort_keys=True, indent=2))


@main.command()
@click.argument("name", type=click.Choice(PROBE_NAMES))
@click.option("--seed", type=int, default=DEFAULT_PROBE_SEED)
@click.option("--num-datasets", type=int, default=10_000,
              help="Dataset count for the bias-variance probe.")
@click.option("--instances", type=int, default=200,
              help="Instance count for the pauc-rule probe.")
@click.pass_context
@_friendly_errors
def probe(ctx, name, seed, num_datasets, instances):
    """Run a named validation probe and print its JSON verdict."""
    verdict = run_probe(name, seed=seed, num_datasets=num_datasets,
                        instances=instances)
    click.echo(json.dumps(verdict, sort_keys=True, indent=2))
    ctx.exit(0 if verdict["passed"] else 1)


@main.command("eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@_friendly_errors
def eval_cmd(model_path, config_path):
    """Evaluate a saved checkpoint against the config's dataset and split."""
    config = _load_config(config_path)
    ratings = load_ratings(config.dataset_path, config.dataset_format)
    dataset = to_implicit_and_split(ratings.records, config.split_ratio, config.seed)
    profile = popularity_profile(dataset, config.hot_quantile)
    model, header = load_checkpoint(model_path)
    if (model.num_users, model.num_items) != (dataset.num_users, dataset.num_items):
        raise click.ClickException(
            f"checkpoint is for a {header['num_users']}x{header['num_items']} "
            f"universe; config dataset has {dataset.num_users}x{dataset.num_items}"
        )
    gamma = config.train.sampler_config.gamma
    out = {
        "config_hash_match": header.get("config_hash") == config_hash(config),
        "reports": {
            str(k): evaluate(model, dataset, profile, k, gamma, config.seed).to_dict()
            for k in config.eval_k
        },
    }
    click.echo(json.dumps(out, sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
