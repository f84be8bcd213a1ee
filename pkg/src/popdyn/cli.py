"""Command-line entry point: ingest, stats, generate, train, predict,
evaluate, experiment.

Every command is deterministic given its flags and seed. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import data as dp
from .baselines import LinearModel
from .errors import DataError, NumericalError
from .experiment import VARIANTS, ExperimentConfig, run_experiment
from .metrics import DEFAULT_EPSILON, acc, mape
from .model import MODE_DLAM, DlamModel
from .numerics import make_rng
from .serialize import load_model, save_model
from .synthgen import CorpusSpec, generate_corpus, truth_sidecar_csv
from .training import TrainConfig, train

TRAIN_YEARS_HELP = "training window length in years"
WINDOW_HELP = "feature sub-window length in years (sets the feature dimension K)"


def _verbose() -> bool:
    return os.environ.get("POPDYN_VERBOSE", "1") != "0"


def _log(msg: str) -> None:
    if _verbose():
        click.echo(msg, err=True)


def _write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _apply_config(ctx: click.Context, config_path: str | None, values: dict) -> dict:
    """Merge precedence: explicit CLI flag > config file > declared default."""
    if config_path is None:
        return values
    with open(config_path, "r", encoding="utf-8") as fh:
        try:
            overrides = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataError(f"config {config_path}: line {e.lineno}: {e.msg}") from None
    if not isinstance(overrides, dict):
        raise DataError(f"config {config_path}: expected a JSON object")
    merged = dict(values)
    for key, val in overrides.items():
        norm = key.replace("-", "_")
        if norm not in values:
            raise DataError(f"config {config_path}: unknown key {key!r}")
        src = ctx.get_parameter_source(norm)
        if src is not click.core.ParameterSource.COMMANDLINE:
            merged[norm] = val
    return merged


@click.group()
def cli() -> None:
    """Popularity dynamics modeling and prediction toolkit."""


@cli.command()
@click.option("--events", required=True, type=click.Path(exists=True, dir_okay=False),
              help="tab-separated event log: cited_id <TAB> citing_year")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False),
              help="tab-separated manifest: item_id <TAB> publication_year")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="histories cache output path")
@click.option("--end-year", type=int, default=None,
              help="observation end year [default: latest citing year seen]")
def ingest(events: str, manifest: str, out: str, end_year: int | None) -> None:
    """Tally an event log into per-item yearly histories."""
    pub_years = dp.parse_manifest(dp.read_lines(manifest))
    histories, report = dp.ingest_events(
        dp.read_lines(events), pub_years, end_year=end_year
    )
    _write(out, dp.save_histories(histories))
    click.echo(f"ingested {len(histories)} items: {report.summary()}")


@cli.command()
@click.option("--histories", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="linear histogram CSV output path")
@click.option("--out-loglog", type=click.Path(dir_okay=False), default=None,
              help="optional log-binned histogram CSV output path")
@click.option("--bins-per-decade", type=int, default=5, show_default=True)
def stats(histories: str, out: str, out_loglog: str | None, bins_per_decade: int) -> None:
    """Citation distribution: papers per final cumulative count."""
    hists = dp.load_histories(dp.read_lines(histories))
    hist = dp.citation_distribution(hists)
    _write(out, hist.linear_csv())
    if out_loglog is not None:
        _write(out_loglog, hist.loglog_csv(bins_per_decade))
    click.echo(f"{hist.num_items} items summarized")


@cli.command()
@click.option("--items", required=True, type=int, help="number of synthetic items")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--years", type=int, default=15, show_default=True)
@click.option("--fitness-mu", type=float, default=0.4, show_default=True)
@click.option("--fitness-sigma", type=float, default=0.7, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="histories cache output path")
@click.option("--truth", type=click.Path(dir_okay=False), default=None,
              help="optional ground-truth parameter sidecar CSV")
def generate(items: int, seed: int, years: int, fitness_mu: float,
             fitness_sigma: float, out: str, truth: str | None) -> None:
    """Generate a synthetic reinforced-Poisson-style corpus."""
    spec = CorpusSpec(
        num_items=items, seed=seed, years=years,
        fitness_mu=fitness_mu, fitness_sigma=fitness_sigma,
    )
    histories, truths = generate_corpus(spec)
    _write(out, dp.save_histories(histories))
    if truth is not None:
        _write(truth, truth_sidecar_csv(histories, truths))
    click.echo(f"generated {len(histories)} items")


def _load_filtered_samples(
    histories_path: str, train_years: int, window: int, horizon: int, min_count: int
) -> list[dp.TrainingSample]:
    hists = dp.load_histories(dp.read_lines(histories_path))
    kept = dp.filter_training_set(
        hists, min_count=min_count, first_years=train_years, min_followup=horizon
    )
    if not kept:
        raise DataError("no items survive the training-set filter")
    return [dp.build_samples(h, train_years, (horizon,), window) for h in kept]


@cli.command(name="train")
@click.pass_context
@click.option("--histories", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(list(VARIANTS)), default="dlam",
              show_default=True)
@click.option("--horizon", type=int, default=1, show_default=True,
              help="years after the training window to predict")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="model file output path")
@click.option("--report", type=click.Path(dir_okay=False), default=None,
              help="optional per-epoch loss CSV")
@click.option("--hidden", type=int, default=32, show_default=True)
@click.option("--layers", type=int, default=2, show_default=True,
              help="number of stacked recurrent layers L")
@click.option("--train-years", type=int, default=5, show_default=True,
              help=TRAIN_YEARS_HELP)
@click.option("--window", type=int, default=10, show_default=True, help=WINDOW_HELP)
@click.option("--min-count", type=int, default=5, show_default=True,
              help="keep items with strictly more citations than this in the window")
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--patience", type=int, default=20, show_default=True)
@click.option("--val-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON config file; explicit flags take precedence")
def train_cmd(ctx: click.Context, **kw) -> None:
    """Train one model for one horizon."""
    kw = _apply_config(ctx, kw.pop("config"), kw)
    samples = _load_filtered_samples(
        kw["histories"], kw["train_years"], kw["window"], kw["horizon"],
        kw["min_count"],
    )
    X, y, _ = dp.build_sample_arrays(samples, kw["horizon"])
    if kw["mode"] == "linear":
        from .baselines import fit_linear

        model = fit_linear(X, y, kw["horizon"])
        report = None
    else:
        model = DlamModel.init(
            mode=kw["mode"],
            feature_dim=kw["window"],
            num_steps=kw["train_years"],
            horizon=kw["horizon"],
            hidden_size=kw["hidden"],
            num_layers=kw["layers"],
            rng=make_rng(kw["seed"]),
        )
        cfg = TrainConfig(
            epochs=kw["epochs"], batch_size=kw["batch_size"],
            patience=kw["patience"], val_fraction=kw["val_fraction"],
            seed=kw["seed"],
        )
        report = train(model, X, y, cfg, log=_log if _verbose() else None)
    save_model(model, kw["out"])
    if kw["report"] is not None and report is not None:
        _write(kw["report"], report.to_csv())
    click.echo(f"trained {kw['mode']} (horizon {kw['horizon']}) on {len(y)} samples")


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--histories", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="predictions CSV output path")
def predict(model_path: str, histories: str, out: str) -> None:
    """Predict cumulative popularity for every item with enough history."""
    model = load_model(model_path)
    window = model.feature_dim
    hists = dp.load_histories(dp.read_lines(histories))
    usable = [h for h in hists if h.observed_years >= model.num_steps]
    if not usable:
        raise DataError("no item has enough observed years for this model")
    lines = ["item_id,predicted"]
    for h in usable:
        sample = dp.build_samples(h, model.num_steps, (), window)
        lines.append(f"{h.item_id},{model.predict(sample.features)!r}")
    _write(out, "\n".join(lines) + "\n")
    click.echo(f"predicted {len(usable)} items")


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--histories", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--epsilon", type=float, default=DEFAULT_EPSILON, show_default=True,
              help="relative-error tolerance for ACC")
@click.option("--min-count", type=int, default=5, show_default=True)
@click.option("--pretty", is_flag=True, help="also print a human-readable table")
def evaluate(model_path: str, histories: str, out: str, epsilon: float,
             min_count: int, pretty: bool) -> None:
    """Evaluate a saved model at its horizon with MAPE and ACC."""
    model = load_model(model_path)
    samples = _load_filtered_samples(
        histories, model.num_steps, model.feature_dim, model.horizon, min_count
    )
    X, y, _ = dp.build_sample_arrays(samples, model.horizon)
    preds = [model.predict(x) for x in X]
    obs = y.tolist()
    m, a = mape(preds, obs), acc(preds, obs, epsilon)
    name = model.mode if isinstance(model, DlamModel) else "linear"
    csv = "model,horizon,MAPE,ACC,epsilon,M\n"
    csv += f"{name},{model.horizon},{m!r},{a!r},{epsilon!r},{len(obs)}\n"
    _write(out, csv)
    if pretty:
        click.echo(f"{name:8s} horizon={model.horizon} "
                   f"MAPE={m:.3f} ACC={a:.3f} (M={len(obs)})")
    else:
        click.echo(f"evaluated {len(obs)} items")


@cli.command()
@click.pass_context
@click.option("--histories", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--horizons", default="1,2,3,4,5", show_default=True,
              help="comma-separated prediction horizons in years")
@click.option("--epsilon", type=float, default=DEFAULT_EPSILON, show_default=True)
@click.option("--hidden", type=int, default=16, show_default=True)
@click.option("--layers", type=int, default=2, show_default=True,
              help="number of stacked recurrent layers L")
@click.option("--train-years", type=int, default=5, show_default=True,
              help=TRAIN_YEARS_HELP)
@click.option("--window", type=int, default=10, show_default=True, help=WINDOW_HELP)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--patience", type=int, default=20, show_default=True)
@click.option("--val-fraction", type=float, default=0.1, show_default=True)
@click.option("--test-fraction", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pretty", is_flag=True, help="also print a human-readable table")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON config file; explicit flags take precedence")
def experiment(ctx: click.Context, **kw) -> None:
    """Compare dlam, lt-ccp, and linear across horizons on one corpus."""
    kw = _apply_config(ctx, kw.pop("config"), kw)
    try:
        horizons = tuple(int(h) for h in str(kw["horizons"]).split(","))
    except ValueError:
        raise click.UsageError(f"bad --horizons value {kw['horizons']!r}") from None
    hists = dp.load_histories(dp.read_lines(kw["histories"]))
    cfg = ExperimentConfig(
        seed=kw["seed"], horizons=horizons, epsilon=kw["epsilon"],
        hidden_size=kw["hidden"], num_layers=kw["layers"],
        train_years=kw["train_years"], window=kw["window"],
        test_fraction=kw["test_fraction"],
        train=TrainConfig(
            epochs=kw["epochs"], batch_size=kw["batch_size"],
            patience=kw["patience"], val_fraction=kw["val_fraction"],
        ),
    )
    result = run_experiment(hists, cfg, out_dir=kw["out_dir"], log=_log)
    if kw["pretty"]:
        click.echo(f"{'model':8s} {'t':>2s} {'MAPE':>8s} {'ACC':>6s} {'M':>6s}")
        for name, r in result.reports:
            click.echo(
                f"{name:8s} {r.horizon:2d} {r.mape:8.3f} {r.acc:6.3f} {r.num_items:6d}"
            )
    click.echo(f"wrote {os.path.join(kw['out_dir'], 'metrics.csv')}")


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
