"""Command-line interface.

Subcommands: ``validate``, ``view``, ``script``, ``synth``, ``serve``.
Global flags (before the subcommand) bind the dataset and one-shot
selections: ``--dataset``, ``--scope``, ``--first``, ``--second``,
``--format``, ``--seed``.

View payloads are printed as canonical JSON, one document per line; the
service emits the same bytes for the same inputs. ``--format csv``
flattens the tabular views (metrics, parallel_metrics,
selection_performance, instance_list) for spreadsheet use.
"""

from __future__ import annotations

import functools
import io
import sys
from pathlib import Path

import click

from .dataset import load_dataset, validate as validate_dataset
from .errors import ClfboxError
from .query import parse
from .scripts import run_script
from .selection import SelectionState
from .session import DatasetRegistry
from .synth import generate
from .views import VIEW_KINDS, build_view, payload_json

TABULAR_VIEWS = ("metrics", "parallel_metrics", "selection_performance", "instance_list")


def _friendly_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ClfboxError as exc:
            raise click.ClickException(f"{exc.code}: {exc.message}") from exc

    return wrapper


@click.group()
@click.option("--dataset", "dataset_path", type=click.Path(), default=None, help="Dataset manifest path.")
@click.option("--scope", type=click.Choice(["train", "test", "all"]), default="all", show_default=True)
@click.option("--first", "first_query", default=None, help="Query text for the first selection.")
@click.option("--second", "second_query", default=None, help="Query text for the second selection.")
@click.option("--format", "output_format", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for synth.")
@click.pass_context
def cli(ctx, dataset_path, scope, first_query, second_query, output_format, seed):
    """Classifier-comparison analytics over experiment result datasets."""
    ctx.ensure_object(dict)
    ctx.obj.update(
        dataset_path=dataset_path,
        scope=scope,
        first_query=first_query,
        second_query=second_query,
        output_format=output_format,
        seed=seed,
    )


def _require_dataset(ctx):
    path = ctx.obj["dataset_path"]
    if path is None:
        raise click.UsageError("a dataset is required; pass --dataset before the subcommand")
    return load_dataset(path)


def _one_shot_state(ctx, dataset) -> SelectionState:
    state = SelectionState(dataset)
    state.set_scope(ctx.obj["scope"])
    if ctx.obj["first_query"]:
        state.set_slot("first", parse(ctx.obj["first_query"]))
    if ctx.obj["second_query"]:
        state.set_slot("second", parse(ctx.obj["second_query"]))
    return state


@cli.command()
@click.argument("manifest", type=click.Path(), required=False)
@click.pass_context
@_friendly_errors
def validate(ctx, manifest):
    """Load a manifest, print warnings; exit nonzero on any load error."""
    path = manifest or ctx.obj["dataset_path"]
    if path is None:
        raise click.UsageError("pass a manifest path or --dataset")
    dataset = load_dataset(path)
    report = validate_dataset(dataset)
    click.echo(
        f"ok: {dataset.n} instances, {dataset.m} classifiers, "
        f"{dataset.l} labels, {len(dataset.features)} features"
    )
    for warning in report.warnings:
        click.echo(f"warning: {warning}")


def _parse_kv_params(pairs) -> dict:
    params = {}
    for token in pairs:
        key, sep, value = token.partition("=")
        if not sep:
            raise click.UsageError(f"view parameter {token!r} is not key=value")
        params[key] = value
    return params


@cli.command()
@click.argument("kind", type=click.Choice(VIEW_KINDS))
@click.argument("params", nargs=-1)
@click.pass_context
@_friendly_errors
def view(ctx, kind, params):
    """Emit one view payload (PARAMS are key=value pairs)."""
    dataset = _require_dataset(ctx)
    state = _one_shot_state(ctx, dataset)
    payload = build_view(dataset, state, kind, _parse_kv_params(params), version=0)
    if ctx.obj["output_format"] == "csv":
        click.echo(_to_csv(payload), nl=False)
    else:
        click.echo(payload_json(payload))


@cli.command()
@click.argument("script_file", type=click.Path())
@click.pass_context
@_friendly_errors
def script(ctx, script_file):
    """Run a selection script, printing one JSON payload per emit."""
    dataset = _require_dataset(ctx)
    path = Path(script_file)
    if not path.is_file():
        raise click.UsageError(f"script file not found: {path}")
    for payload in run_script(dataset, path.read_text()):
        click.echo(payload_json(payload))


@cli.command()
@click.option("--n", type=int, required=True, help="Instance count.")
@click.option("--m", type=int, required=True, help="Classifier count.")
@click.option("--l", "labels", type=int, required=True, help="Label count.")
@click.option("--features", type=int, default=4, show_default=True)
@click.option("--accuracies", default=None, help="Comma-separated per-classifier accuracies.")
@click.option("--train-fraction", type=float, default=0.75, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
@_friendly_errors
def synth(ctx, n, m, labels, features, accuracies, train_fraction, out):
    """Generate a deterministic synthetic dataset (manifest + CSV)."""
    acc = [float(x) for x in accuracies.split(",")] if accuracies else None
    manifest_path = generate(
        out, n=n, m=m, l=labels, n_features=features, seed=ctx.obj["seed"],
        accuracies=acc, train_fraction=train_fraction,
    )
    click.echo(str(manifest_path))


@cli.command()
@click.argument("manifests", nargs=-1, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_context
@_friendly_errors
def serve(ctx, manifests, host, port):
    """Start the HTTP service, preloading the given dataset manifests."""
    import uvicorn  # noqa: PLC0415 - heavy import only for this command

    from .service import create_app  # noqa: PLC0415

    registry = DatasetRegistry()
    paths = list(manifests)
    if ctx.obj["dataset_path"]:
        paths.insert(0, ctx.obj["dataset_path"])
    for path in paths:
        dataset_id = registry.load_path(path)
        click.echo(f"loaded {path} as {dataset_id}")
    uvicorn.run(create_app(registry), host=host, port=port, log_level="warning")


# -- csv flattening -------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _to_csv(payload: dict) -> str:
    import csv  # noqa: PLC0415

    kind = payload["view"]
    if kind not in TABULAR_VIEWS:
        raise click.UsageError(f"--format csv supports tabular views only: {TABULAR_VIEWS}")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if kind in ("metrics", "parallel_metrics"):
        kinds = payload["meta"]["metric_kinds"]
        header = ["classifier", *kinds]
        if kind == "parallel_metrics":
            header.append("rank")
        writer.writerow(header)
        for row in payload["groups"]:
            cells = [row["classifier"]]
            cells += [_fmt(row["metrics"][k]["value"]) for k in kinds]
            if kind == "parallel_metrics":
                cells.append(row["rank"])
            writer.writerow(cells)
    elif kind == "selection_performance":
        writer.writerow(["classifier", "first", "second"])
        for row in payload["groups"]:
            writer.writerow(
                [
                    row["classifier"],
                    _fmt(row["first"]["value"] if row["first"] else None),
                    _fmt(row["second"]["value"] if row["second"] else None),
                ]
            )
    else:  # instance_list
        feature_names = list(payload["rows"][0]["features"]) if payload["rows"] else []
        classifier_names = list(payload["rows"][0]["predictions"]) if payload["rows"] else []
        writer.writerow(
            ["index", "id", "split", "in_first", "in_second", "actual"]
            + [f"pred_{c}" for c in classifier_names]
            + feature_names
        )
        for row in payload["rows"]:
            writer.writerow(
                [row["index"], row["id"], row["split"], _fmt(row["in_first"]), _fmt(row["in_second"]), row["actual"]]
                + [row["predictions"][c] for c in classifier_names]
                + [_fmt(row["features"][f]) for f in feature_names]
            )
    return buffer.getvalue()


def main(argv=None):
    cli(args=argv, prog_name="clfbox")


if __name__ == "__main__":
    main()
