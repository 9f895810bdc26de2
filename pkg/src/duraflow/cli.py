"""Command-line interface orchestrating the full workflow.

Subcommands: ingest, preprocess, train, evaluate, predict, explain, report,
synth. Every run echoes its effective configuration and writes a manifest
(config + input hashes + tool version) beside the artifacts it produces.
Exit codes: 0 success, 1 data/model error, 2 usage error.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import bilevel as bl
from . import explain as ex
from . import ingest as ing
from . import model_io
from . import preprocess as pp
from . import stats_report as sr
from . import synth as synthmod
from .config import TOOL_VERSION, load_config, write_manifest
from .ensembles import GradientBoostedTreeRegressor, RandomForestBinaryClassifier
from .exceptions import DuraflowError, SchemaMismatch


def _check_model_schema(model, sidecar_doc: dict) -> None:
    fp = sidecar_doc.get("schema_fingerprint")
    if model.schema_fingerprint_ and fp and model.schema_fingerprint_ != fp:
        raise SchemaMismatch(
            "model was trained against a different schema than this dataset"
        )


def _echo_config(config: dict) -> None:
    click.echo("effective config:")
    click.echo(json.dumps(config, indent=2, sort_keys=True))


def _filter_spec(config: dict) -> ing.FilterSpec:
    f = config["filter"]
    source = f.get("source")
    return ing.FilterSpec(
        state_code=f["state"],
        source_tag=source if source else None,
        date_min=ing.parse_timestamp(f["date_min"]),
        date_max=ing.parse_timestamp(f["date_max"]),
    )


def _preprocess_config(config: dict) -> pp.PreprocessConfig:
    p = config["preprocess"]
    s = config["split"]
    return pp.PreprocessConfig(
        threshold=p["threshold_minutes"],
        threshold_mode=p["threshold_mode"],
        lower_q=p["lower_q"],
        upper_q=p["upper_q"],
        fit_on=p["fit_on"],
        drop_turning_loop=p["drop_turning_loop"],
        drop_distance=p["drop_distance"],
        split=pp.SplitSpec(
            train_fraction=s["train_fraction"],
            seed=s["seed"],
            stratified=s["stratified"],
        ),
    )


def _threads(config: dict, flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("DURAFLOW_THREADS")
    if env:
        return int(env)
    return int(config.get("threads", 1))


def _load_dataset(data, sidecar):
    data = Path(data)
    sidecar = Path(sidecar) if sidecar else data.parent / "dataset.json"
    ds, doc = pp.load_encoded(sidecar, data)
    return ds, doc, sidecar


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
    default=None, help="JSON config file; flags override file values.",
)
workdir_option = click.option(
    "--workdir", type=click.Path(file_okay=False), default=".",
    help="Directory receiving all outputs.",
)
seed_option = click.option(
    "--seed", type=int, default=None,
    help="Master seed; derives split/model/explain seeds.",
)


@click.group()
@click.version_option(TOOL_VERSION, prog_name="duraflow")
def cli():
    """Bi-level traffic accident duration prediction toolkit."""


@cli.command()
@click.option("--rows", type=int, required=True, help="Number of synthetic rows.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output CSV path (default <workdir>/synthetic.csv).")
@workdir_option
def synth(rows, seed, out, workdir):
    """Generate a synthetic accident CSV exercising the full pipeline."""
    workdir = Path(workdir)
    out = Path(out) if out else workdir / "synthetic.csv"
    counts = synthmod.generate_csv(out, rows, seed)
    config = load_config(overrides={"seed": seed})
    _echo_config(config)
    write_manifest(workdir, "synth", config, {"synthetic_csv": out}, [out.name])
    click.echo(f"wrote {out} ({counts['rows']} rows, {counts['long_mode_rows']} long-mode)")


@cli.command()
@click.option("--raw", "raw_csv", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--header-policy", type=click.Choice(["strict", "lenient"]), default="strict",
              show_default=True)
@click.option("--state", default=None, help="Override filter.state.")
@click.option("--source", default=None, help="Override filter.source ('' disables).")
@config_option
@workdir_option
def ingest(raw_csv, header_policy, state, source, config_path, workdir):
    """Parse the raw CSV and filter to the study population."""
    overrides: dict = {"filter": {}}
    if state is not None:
        overrides["filter"]["state"] = state
    if source is not None:
        overrides["filter"]["source"] = source
    config = load_config(config_path, overrides)
    _echo_config(config)

    kept, diagnostics, header, total = ing.stream_filtered_records(
        raw_csv, _filter_spec(config), header_policy, keep_raw=True
    )
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    filtered_path = workdir / "filtered.csv"
    ing.write_records_csv(kept, header, filtered_path)
    diag_path = workdir / "diagnostics.csv"
    with open(diag_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("line,reason\n")
        for d in diagnostics:
            fh.write(f'{d.line},"{d.reason}"\n')
    summary = {
        "data_rows": total,
        "parsed_records": total - len(diagnostics),
        "diagnostics": len(diagnostics),
        "kept_after_filter": len(kept),
    }
    summary_path = workdir / "ingest_summary.json"
    model_io.dump_json(summary_path, summary)
    write_manifest(
        workdir, "ingest", config, {"raw_csv": raw_csv},
        [filtered_path.name, diag_path.name, summary_path.name],
    )
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@cli.command()
@click.option("--raw", "raw_csv", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--header-policy", type=click.Choice(["strict", "lenient"]), default="strict",
              show_default=True)
@click.option("--threshold", type=float, default=None, help="Short/long cut in minutes.")
@click.option("--threshold-mode", type=click.Choice(["fixed", "auto"]), default=None)
@click.option("--fit-on", type=click.Choice(["train", "all"]), default=None)
@click.option("--drop-turning-loop", is_flag=True, default=None)
@click.option("--drop-distance", is_flag=True, default=None)
@click.option("--train-fraction", type=float, default=None)
@click.option("--stratified", is_flag=True, default=None)
@config_option
@workdir_option
@seed_option
def preprocess(raw_csv, header_policy, threshold, threshold_mode, fit_on,
               drop_turning_loop, drop_distance, train_fraction, stratified,
               config_path, workdir, seed):
    """Parse, filter, trim, impute, encode, label, and split the dataset."""
    overrides: dict = {"preprocess": {}, "split": {}}
    if threshold is not None:
        overrides["preprocess"]["threshold_minutes"] = threshold
    if threshold_mode is not None:
        overrides["preprocess"]["threshold_mode"] = threshold_mode
    if fit_on is not None:
        overrides["preprocess"]["fit_on"] = fit_on
    if drop_turning_loop:
        overrides["preprocess"]["drop_turning_loop"] = True
    if drop_distance:
        overrides["preprocess"]["drop_distance"] = True
    if train_fraction is not None:
        overrides["split"]["train_fraction"] = train_fraction
    if stratified:
        overrides["split"]["stratified"] = True
    if seed is not None:
        overrides["seed"] = seed
    config = load_config(config_path, overrides)
    _echo_config(config)

    kept, _, _, _ = ing.stream_filtered_records(
        raw_csv, _filter_spec(config), header_policy
    )
    prepared = pp.prepare_dataset(kept, _preprocess_config(config))
    paths = pp.save_prepared(workdir, prepared, _preprocess_config(config))
    write_manifest(
        Path(workdir), "preprocess", config, {"raw_csv": raw_csv},
        [Path(p).name for p in paths.values()],
    )
    click.echo(json.dumps(prepared.stats, indent=2, sort_keys=True))


@cli.command()
@click.option("--data", "data_dir", type=click.Path(file_okay=False), default=None,
              help="Directory holding dataset.json + train.csv (default workdir).")
@click.option("--dot-trees", type=int, default=0, show_default=True,
              help="Export the first K trees of each sub-model as DOT files.")
@click.option("--threads", type=int, default=None)
@config_option
@workdir_option
@seed_option
def train(data_dir, dot_trees, threads, config_path, workdir, seed):
    """Train the bi-level model on the encoded training split."""
    overrides = {"seed": seed} if seed is not None else {}
    config = load_config(config_path, overrides)
    _echo_config(config)
    workdir = Path(workdir)
    data_dir = Path(data_dir) if data_dir else workdir
    sidecar_path = data_dir / "dataset.json"
    train_path = data_dir / "train.csv"
    ds, sidecar, _ = _load_dataset(train_path, sidecar_path)

    n_threads = _threads(config, threads)
    classifier = RandomForestBinaryClassifier(n_threads=n_threads, **config["forest"])
    short_reg = GradientBoostedTreeRegressor(**config["gbdt_short"])
    long_reg = GradientBoostedTreeRegressor(**config["gbdt_long"])
    model = bl.BilevelDurationModel(
        threshold=sidecar["threshold_minutes"],
        classifier=classifier,
        short_regressor=short_reg,
        long_regressor=long_reg,
    )
    model.fit(ds.X, ds.durations, schema_fingerprint=sidecar["schema_fingerprint"])

    model_path = workdir / "model.json"
    model_io.save_model(model_path, model)
    outputs = [model_path.name]

    if dot_trees > 0:
        report = sr.report_dir(workdir)
        schema = ds.schema
        for label, sub in (
            ("classifier", model.classifier_),
            ("short", model.short_regressor_),
            ("long", model.long_regressor_),
        ):
            for k in range(min(dot_trees, len(sub.trees_))):
                dot_path = report / f"{label}_tree_{k}.dot"
                dot_path.write_text(
                    sub.trees_[k].to_dot(schema.feature_names, sub.bin_edges_),
                    encoding="utf-8",
                )
                outputs.append(f"report/{dot_path.name}")

    summary = {
        "classifier_trees": len(model.classifier_.trees_),
        "short_rounds": len(model.short_regressor_.trees_),
        "long_rounds": len(model.long_regressor_.trees_),
        "threshold_minutes": model.threshold_,
        "training_rows": model.provenance_["training_rows"],
    }
    summary_path = workdir / "training_summary.json"
    model_io.dump_json(summary_path, summary)
    outputs.append(summary_path.name)
    write_manifest(
        workdir, "train", config,
        {"train_csv": train_path, "sidecar": sidecar_path}, outputs,
    )
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--data", "data_csv", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sidecar", type=click.Path(exists=True, dir_okay=False), default=None,
              help="dataset.json (default: sibling of --data).")
@config_option
@workdir_option
def evaluate(model_path, data_csv, sidecar, config_path, workdir):
    """Score a trained bi-level model on an encoded test split."""
    config = load_config(config_path)
    _echo_config(config)
    ds, sidecar_doc, sidecar_path = _load_dataset(data_csv, sidecar)
    model = model_io.load_model(model_path)
    if not isinstance(model, bl.BilevelDurationModel):
        raise DuraflowError("evaluate expects a bilevel model bundle")
    _check_model_schema(model, sidecar_doc)

    report_out = bl.evaluate_bilevel(model, ds.X, ds.durations)
    workdir = Path(workdir)
    report = sr.report_dir(workdir)
    metrics_path = report / "metrics.json"
    model_io.dump_json(metrics_path, report_out)
    outputs = ["report/metrics.json", "report/predictions.csv"]

    detail = model.predict_detail(ds.X)
    rows = sr.prediction_series(ds.durations, detail["minutes"], first_n=ds.n_rows)
    sr.write_prediction_series_csv(
        report / "predictions.csv", rows, branches=detail["branch"].tolist()
    )
    first_n = config["report"]["first_n"]
    true_labels = pp.label_durations(ds.durations, model.threshold_)
    for name, label in (("short", 1), ("long", 0)):
        mask = true_labels == label
        if not mask.any():
            continue
        sub = (model.short_regressor_ if label == 1 else model.long_regressor_)
        series = sr.prediction_series(
            ds.durations[mask], sub.predict(ds.X[mask]), first_n=first_n
        )
        sr.write_prediction_series_csv(report / f"{name}_series.csv", series)
        outputs.append(f"report/{name}_series.csv")

    write_manifest(
        workdir, "evaluate", config,
        {"model": model_path, "data": data_csv, "sidecar": sidecar_path},
        outputs,
    )
    click.echo(json.dumps(report_out["combined"], indent=2, sort_keys=True))


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--data", "data_csv", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sidecar", type=click.Path(exists=True, dir_okay=False), default=None)
@config_option
@workdir_option
def predict(model_path, data_csv, sidecar, config_path, workdir):
    """Predict routed durations for an encoded dataset."""
    config = load_config(config_path)
    _echo_config(config)
    ds, sidecar_doc, sidecar_path = _load_dataset(data_csv, sidecar)
    model = model_io.load_model(model_path)
    if not isinstance(model, bl.BilevelDurationModel):
        raise DuraflowError("predict expects a bilevel model bundle")
    _check_model_schema(model, sidecar_doc)
    detail = model.predict_detail(ds.X)
    workdir = Path(workdir)
    report = sr.report_dir(workdir)
    out_path = report / "predicted_minutes.csv"
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,predicted_minutes,branch,proba_short\n")
        for i in range(ds.n_rows):
            fh.write(
                f"{i},{detail['minutes'][i]!r},{int(detail['branch'][i])},"
                f"{detail['proba'][i, 1]!r}\n"
            )
    write_manifest(
        workdir, "predict", config,
        {"model": model_path, "data": data_csv, "sidecar": sidecar_path},
        ["report/predicted_minutes.csv"],
    )
    click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--data", "data_csv", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sidecar", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--branch", type=click.Choice(["classifier", "short", "long"]),
              default="short", show_default=True)
@click.option("--row-index", type=int, default=None,
              help="Also export the attribution vector for one row.")
@config_option
@workdir_option
def explain(model_path, data_csv, sidecar, branch, row_index, config_path, workdir):
    """Per-feature attribution summary (and optional single-row vector)."""
    config = load_config(config_path)
    _echo_config(config)
    ds, sidecar_doc, sidecar_path = _load_dataset(data_csv, sidecar)
    model = model_io.load_model(model_path)
    if not isinstance(model, bl.BilevelDurationModel):
        raise DuraflowError("explain expects a bilevel model bundle")
    _check_model_schema(model, sidecar_doc)

    true_labels = pp.label_durations(ds.durations, model.threshold_)
    if branch == "classifier":
        sub, X = model.classifier_, ds.X
        title = "classifier: probability of short duration"
    elif branch == "short":
        sub, X = model.short_regressor_, ds.X[true_labels == 1]
        title = "short-branch regressor output (minutes)"
    else:
        sub, X = model.long_regressor_, ds.X[true_labels == 0]
        title = "long-branch regressor output (minutes)"
    if len(X) == 0:
        raise DuraflowError(f"no rows available for branch {branch}")

    summary = ex.shap_summary(
        sub, X, feature_names=ds.schema.feature_names,
        sample_cap=config["explain"]["sample_cap"],
        random_state=config["explain"]["random_state"],
    )
    workdir = Path(workdir)
    report = sr.report_dir(workdir)
    csv_path = report / f"shap_summary_{branch}.csv"
    svg_path = report / f"shap_summary_{branch}.svg"
    ex.write_shap_summary_csv(csv_path, summary)
    ex.write_shap_summary_svg(svg_path, summary, title)
    outputs = [f"report/{csv_path.name}", f"report/{svg_path.name}"]

    if row_index is not None:
        if not 0 <= row_index < len(X):
            raise DuraflowError(f"row index {row_index} out of range (n={len(X)})")
        vector = ex.shap_for_row(sub, X[row_index], feature_names=ds.schema.feature_names)
        row_path = report / f"shap_row_{branch}_{row_index}.csv"
        ex.write_shap_row_csv(row_path, vector)
        outputs.append(f"report/{row_path.name}")

    write_manifest(
        workdir, "explain", config,
        {"model": model_path, "data": data_csv, "sidecar": sidecar_path}, outputs,
    )
    click.echo(f"top features: {[name for name, _ in summary.ranked()[:5]]}")


@cli.command()
@click.option("--raw", "raw_csv", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--header-policy", type=click.Choice(["strict", "lenient"]), default="strict",
              show_default=True)
@config_option
@workdir_option
def report(raw_csv, header_policy, config_path, workdir):
    """Descriptive statistics bundle: duration summaries, boxplot data,
    correlation matrix, feature distributions, category counts."""
    config = load_config(config_path)
    _echo_config(config)
    kept, _, _, _ = ing.stream_filtered_records(
        raw_csv, _filter_spec(config), header_policy
    )
    if not kept:
        raise DuraflowError("no records left after filtering; nothing to report")

    durations_all = pp.durations_from_records(kept)
    positive = durations_all[durations_all > 0.0]
    workdir = Path(workdir)
    out = sr.report_dir(workdir)
    outputs = []

    pre = sr.summary_stats(positive)
    sr.write_summary_csv(out / "duration_summary_pretrim.csv", "pre_trim", pre)
    outputs.append("report/duration_summary_pretrim.csv")

    keep_idx, cuts = pp.trim_outliers(
        positive, config["preprocess"]["lower_q"], config["preprocess"]["upper_q"]
    )
    trimmed = positive[keep_idx]
    post = sr.summary_stats(trimmed)
    sr.write_summary_csv(out / "duration_summary_trimmed.csv", "trimmed", post)
    outputs.append("report/duration_summary_trimmed.csv")

    fn = sr.five_number(trimmed)
    sr.write_boxplot(
        out / "duration_boxplot.csv", out / "duration_boxplot.svg", fn,
        title="accident duration (minutes, trimmed)",
    )
    outputs += ["report/duration_boxplot.csv", "report/duration_boxplot.svg"]

    sr.write_histogram_csv(
        out / "duration_histogram.csv",
        sr.histogram_table(trimmed, bins=config["report"]["histogram_bins"]),
    )
    outputs.append("report/duration_histogram.csv")

    # encoded view over all trimmed rows for correlation / distributions
    pos_records = [r for r, d in zip(kept, durations_all) if d > 0.0]
    trimmed_records = [pos_records[i] for i in keep_idx]
    cols = pp.modeling_columns(
        config["preprocess"]["drop_turning_loop"], config["preprocess"]["drop_distance"]
    )
    imputer = pp.MeanModeImputer(columns=cols).fit(trimmed_records)
    rows_imputed = imputer.transform(trimmed_records)
    encoder = pp.TabularEncoder(columns=cols).fit(rows_imputed)
    X = encoder.transform(rows_imputed)
    labels = list(encoder.schema_.feature_names) + ["duration_minutes"]
    corr = sr.correlation_matrix(np.column_stack([X, trimmed]), labels)
    sr.write_correlation(
        out / "correlation_matrix.csv", out / "correlation_matrix.svg", corr,
        title="feature / duration correlation",
    )
    outputs += ["report/correlation_matrix.csv", "report/correlation_matrix.svg"]

    name_to_idx = {n: j for j, n in enumerate(encoder.schema_.feature_names)}
    for col in config["report"]["distribution_columns"]:
        if col not in name_to_idx:
            continue
        stem = col.replace("(", "_").replace(")", "").replace("%", "pct").lower()
        sr.write_histogram_csv(
            out / f"distribution_{stem}.csv",
            sr.histogram_table(X[:, name_to_idx[col]],
                               bins=config["report"]["histogram_bins"]),
        )
        outputs.append(f"report/distribution_{stem}.csv")
    attr_by_name = {name: attr for name, attr, _ in cols}
    for col in config["report"]["category_columns"]:
        attr = attr_by_name.get(col)
        if attr is None:
            continue
        values = [str(getattr(r, attr)) for r in rows_imputed]
        stem = col.lower()
        sr.write_category_counts_csv(
            out / f"category_counts_{stem}.csv", sr.category_counts(values)
        )
        outputs.append(f"report/category_counts_{stem}.csv")

    summary = {
        "pre_trim": pre.to_dict(),
        "trimmed": post.to_dict(),
        "five_number": fn.to_dict(),
        "trim_cuts": {"lower": cuts[0], "upper": cuts[1]},
        "rows": {"kept_after_filter": len(kept), "trimmed": int(trimmed.size)},
    }
    model_io.dump_json(out / "report_summary.json", summary)
    outputs.append("report/report_summary.json")
    write_manifest(workdir, "report", config, {"raw_csv": raw_csv}, outputs)
    click.echo(json.dumps(summary["trimmed"], indent=2, sort_keys=True))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except DuraflowError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
