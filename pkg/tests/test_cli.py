import json

import pytest

from duraflow.cli import main
from duraflow.config import DEFAULT_CONFIG, load_config, resolve_seeds, save_config

from conftest import make_raw_csv

SMALL_CONFIG = {
    "seed": 9,
    "forest": {"n_trees": 5, "max_depth": 8, "min_samples_leaf": 5},
    "gbdt_short": {"n_rounds": 15, "learning_rate": 0.2, "early_stopping_rounds": None,
                   "min_samples_leaf": 5},
    "gbdt_long": {"n_rounds": 15, "learning_rate": 0.2, "early_stopping_rounds": None,
                  "min_samples_leaf": 5},
    "explain": {"sample_cap": 50},
}


def run(args) -> int:
    return main(args) or 0


def run_expect_exit(args, code):
    with pytest.raises(SystemExit) as excinfo:
        main(args)
    assert excinfo.value.code == code


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One small end-to-end workspace shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cliws")
    config_path = root / "config.json"
    config_path.write_text(json.dumps(SMALL_CONFIG), encoding="utf-8")
    assert run(["synth", "--rows", "900", "--seed", "9",
                "--workdir", str(root)]) == 0
    assert run(["preprocess", "--raw", str(root / "synthetic.csv"),
                "--config", str(config_path), "--workdir", str(root)]) == 0
    assert run(["train", "--config", str(config_path), "--workdir", str(root)]) == 0
    return root, config_path


def test_unknown_flag_is_usage_error(tmp_path):
    run_expect_exit(["synth", "--rows", "10", "--no-such-flag"], 2)


def test_unknown_subcommand_is_usage_error():
    run_expect_exit(["frobnicate"], 2)


def test_pipeline_artifacts_exist(workspace):
    root, _ = workspace
    for name in ("synthetic.csv", "dataset.json", "train.csv", "test.csv",
                 "model.json", "training_summary.json",
                 "manifest_synth.json", "manifest_preprocess.json", "manifest_train.json"):
        assert (root / name).exists(), name
    manifest = json.loads((root / "manifest_train.json").read_text())
    assert manifest["tool"] == "duraflow"
    assert all(v.startswith("sha256:") for v in manifest["inputs"].values())


def test_evaluate_writes_metrics(workspace):
    root, config_path = workspace
    assert run(["evaluate", "--model", str(root / "model.json"),
                "--data", str(root / "test.csv"),
                "--config", str(config_path), "--workdir", str(root)]) == 0
    metrics = json.loads((root / "report" / "metrics.json").read_text())
    assert set(metrics) >= {"combined", "classification", "branches",
                            "branch_models", "misroute_rate"}
    assert (root / "report" / "predictions.csv").exists()
    assert (root / "report" / "short_series.csv").exists()


def test_predict_writes_rows(workspace):
    root, config_path = workspace
    assert run(["predict", "--model", str(root / "model.json"),
                "--data", str(root / "test.csv"),
                "--config", str(config_path), "--workdir", str(root)]) == 0
    lines = (root / "report" / "predicted_minutes.csv").read_text().splitlines()
    assert lines[0] == "index,predicted_minutes,branch,proba_short"
    assert len(lines) > 10


def test_explain_summary(workspace):
    root, config_path = workspace
    assert run(["explain", "--model", str(root / "model.json"),
                "--data", str(root / "test.csv"), "--branch", "short",
                "--row-index", "0",
                "--config", str(config_path), "--workdir", str(root)]) == 0
    assert (root / "report" / "shap_summary_short.csv").exists()
    assert (root / "report" / "shap_summary_short.svg").exists()
    assert (root / "report" / "shap_row_short_0.csv").exists()


def test_report_bundle(workspace):
    root, config_path = workspace
    assert run(["report", "--raw", str(root / "synthetic.csv"),
                "--config", str(config_path), "--workdir", str(root)]) == 0
    report = root / "report"
    for name in ("duration_summary_pretrim.csv", "duration_summary_trimmed.csv",
                 "duration_boxplot.svg", "correlation_matrix.csv",
                 "distribution_temperature_f.csv", "category_counts_junction.csv",
                 "report_summary.json"):
        assert (report / name).exists(), name


def test_ingest_filter_and_reemit(workspace, tmp_path):
    root, config_path = workspace
    out = tmp_path / "ingested"
    assert run(["ingest", "--raw", str(root / "synthetic.csv"),
                "--config", str(config_path), "--workdir", str(out)]) == 0
    summary = json.loads((out / "ingest_summary.json").read_text())
    assert summary["parsed_records"] == 900
    assert summary["kept_after_filter"] < 900
    # the re-emitted file parses cleanly with identical headers
    from duraflow.ingest import parse_records

    again = parse_records(out / "filtered.csv", "strict")
    assert len(again.records) == summary["kept_after_filter"]


def test_train_single_class_exits_1(tmp_path, capsys):
    rows = [
        {"End_Time": f"2019-06-01 08:{40 + i % 20:02d}:00"} for i in range(40)
    ]
    raw = tmp_path / "oneclass.csv"
    raw.write_text(make_raw_csv(rows), encoding="utf-8")
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(SMALL_CONFIG), encoding="utf-8")
    assert run(["preprocess", "--raw", str(raw), "--config", str(config_path),
                "--workdir", str(tmp_path)]) == 0
    run_expect_exit(["train", "--config", str(config_path),
                     "--workdir", str(tmp_path)], 1)
    assert "SingleClassTraining" in capsys.readouterr().err


def test_missing_model_file_exits(tmp_path):
    run_expect_exit(["evaluate", "--model", str(tmp_path / "nope.json"),
                     "--data", str(tmp_path / "nope.csv")], 2)


def test_threads_env_fallback(monkeypatch):
    from duraflow.cli import _threads

    config = {"threads": 3}
    assert _threads(config, 5) == 5          # explicit flag wins
    monkeypatch.setenv("DURAFLOW_THREADS", "2")
    assert _threads(config, None) == 2       # env var next
    monkeypatch.delenv("DURAFLOW_THREADS")
    assert _threads(config, None) == 3       # config value last


def test_config_roundtrip(tmp_path):
    config = load_config(overrides={"seed": 3})
    path = tmp_path / "cfg.json"
    save_config(path, config)
    again = load_config(path)
    assert again == config


def test_config_seed_derivation():
    config = resolve_seeds({**json.loads(json.dumps(DEFAULT_CONFIG)), "seed": 100})
    assert config["split"]["seed"] == 100
    assert config["forest"]["random_state"] == 101
    assert config["gbdt_short"]["random_state"] == 102
    assert config["gbdt_long"]["random_state"] == 103
    assert config["explain"]["random_state"] == 104


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"mystery": 1}', encoding="utf-8")
    with pytest.raises(ValueError):
        load_config(path)


def test_synth_csv_accepted_by_strict_ingest(workspace):
    from duraflow.ingest import parse_records

    root, _ = workspace
    result = parse_records(root / "synthetic.csv", "strict")
    assert not result.diagnostics
