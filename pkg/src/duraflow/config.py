"""Run configuration: JSON file + flag overrides, echoed with every artifact.

A single top-level "seed" (when set) derives every component seed, so one
number pins the whole run. After resolution all seeds are concrete; the
effective config is what manifests record and what reruns should replay.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

TOOL_NAME = "duraflow"
TOOL_VERSION = "0.1.0"

DEFAULT_CONFIG: dict = {
    "seed": None,
    "threads": 1,
    "filter": {
        "state": "TX",
        "source": "Source1",
        "date_min": "2016-02-01 00:00:00",
        "date_max": "2021-12-31 23:59:59",
    },
    "preprocess": {
        "threshold_minutes": 164.0,
        "threshold_mode": "fixed",
        "lower_q": 0.05,
        "upper_q": 0.95,
        "fit_on": "train",
        "drop_turning_loop": False,
        "drop_distance": False,
    },
    "split": {"train_fraction": 0.75, "seed": 7, "stratified": False},
    "forest": {
        "n_trees": 100,
        "mtry": None,
        "max_depth": 16,
        "min_samples_leaf": 5,
        "min_gain": 1e-7,
        "max_bins": 255,
        "bootstrap": True,
        "random_state": 11,
    },
    "gbdt_short": {
        "n_rounds": 500,
        "learning_rate": 0.05,
        "max_leaves": 31,
        "max_depth": None,
        "min_samples_leaf": 20,
        "min_gain": 1e-7,
        "lambda_l2": 1.0,
        "max_bins": 255,
        "early_stopping_rounds": 50,
        "validation_fraction": 0.1,
        "random_state": 12,
    },
    "gbdt_long": {
        "n_rounds": 500,
        "learning_rate": 0.05,
        "max_leaves": 31,
        "max_depth": None,
        "min_samples_leaf": 20,
        "min_gain": 1e-7,
        "lambda_l2": 1.0,
        "max_bins": 255,
        "early_stopping_rounds": 50,
        "validation_fraction": 0.1,
        "random_state": 13,
    },
    "explain": {"sample_cap": 10000, "random_state": 14},
    "report": {
        "first_n": 100,
        "histogram_bins": 64,
        "distribution_columns": ["Temperature(F)", "Pressure(in)", "Wind_Chill(F)"],
        "category_columns": ["Bump", "Junction"],
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults <- config file <- flag overrides, then seed derivation."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(DEFAULT_CONFIG)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = _deep_merge(config, file_cfg)
    if overrides:
        config = _deep_merge(config, overrides)
    return resolve_seeds(config)


def resolve_seeds(config: dict) -> dict:
    config = copy.deepcopy(config)
    seed = config.get("seed")
    if seed is not None:
        seed = int(seed)
        config["split"]["seed"] = seed
        config["forest"]["random_state"] = seed + 1
        config["gbdt_short"]["random_state"] = seed + 2
        config["gbdt_long"]["random_state"] = seed + 3
        config["explain"]["random_state"] = seed + 4
    return config


def save_config(path, config: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def write_manifest(
    workdir, subcommand: str, config: dict, inputs: dict, outputs: list[str]
) -> Path:
    """Provenance file written beside every run's artifacts."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "subcommand": subcommand,
        "config": config,
        "inputs": {name: sha256_file(p) for name, p in inputs.items()},
        "outputs": sorted(outputs),
    }
    path = workdir / f"manifest_{subcommand}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
