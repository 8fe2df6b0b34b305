"""Plain-text run configuration: key = value sections per experiment.

A config file has an optional [run] section (seed, workers, out, gamma)
and one section per experiment overriding its desk-scale defaults. Parsing
rejects unknown sections or keys, and parse -> serialize -> parse is the
identity on the parsed mapping.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError
from .experiments import EXPERIMENTS, ExperimentConfig, default_config

RUN_KEYS = {"seed", "workers", "out", "gamma"}
EXPERIMENT_KEYS = {
    "gamma": float,
    "n_schedule": "int_list",
    "m": int,
    "replicas": int,
    "radii": "float_list",
    "p": float,
    "beta_list": "float_list",
    "s_list": "float_list",
    "delta": float,
    "workers": int,
    "seed": int,
}

_FIELD_FOR_KEY = {
    "gamma": "gamma",
    "n_schedule": "N_schedule",
    "m": "M",
    "replicas": "replicas",
    "radii": "radii",
    "p": "p",
    "beta_list": "beta_list",
    "s_list": "s_list",
    "delta": "delta",
    "workers": "workers",
    "seed": "master_seed",
}


def parse_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    data: dict[str, dict[str, str]] = {}
    bad: list[str] = []
    for section in parser.sections():
        if section == "run":
            allowed = RUN_KEYS
        elif section in EXPERIMENTS:
            allowed = set(EXPERIMENT_KEYS)
        else:
            bad.append(f"[{section}]")
            continue
        data[section] = {}
        for key, value in parser.items(section):
            if key not in allowed:
                bad.append(f"[{section}] {key}")
            else:
                data[section][key] = value.strip()
    if bad:
        raise ConfigError("unknown config entries: " + ", ".join(sorted(bad)))
    return data


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def serialize_config(data: dict) -> str:
    out = io.StringIO()
    for section in sorted(data):
        out.write(f"[{section}]\n")
        for key in sorted(data[section]):
            out.write(f"{key} = {data[section][key]}\n")
        out.write("\n")
    return out.getvalue()


def apply_overrides(data: dict, overrides) -> dict:
    """Apply repeatable ``section.key=value`` command-line overrides."""
    merged = {s: dict(kv) for s, kv in data.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        target, value = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override {item!r} is missing the section prefix")
        section, key = target.split(".", 1)
        section, key = section.strip(), key.strip()
        merged.setdefault(section, {})[key] = value.strip()
    # re-validate through the canonical path
    return parse_config_text(serialize_config(merged))


def _convert(key: str, raw: str):
    kind = EXPERIMENT_KEYS[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        items = [v for v in raw.replace(",", " ").split() if v]
        if kind == "int_list":
            return tuple(int(v) for v in items)
        return tuple(float(v) for v in items)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from exc


def experiment_config(
    name: str,
    data: dict | None = None,
    seed: int | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Desk-scale default for ``name`` overlaid with config-file values."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}")
    cfg = default_config(name)
    updates: dict = {}
    data = data or {}
    run = data.get("run", {})
    if "seed" in run:
        updates["master_seed"] = _convert("seed", run["seed"])
    if "workers" in run:
        updates["workers"] = _convert("workers", run["workers"])
    if "gamma" in run:
        updates["gamma"] = _convert("gamma", run["gamma"])
    for key, raw in data.get(name, {}).items():
        updates[_FIELD_FOR_KEY[key]] = _convert(key, raw)
    if seed is not None:
        updates["master_seed"] = seed
    if workers is not None:
        updates["workers"] = workers
    try:
        return replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
