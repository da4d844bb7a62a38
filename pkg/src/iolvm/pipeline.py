"""Experiment plumbing shared by the command line and the demos.

An experiment config is a JSON (or TOML) document::

    {
      "name": "waxman_single",
      "data": {"kind": "waxman", "n_train": 1500, "spec": {...}},
      "model": {"latent_dim": 2, "hidden": [128, 128]},
      "train": {...TrainConfig fields...},
      "vae_train": {...}, "po_train": {...},
      "eval": {"n_predict": 1000, "tau": 0.02, "n_z": 200, "n_costs": 100}
    }

Shipped configs live in ``iolvm/configs`` and are found by name.
"""

from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

from . import datagen
from .datasets import Dataset, load_dataset
from .errors import ConfigError
from .model import IoLvm, PoBaseline, TrainConfig, VaeBaseline

CONFIG_DIR = Path(__file__).with_name("configs")
MODEL_KINDS = ("iolvm", "vae", "po")

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


def available_configs():
    return sorted(p.stem for p in CONFIG_DIR.glob("*.json"))


def resolve_config_path(name_or_path) -> Path:
    p = Path(name_or_path)
    if p.suffix in (".json", ".toml") and p.exists():
        return p
    # "waxman_single", "waxman_single.toml", "waxman_single.json" all map to the shipped file
    shipped = CONFIG_DIR / (p.stem + ".json")
    if shipped.exists():
        return shipped
    raise ConfigError(f"config {name_or_path!r} not found; shipped configs: {', '.join(available_configs())}")


def load_config(name_or_path) -> dict:
    path = resolve_config_path(name_or_path)
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as fh:
                cfg = tomllib.load(fh)
        else:
            with open(path) as fh:
                cfg = json.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for key in ("data", "train"):
        if key not in cfg:
            raise ConfigError(f"{path}: missing section {key!r}")
    cfg.setdefault("name", path.stem)
    cfg.setdefault("model", {})
    cfg.setdefault("eval", {})
    cfg["_path"] = str(path)
    return cfg


def with_seed(cfg: dict, seed) -> dict:
    """Copy of ``cfg`` with the training seed replaced (data seed untouched)."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        for key in ("train", "vae_train", "po_train"):
            if key in cfg:
                cfg[key]["seed"] = int(seed)
    return cfg


def train_config(cfg: dict, model_kind="iolvm", **overrides) -> TrainConfig:
    base = dict(cfg["train"])
    section = {"vae": "vae_train", "po": "po_train"}.get(model_kind)
    if section and section in cfg:
        base.update(cfg[section])
    base.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def generate_dataset(cfg: dict) -> Dataset:
    data = cfg["data"]
    kind = data.get("kind")
    try:
        if kind == "waxman":
            return datagen.gen_waxman_dataset(datagen.WaxmanSpec.from_dict(data.get("spec", {})))
        if kind == "tsp":
            return datagen.gen_tsp_dataset(datagen.TspCostSpec.from_dict(data.get("spec", {})))
    except TypeError as exc:
        raise ConfigError(f"bad data spec: {exc}") from exc
    raise ConfigError(f"data.kind must be 'waxman' or 'tsp', got {kind!r}")


def get_dataset(cfg: dict, data_path=None) -> Dataset:
    if data_path is not None:
        return load_dataset(data_path)
    return generate_dataset(cfg)


def split(cfg: dict, ds: Dataset):
    n_train = int(cfg["data"].get("n_train", len(ds)))
    return ds.split(n_train)


def build_model(cfg: dict, graph, kind="iolvm", latent_dim=None, seed=0):
    mcfg = cfg.get("model", {})
    k = int(latent_dim or mcfg.get("latent_dim", 2))
    hidden = tuple(mcfg.get("hidden", (128, 128)))
    if kind == "iolvm":
        return IoLvm(graph, k, hidden, seed=seed, decoder_hidden=mcfg.get("decoder_hidden"))
    if kind == "vae":
        return VaeBaseline(graph, k, tuple(mcfg.get("vae_hidden", hidden)), seed=seed)
    if kind == "po":
        return PoBaseline(graph)
    raise ConfigError(f"model must be one of {MODEL_KINDS}, got {kind!r}")


def load_model(kind, path, graph, tcfg=None):
    cls = {"iolvm": IoLvm, "vae": VaeBaseline, "po": PoBaseline}[kind]
    return cls.load(path, graph, tcfg)
