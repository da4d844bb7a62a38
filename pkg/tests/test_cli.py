import csv
import json

import numpy as np
import pytest

from iolvm import cli, pipeline
from iolvm.datasets import load_dataset, save_dataset


TINY = {
    "name": "tiny",
    "data": {
        "kind": "waxman",
        "n_train": 40,
        "spec": {"n_nodes": 40, "alpha": 0.6, "beta_w": 0.4, "n_paths": 50, "requirement_mode": "single"},
    },
    "model": {"latent_dim": 2, "hidden": [16]},
    "train": {"beta": 0.01, "sigma_eps": 0.05, "sigma_eps_mode": "absolute", "learning_rate": 1e-3, "batch_size": 10, "epochs": 2},
    "eval": {"n_predict": 50, "n_z": 10, "n_costs": 10},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


def npz_arrays(path):
    with np.load(path) as data:
        return {k: data[k] for k in data.files}


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_shipped_configs_load():
    names = pipeline.available_configs()
    for required in ("waxman_single", "waxman_multi", "burma14_h3", "burma14_h50", "bayg29_h3", "bayg29_h50"):
        assert required in names
    for name in names:
        cfg = pipeline.load_config(name)
        pipeline.train_config(cfg, "iolvm")
    # the .toml spelling resolves to the shipped file
    assert pipeline.load_config("waxman_single.toml")["name"] == "waxman_single"


def test_toml_config(tmp_path):
    (tmp_path / "t.toml").write_text(
        'name = "t"\n[data]\nkind = "tsp"\nn_train = 5\n[data.spec]\nn_nodes = 5\nn_samples = 8\n[train]\nepochs = 1\n'
    )
    cfg = pipeline.load_config(tmp_path / "t.toml")
    assert len(pipeline.generate_dataset(cfg)) == 8


def test_train_and_downstream_commands(tmp_path, tiny_config):
    run = tmp_path / "run"
    assert cli.main(["train", "--config", str(tiny_config), "--out", str(run), "--seed", "3"]) == 0
    for name in ("manifest.json", "metrics.csv", "training_log.csv", "checkpoint.npz", "data.jsonl"):
        assert (run / name).exists()
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["command"] == "train" and manifest["seed"] == 3
    assert len(read_csv(run / "training_log.csv")) == 2

    assert cli.main(["reconstruct", "--run", str(run)]) == 0
    rows = {r["metric"]: float(r["value"]) for r in read_csv(run / "reconstruct" / "metrics.csv")}
    assert {"full_match", "edge_recall", "iou", "euclidean_full_match"} <= set(rows)
    assert rows["feasible_fraction"] == 1.0

    assert cli.main(["predict-dist", "--run", str(run)]) == 0
    rows = {r["metric"]: float(r["value"]) for r in read_csv(run / "predict-dist" / "metrics.csv")}
    assert 0 <= rows["jsd"] <= 1 and rows["n_predicted"] == 50
    lines = (run / "predict-dist" / "paths.jsonl").read_text().splitlines()
    assert sum(json.loads(line)["count"] for line in lines) == 50

    assert cli.main(["denoise", "--run", str(run)]) == 0
    assert cli.main(["outlier-score", "--run", str(run), "--tau", "0.1"]) == 0
    scores = read_csv(run / "outlier-score" / "scores.csv")
    assert len(scores) == 10 and all(float(s["score"]) >= 0 for s in scores)

    assert cli.main(["export-latents", "--run", str(run), "--label", "agent"]) == 0
    lat = read_csv(run / "export-latents" / "latents.csv")
    assert len(lat) == 40 and set(lat[0]) == {"sample_id", "z_1", "z_2", "label"}

    # resume continues to the requested epoch count
    assert cli.main(["train", "--config", str(tiny_config), "--out", str(run), "--seed", "3", "--epochs", "3", "--resume"]) == 0
    assert len(read_csv(run / "training_log.csv")) == 3


@pytest.mark.parametrize("model", ["iolvm", "vae", "po"])
def test_training_is_deterministic(tmp_path, tiny_config, model):
    outs = []
    for name in ("a", "b"):
        assert cli.main(["train", "--config", str(tiny_config), "--model", model, "--out", str(tmp_path / name), "--seed", "7"]) == 0
        outs.append((tmp_path / name / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]


def test_meta_labels_do_not_reach_training(tmp_path, tiny_config):
    cfg = pipeline.load_config(tiny_config)
    ds = pipeline.generate_dataset(cfg)
    save_dataset(ds, tmp_path / "with_meta.jsonl")
    stripped = ds.without_meta()
    save_dataset(stripped, tmp_path / "no_meta.jsonl")
    assert load_dataset(tmp_path / "with_meta.jsonl").meta[0] != {}
    for name in ("with_meta", "no_meta"):
        assert cli.main(["train", "--config", str(tiny_config), "--data", str(tmp_path / f"{name}.jsonl"),
                         "--out", str(tmp_path / name), "--seed", "1"]) == 0
    a = npz_arrays(tmp_path / "with_meta" / "checkpoint.npz")
    b = npz_arrays(tmp_path / "no_meta" / "checkpoint.npz")
    assert a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def test_gen_commands(tmp_path, tiny_config):
    assert cli.main(["gen-waxman", "--config", str(tiny_config), "--out", str(tmp_path / "g")]) == 0
    ds = load_dataset(tmp_path / "g" / "data.jsonl")
    assert len(ds) == 50
    # wrong generator for the config kind is a config error
    assert cli.main(["gen-tsp", "--config", str(tiny_config), "--out", str(tmp_path / "h")]) == 2


def test_sweep_beta(tmp_path, tiny_config):
    assert cli.main(["sweep-beta", "--config", str(tiny_config), "--out", str(tmp_path / "s"), "--betas", "0.01,10", "--epochs", "1"]) == 0
    rows = read_csv(tmp_path / "s" / "metrics.csv")
    assert [r["model"] for r in rows] == ["iolvm:beta=0.01"] * 2 + ["iolvm:beta=10"] * 2


def test_error_json_and_exit_codes(tmp_path, tiny_config, capsys):
    assert cli.main(["train", "--config", "no_such_config", "--out", str(tmp_path / "x")]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["category"] == "config" and err["exit_code"] == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"edges": [0, 1], "source": 0, "target": 1}\n')
    save_dataset(pipeline.generate_dataset(pipeline.load_config(tiny_config)), tmp_path / "ok.jsonl", graph_path=tmp_path / "bad.graph.json")
    assert cli.main(["train", "--config", str(tiny_config), "--data", str(bad), "--out", str(tmp_path / "y")]) == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["category"] == "data"
    assert cli.main(["reconstruct", "--run", str(tmp_path / "nowhere")]) == 2
    assert cli.main(["train", "--config", str(tiny_config), "--out", str(tmp_path / "z"), "--threads", "0"]) == 2
