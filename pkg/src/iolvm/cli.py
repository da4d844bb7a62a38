"""``iolvm`` command line: data generation, training and evaluation runs.

Every command writes into a run directory: ``manifest.json`` plus the
artifacts it produced (``metrics.csv``, ``training_log.csv``,
``latents.csv``, ``paths.jsonl``, ``checkpoint.npz``).  Commands that
evaluate a trained model take ``--run`` (the training run directory) and
write into ``<run>/<command>`` unless ``--out`` is given.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import evaluation, inference, metrics, pipeline
from .datasets import load_dataset, save_dataset, training_view
from .errors import ConfigError, IolvmError
from .graph import Requirement, validate_solution
from .model import append_training_log, fit, iou_rows
from .neural import config_hash

THREADS_ENV = "IOLVM_THREADS"


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer") from None


def _git_rev():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        return out.stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        return None


class Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, command, out_dir, cfg=None, seed=None, inputs=None):
        self.command = command
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.seed = seed
        self.inputs = {k: str(v) for k, v in (inputs or {}).items() if v is not None}
        self.outputs = {}
        self.t0 = time.time()

    def path(self, key, name):
        p = self.dir / name
        self.outputs[key] = str(p)
        return p

    def write_metrics(self, rows, dataset="", model=""):
        """``rows``: list of (name, value) or MetricReport."""
        path = self.path("metrics", "metrics.csv")
        if path.exists():
            path.unlink()
        chash = config_hash(_public(self.cfg)) if self.cfg else ""
        reports = []
        for r in rows:
            if not isinstance(r, metrics.MetricReport):
                name, value = r
                r = metrics.MetricReport(name, float(value), dataset=dataset, model=model, seed=self.seed, config_hash=chash)
            reports.append(r)
        metrics.append_results(path, reports)
        return path

    def finish(self, extra=None):
        manifest = {
            "command": self.command,
            "config_path": self.cfg.get("_path") if self.cfg else None,
            "config_name": self.cfg.get("name") if self.cfg else None,
            "config_hash": config_hash(_public(self.cfg)) if self.cfg else None,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "git_rev": _git_rev(),
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(self.t0)),
            "elapsed_s": round(time.time() - self.t0, 3),
            "argv": sys.argv[1:],
        }
        if extra:
            manifest.update(extra)
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        return manifest


def _public(cfg):
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


# --------------------------------------------------------------------------
# trained-run helpers


def _read_run(run_dir):
    run_dir = Path(run_dir)
    try:
        with open(run_dir / "manifest.json") as fh:
            manifest = json.load(fh)
        with open(run_dir / "config.json") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{run_dir} is not a training run directory ({exc.filename} missing)") from None
    if manifest.get("command") != "train":
        raise ConfigError(f"{run_dir} holds a {manifest.get('command')!r} run, expected 'train'")
    return manifest, cfg


def _load_trained(run_dir):
    manifest, cfg = _read_run(run_dir)
    run_dir = Path(run_dir)
    ds = load_dataset(run_dir / "data.jsonl")
    kind = manifest["model"]
    tcfg = pipeline.train_config(cfg, kind)
    model = pipeline.load_model(kind, run_dir / "checkpoint.npz", ds.graph, tcfg)
    train, test = pipeline.split(cfg, ds)
    return manifest, cfg, model, kind, train, test


def _out_dir(args, command):
    return Path(args.out) if args.out else Path(args.run) / command


def _write_paths(path, X, reqs=None):
    with open(path, "w") as fh:
        for i, x in enumerate(np.atleast_2d(X)):
            rec = {"edges": [int(e) for e in np.flatnonzero(x)]}
            if reqs is not None:
                rec["source"], rec["target"] = reqs[i].source, reqs[i].target
            fh.write(json.dumps(rec) + "\n")


# --------------------------------------------------------------------------
# commands


def cmd_gen(args, kind):
    cfg = pipeline.load_config(args.config)
    if cfg["data"].get("kind") != kind:
        raise ConfigError(f"config {cfg['name']} describes {cfg['data'].get('kind')!r} data, not {kind!r}")
    if args.data_seed is not None:
        cfg["data"].setdefault("spec", {})["seed"] = args.data_seed
    run = Run(f"gen-{kind}", args.out, cfg, seed=cfg["data"].get("spec", {}).get("seed", 0))
    ds = pipeline.generate_dataset(cfg)
    gpath = save_dataset(ds, run.path("data", "data.jsonl"))
    run.outputs["graph"] = str(gpath)
    run.write_metrics([("n_records", len(ds)), ("n_nodes", ds.graph.n_nodes), ("n_edges", ds.graph.n_edges),
                       ("distinct_solutions", metrics.distinct_path_count(ds.X))], dataset=cfg["name"])
    run.finish()
    return 0


def cmd_train(args):
    cfg = pipeline.with_seed(pipeline.load_config(args.config), args.seed)
    tcfg = pipeline.train_config(cfg, args.model, epochs=args.epochs, threads=args.threads)
    out = Path(args.out)
    ckpt = out / "checkpoint.npz"
    data_path = args.data
    if args.resume and ckpt.exists():
        data_path = out / "data.jsonl"
    ds = pipeline.get_dataset(cfg, data_path)
    run = Run("train", out, cfg, seed=tcfg.seed, inputs={"data": data_path})
    if data_path is None or Path(data_path) != out / "data.jsonl":
        save_dataset(ds, out / "data.jsonl")
    run.outputs["data"] = str(out / "data.jsonl")
    with open(run.path("config", "config.json"), "w") as fh:
        json.dump(_public(cfg), fh, indent=2, sort_keys=True)
    train, test = pipeline.split(cfg, ds)
    train_only = training_view(train)  # meta labels never reach training
    log_path = run.path("training_log", "training_log.csv")
    if args.resume and ckpt.exists():
        model = pipeline.load_model(args.model, ckpt, ds.graph, tcfg)
    else:
        if log_path.exists():
            log_path.unlink()
        model = pipeline.build_model(cfg, ds.graph, args.model, args.latent_dim, seed=tcfg.seed)
    reports = fit(model, train_only, tcfg, log_path=log_path)
    model.save(run.path("checkpoint", "checkpoint.npz"), tcfg)
    last = reports[-1] if reports else None
    rows = [("epochs", model.epoch)]
    if last is not None:
        rows += [("train_loss", last.loss), ("train_fy", last.fy), ("train_kl", last.kl),
                 ("train_iou", last.iou), ("train_distinct_paths", last.distinct_paths)]
    run.write_metrics(rows, dataset=cfg["name"], model=args.model)
    run.finish({"model": args.model, "train_config": tcfg.to_dict()})
    return 0


def cmd_reconstruct(args):
    manifest, cfg, model, kind, train, test = _load_trained(args.run)
    run = Run("reconstruct", _out_dir(args, "reconstruct"), cfg, manifest.get("seed"), {"run": args.run})
    data = train if args.split == "train" else test
    X, scores = evaluation.reconstruction_metrics(model, data, args.threads)
    scores.update(evaluation.euclidean_metrics(data))
    rows = list(scores.items())
    run.write_metrics(rows, dataset=f"{cfg['name']}:{args.split}", model=kind)
    _write_paths(run.path("paths", "paths.jsonl"), X, list(data.requirements))
    run.finish()
    return 0


def _fixed_requirement(data):
    reqs = set(data.requirements)
    if len(reqs) != 1:
        raise ConfigError("predict-dist needs a single source/target dataset (or pass --source/--target)")
    return next(iter(reqs))


def cmd_predict_dist(args):
    manifest, cfg, model, kind, train, test = _load_trained(args.run)
    run = Run("predict-dist", _out_dir(args, "predict-dist"), cfg, manifest.get("seed"), {"run": args.run})
    if args.source is not None and args.target is not None:
        p = Requirement(args.source, args.target)
        held = test.subset([i for i, q in enumerate(test.requirements) if q == p])
    else:
        p = _fixed_requirement(test)
        held = test
    n = args.n or int(cfg["eval"].get("n_predict", len(held) or 1000))
    rng = np.random.default_rng([int(manifest.get("seed") or 0), 7])
    dist = evaluation.predict(model, train, p, n, rng, threads=args.threads)
    rows = list(evaluation.distribution_metrics(model.graph, dist, held).items())
    run.write_metrics(rows, dataset=cfg["name"], model=kind)
    dist.to_jsonl(run.path("paths", "paths.jsonl"))
    run.finish({"requirement": [p.source, p.target]})
    return 0


def _require_iolvm(kind, command):
    if kind != "iolvm":
        raise ConfigError(f"{command} needs an iolvm run, got {kind!r}")


def cmd_denoise(args):
    manifest, cfg, model, kind, train, test = _load_trained(args.run)
    _require_iolvm(kind, "denoise")
    run = Run("denoise", _out_dir(args, "denoise"), cfg, manifest.get("seed"), {"run": args.run, "input": args.input})
    data = load_dataset(args.input, graph=model.graph) if args.input else test
    X = model.reconstruct(data.X, list(data.requirements), threads=args.threads)
    feas = evaluation.feasible_rows(model.graph, X, data.requirements)
    rows = [
        ("n_paths", len(X)),
        ("iou_to_input", float(iou_rows(data.X, X).mean())),
        ("unchanged_fraction", float(np.mean(np.all(data.X == X, axis=1)))),
        ("feasible_fraction", float(feas.mean())),
    ]
    run.write_metrics(rows, dataset=cfg["name"], model=kind)
    _write_paths(run.path("paths", "paths.jsonl"), X, list(data.requirements))
    run.finish()
    return 0


def cmd_outlier_score(args):
    manifest, cfg, model, kind, train, test = _load_trained(args.run)
    _require_iolvm(kind, "outlier-score")
    run = Run("outlier-score", _out_dir(args, "outlier-score"), cfg, manifest.get("seed"), {"run": args.run, "input": args.input})
    data = load_dataset(args.input, graph=model.graph) if args.input else test
    ev = cfg["eval"]
    tau = args.tau if args.tau is not None else float(ev.get("tau", 0.02))
    n_z, n_costs = int(ev.get("n_z", 200)), int(ev.get("n_costs", 100))
    rng = np.random.default_rng([int(manifest.get("seed") or 0), 11])
    scores, _, _ = evaluation.outlier_scores(model, train, data, tau, n_z, n_costs, rng)
    with open(run.path("scores", "scores.csv"), "w") as fh:
        fh.write("index,source,target,score\n")
        for i, (s, p) in enumerate(zip(scores, data.requirements)):
            fh.write(f"{i},{p.source},{p.target},{s:.10g}\n")
    rows = [("tau", tau), ("n_paths", len(scores)), ("score_mean", float(scores.mean())),
            ("score_p95", float(np.quantile(scores, 0.95))), ("score_max", float(scores.max()))]
    run.write_metrics(rows, dataset=cfg["name"], model=kind)
    run.finish()
    return 0


def cmd_sweep_beta(args):
    cfg = pipeline.with_seed(pipeline.load_config(args.config), args.seed)
    betas = [float(b) for b in args.betas.split(",")]
    run = Run("sweep-beta", args.out, cfg, seed=cfg["train"].get("seed", 0), inputs={"data": args.data})
    ds = pipeline.get_dataset(cfg, args.data)
    train, test = pipeline.split(cfg, ds)
    rows = []
    for r in evaluation.sweep_beta(cfg, train, test, betas, args.epochs, args.latent_dim, args.threads):
        label = f"iolvm:beta={r['beta']:g}"
        rows += [metrics.MetricReport(key, float(r[key]), dataset=cfg["name"], model=label, seed=r["seed"])
                 for key in ("distinct_paths", "train_iou")]
    run.write_metrics(rows)
    run.finish({"betas": betas})
    return 0


def cmd_export_latents(args):
    manifest, cfg, model, kind, train, test = _load_trained(args.run)
    if kind == "po":
        raise ConfigError("the po baseline has no latent space")
    run = Run("export-latents", _out_dir(args, "export-latents"), cfg, manifest.get("seed"), {"run": args.run})
    data = train if args.split == "train" else test
    mu = evaluation.latent_means(model, data)
    labels = None
    if args.label:
        # labels are read from meta for plotting only, after training
        labels = [json.dumps(v) if isinstance(v, (list, dict)) else v for v in data.meta_column(args.label)]
    inference.export_latents(run.path("latents", "latents.csv"), mu, labels)
    run.finish()
    return 0


# --------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="iolvm", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, run=False):
        p.add_argument("--threads", type=int, default=None, help=f"solver worker threads (default ${THREADS_ENV} or 1)")
        if run:
            p.add_argument("--run", required=True, help="training run directory")
            p.add_argument("--out", default=None, help="output directory (default <run>/<command>)")

    for kind in ("waxman", "tsp"):
        p = sub.add_parser(f"gen-{kind}", help=f"generate a {kind} dataset")
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--data-seed", type=int, default=None)
        common(p)
        p.set_defaults(func=lambda a, k=kind: cmd_gen(a, k))

    p = sub.add_parser("train", help="train iolvm, vae or po")
    p.add_argument("--config", required=True)
    p.add_argument("--model", choices=pipeline.MODEL_KINDS, default="iolvm")
    p.add_argument("--out", required=True)
    p.add_argument("--data", default=None, help="dataset JSONL (default: generate from config)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--resume", action="store_true", help="continue from <out>/checkpoint.npz")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="full match, edge recall and IoU of reconstructions")
    p.add_argument("--split", choices=("train", "test"), default="test")
    common(p, run=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("predict-dist", help="path distribution for one source/target pair vs held-out paths")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--source", type=int, default=None)
    p.add_argument("--target", type=int, default=None)
    common(p, run=True)
    p.set_defaults(func=cmd_predict_dist)

    p = sub.add_parser("denoise", help="posterior-mean round trip of observed paths")
    p.add_argument("--input", default=None, help="dataset JSONL (default: test split)")
    common(p, run=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("outlier-score", help="quantile outlier score of observed paths")
    p.add_argument("--input", default=None, help="dataset JSONL (default: test split)")
    p.add_argument("--tau", type=float, default=None)
    common(p, run=True)
    p.set_defaults(func=cmd_outlier_score)

    p = sub.add_parser("sweep-beta", help="distinct reconstructions and train IoU across beta")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--betas", default="0.01,0.1,1,10")
    p.add_argument("--data", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--latent-dim", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_sweep_beta)

    p = sub.add_parser("export-latents", help="posterior means as CSV")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--label", default=None, help="meta key to attach as a label column")
    common(p, run=True)
    p.set_defaults(func=cmd_export_latents)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return args.func(args)
    except IolvmError as exc:
        err = {"error": type(exc).__name__, "category": exc.category, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        err = {"error": "FileNotFoundError", "category": "data", "message": str(exc), "exit_code": 3}
        print(json.dumps(err), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
