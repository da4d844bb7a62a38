"""Evaluation routines shared by the command line, the demos and the tests."""

from __future__ import annotations

import numpy as np

from . import inference, metrics, pipeline
from .datagen import detour_path, euclidean_solutions, one_edge_detour
from .graph import validate_solution
from .model import IoLvm, PoBaseline, VaeBaseline, fit, iou_rows


def latent_means(model, data):
    mu, _ = model.encode(data.X, list(data.requirements))
    return mu


def feasible_rows(g, X, reqs):
    return np.array([validate_solution(g, x, p).feasible for x, p in zip(X, reqs)])


def reconstruction_metrics(model, data, threads=1):
    """Round-trip reconstructions and their scores.  Returns ``(X_hat, dict)``."""
    reqs = list(data.requirements)
    if isinstance(model, IoLvm):
        X = model.reconstruct(data.X, reqs, threads=threads)
    else:
        X = model.reconstruct(data.X, reqs)
    feas = feasible_rows(model.graph, X, reqs)
    out = {
        "full_match": metrics.full_match_rate(data.X, list(X), feas),
        "edge_recall": metrics.edge_recall(data.X, list(X)),
        "iou": float(iou_rows(data.X, X).mean()),
        "feasible_fraction": float(feas.mean()),
        "distinct_paths": metrics.distinct_path_count(X),
    }
    return X, out


def euclidean_metrics(data):
    base = euclidean_solutions(data)
    return {
        "euclidean_full_match": metrics.full_match_rate(data.X, list(base)),
        "euclidean_edge_recall": metrics.edge_recall(data.X, list(base)),
    }


def predict(model, train, p, n, rng, threads=1):
    """Path distribution for requirement ``p``: KDE over training latents, or PO sampling."""
    rng = np.random.default_rng(rng)
    if isinstance(model, PoBaseline):
        return inference.aggregate(model.sample(p, n, rng, threads=threads), p)
    kde = inference.kde_fit(latent_means(model, train))
    if isinstance(model, VaeBaseline):
        return inference.aggregate(model.sample_solutions(inference.kde_sample(kde, n, rng)), p)
    return inference.predict_distribution(model, kde, p, n, rng, threads=threads)


def distribution_metrics(g, dist, held):
    """JSD of normalised edge usage and RMSE of counts rescaled to the held-out size."""
    out = {"n_predicted": dist.total, "distinct_paths": len(dist)}
    if len(held):
        obs = held.X.sum(axis=0).astype(np.float64)
        pred = dist.edge_usage()
        out["jsd"] = metrics.js_divergence(pred / pred.sum(), obs / obs.sum())
        out["rmse"] = metrics.rmse_edge_usage(pred * len(held) / dist.total, obs)
    feas = feasible_rows(g, [x for x, _ in dist.samples], [dist.requirement] * len(dist))
    out["feasible_fraction"] = float(sum(c for (_, c), f in zip(dist.samples, feas) if f) / dist.total)
    return out


def outlier_scores(model, train, data, tau=0.02, n_z=200, n_costs=100, rng=None):
    """Outlier score of every record, latent draws cached per requirement."""
    rng = np.random.default_rng(rng)
    kde = inference.kde_fit(latent_means(model, train))
    cache = {}
    scores = []
    for x, p in zip(data.X, data.requirements):
        if p not in cache:
            cache[p] = inference.outlier_draws(model, kde, p, n_z, n_costs, rng)
        scores.append(inference.outlier_score(model, kde, x, p, tau, draws=cache[p]))
    return np.array(scores), kde, cache


def detour_check(model, train, test, box, tau=0.02, n_z=200, n_costs=100, rng=None):
    """Score of a box-detour path against held-out scores for the same requirement.

    Returns ``(detour_score, held_scores)``.
    """
    p = test.requirements[0]
    held = test.subset([i for i, q in enumerate(test.requirements) if q == p])
    scores, kde, cache = outlier_scores(model, train, held, tau, n_z, n_costs, rng)
    x = detour_path(model.graph, p, box)
    return inference.outlier_score(model, kde, x, p, tau, draws=cache[p]), scores


def denoise_check(model, test, n=50, rng=None):
    """Corrupt ``n`` test paths with a one-edge detour and denoise them.

    Returns mean IoU to the clean path before and after denoising.
    """
    rng = np.random.default_rng(rng)
    clean, corrupt, reqs = [], [], []
    for x, p in zip(test.X, test.requirements):
        bad = one_edge_detour(model.graph, x, p, rng)
        if bad is None:
            continue
        clean.append(x)
        corrupt.append(bad)
        reqs.append(p)
        if len(clean) == n:
            break
    clean, corrupt = np.array(clean), np.array(corrupt)
    out = np.array([inference.denoise(model, x, p) for x, p in zip(corrupt, reqs)])
    return float(iou_rows(clean, corrupt).mean()), float(iou_rows(clean, out).mean()), out


def sweep_beta(cfg, train, test, betas, epochs=None, latent_dim=None, threads=1):
    """Train one model per beta; distinct reconstructions on the evaluation split and train IoU."""
    out = []
    eval_set = test if len(test) else train
    for beta in betas:
        tcfg = pipeline.train_config(cfg, "iolvm", beta=beta, epochs=epochs, threads=threads)
        model = pipeline.build_model(cfg, train.graph, "iolvm", latent_dim, seed=tcfg.seed)
        fit(model, train, tcfg)
        rec_train = model.reconstruct(train.X, list(train.requirements), threads=threads)
        rec_eval = model.reconstruct(eval_set.X, list(eval_set.requirements), threads=threads)
        out.append({
            "beta": beta,
            "seed": tcfg.seed,
            "distinct_paths": metrics.distinct_path_count(rec_eval),
            "train_iou": float(iou_rows(train.X, rec_train).mean()),
        })
    return out
