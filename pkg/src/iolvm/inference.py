"""Post-training tools: latent KDE, path-distribution prediction,
denoising and quantile outlier scores."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import EmptyInputError, InvalidTauError, LengthMismatchError
from .graph import Requirement, validate_solution


@dataclass
class LatentKde:
    """Gaussian KDE: ``centers`` (n, k) with one bandwidth per dimension."""

    centers: np.ndarray
    bandwidth: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.bandwidth = np.broadcast_to(
            np.asarray(self.bandwidth, dtype=np.float64), (self.centers.shape[1],)
        ).copy()
        if len(self.centers) == 0:
            raise EmptyInputError("KDE needs at least one center")
        if not np.all(np.isfinite(self.bandwidth)) or np.any(self.bandwidth < 0):
            raise ValueError("bandwidth must be finite and non-negative")

    @property
    def dim(self):
        return self.centers.shape[1]


def scott_bandwidth(latents) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    n, k = Z.shape
    std = Z.std(axis=0, ddof=1) if n > 1 else np.zeros(k)
    bw = n ** (-1.0 / (k + 4)) * std
    # a dimension with no spread gets unit bandwidth
    return np.where((std > 0) & np.isfinite(std), bw, 1.0)


def kde_fit(latents) -> LatentKde:
    Z = np.asarray(latents, dtype=np.float64)
    if Z.size == 0:
        raise EmptyInputError("cannot fit a KDE to no points")
    Z = np.atleast_2d(Z)
    return LatentKde(Z.copy(), scott_bandwidth(Z))


def kde_density(kde: LatentKde, points) -> np.ndarray:
    """Density of the KDE at ``points`` (m, k)."""
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[1] != kde.dim:
        raise LengthMismatchError("point dimension differs from KDE dimension")
    h = kde.bandwidth
    diff = (P[:, None, :] - kde.centers[None, :, :]) / h
    log_k = -0.5 * np.sum(diff**2, axis=-1) - np.sum(np.log(h)) - 0.5 * kde.dim * np.log(2 * np.pi)
    return np.exp(log_k).mean(axis=1)


def kde_sample(kde: LatentKde, n: int, rng=None) -> np.ndarray:
    """``n`` draws: a uniformly chosen center plus bandwidth-scaled Gaussian noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    pick = rng.integers(len(kde.centers), size=n)
    return kde.centers[pick] + kde.bandwidth * rng.standard_normal((n, kde.dim))


# --------------------------------------------------------------------------


@dataclass
class PathDistribution:
    samples: List[tuple]  # (solution vector, count), most frequent first
    total: int
    requirement: Requirement = field(default_factory=Requirement)

    def __post_init__(self):
        if sum(c for _, c in self.samples) != self.total:
            raise ValueError("counts must sum to total")

    def __len__(self):
        return len(self.samples)

    def edge_usage(self, normalize=False) -> np.ndarray:
        counts = sum(c * x.astype(np.float64) for x, c in self.samples)
        if normalize:
            return counts / counts.sum()
        return counts

    def frequencies(self) -> np.ndarray:
        return np.array([c for _, c in self.samples], dtype=np.float64) / self.total

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for x, c in self.samples:
                fh.write(json.dumps({"edge_ids": [int(e) for e in np.flatnonzero(x)], "count": int(c)}) + "\n")


def aggregate(X, p=None) -> PathDistribution:
    X = np.atleast_2d(np.asarray(X, dtype=np.int8))
    counts = Counter(row.tobytes() for row in X)
    first = {}
    for row in X:
        first.setdefault(row.tobytes(), row)
    samples = sorted(((first[k].copy(), c) for k, c in counts.items()), key=lambda s: (-s[1], tuple(np.flatnonzero(s[0]))))
    return PathDistribution(samples, len(X), p if p is not None else Requirement())


def predict_distribution(m, kde: LatentKde, p: Requirement, n: int, rng=None, threads=1) -> PathDistribution:
    """Solutions of the unperturbed solver on costs decoded from ``n`` KDE draws."""
    Z = kde_sample(kde, n, rng)
    X = m.solve_costs(m.decode_cost(Z), [p] * n, threads=threads)
    return aggregate(X, p)


def denoise(m, x, p: Requirement):
    """Encode, take the posterior mean, decode and solve."""
    return m.reconstruct(np.asarray(x)[None, :], [p])[0]


def quantile(values, tau) -> float:
    if not 0.0 < tau <= 1.0:
        raise InvalidTauError(f"tau must lie in (0, 1], got {tau}")
    return float(np.quantile(np.sort(np.asarray(values, dtype=np.float64)), tau, method="linear"))


@dataclass
class OutlierDraws:
    """Cost samples and candidate solutions reused across many scored paths."""

    costs: np.ndarray  # (n_costs, E)
    candidates: np.ndarray  # (n_z, E)


def outlier_draws(m, kde, p: Requirement, n_z=200, n_costs=100, rng=None) -> OutlierDraws:
    rng = np.random.default_rng(rng)
    Y = m.decode_cost(kde_sample(kde, n_costs, rng))
    Zc = kde_sample(kde, n_z, rng)
    cand = m.solve_costs(m.decode_cost(Zc), [p] * n_z)
    return OutlierDraws(Y, cand)


def outlier_distances(x, draws: OutlierDraws) -> np.ndarray:
    """``d_j`` = RMSE over cost samples of ``<x, y_i> - <x_hat_j, y_i>``."""
    x = np.asarray(x, dtype=np.float64)
    own = draws.costs @ x  # (n_costs,)
    cand = draws.costs @ draws.candidates.T.astype(np.float64)  # (n_costs, n_z)
    return np.sqrt(np.mean((own[:, None] - cand) ** 2, axis=0))


def outlier_score(m, kde, x, p: Requirement, tau=0.02, n_z=200, n_costs=100, rng=None, draws=None) -> float:
    """Low quantile of the cost-projected distance between ``x`` and inferred solutions.

    Pass ``draws`` (from :func:`outlier_draws`) to score many paths with the same
    samples; otherwise they are drawn from ``rng``.
    """
    if not 0.0 < tau <= 1.0:
        raise InvalidTauError(f"tau must lie in (0, 1], got {tau}")
    report = validate_solution(m.graph, np.asarray(x), p)
    if not report.feasible:
        from .errors import InfeasibleSampleError

        raise InfeasibleSampleError(f"path is infeasible: {report.failure.value}")
    if draws is None:
        draws = outlier_draws(m, kde, p, n_z, n_costs, rng)
    return quantile(outlier_distances(x, draws), tau)


def export_latents(path, mu, labels=None):
    mu = np.atleast_2d(mu)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", *[f"z_{i + 1}" for i in range(mu.shape[1])], *(["label"] if labels is not None else [])])
        for i, z in enumerate(mu):
            row = [i, *[f"{v:.10g}" for v in z]]
            if labels is not None:
                row.append(labels[i])
            w.writerow(row)
