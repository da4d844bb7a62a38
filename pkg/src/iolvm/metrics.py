"""Evaluation metrics on solution vectors, edge-usage vectors and latents."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyGroundTruthError, EmptyInputError, LengthMismatchError, NotNormalizedError

NORM_TOL = 1e-9


def _same_length(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatchError(f"shapes {a.shape} and {b.shape} differ")
    return a, b


def js_divergence(freq_a, freq_b) -> float:
    """Jensen-Shannon divergence in bits between two distributions."""
    p, q = _same_length(freq_a, freq_b)
    for v in (p, q):
        if np.any(v < 0) or abs(v.sum() - 1.0) > NORM_TOL:
            raise NotNormalizedError("inputs must be non-negative and sum to 1")
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return np.sum(a[nz] * np.log2(a[nz] / m[nz]))

    return float(min(max(0.5 * kl(p) + 0.5 * kl(q), 0.0), 1.0))


def rmse_edge_usage(counts_a, counts_b) -> float:
    """Root mean squared difference of per-edge usage counts."""
    a, b = _same_length(counts_a, counts_b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def iou(x, x_hat) -> float:
    """Intersection over union of two edge sets (1 when both empty)."""
    a, b = _same_length(x, x_hat)
    a, b = a > 0, b > 0
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else np.count_nonzero(a & b) / union


def _pairs(truth, preds):
    truth = np.atleast_2d(np.asarray(truth))
    if len(truth) == 0 or truth.size == 0:
        raise EmptyInputError("no pairs given")
    if len(preds) != len(truth):
        raise LengthMismatchError("need one prediction per ground-truth solution")
    return truth, preds


def full_match_rate(truth, preds, feasible=None) -> float:
    """Fraction of predictions equal to the ground truth bit for bit.

    ``preds`` rows may be ``None`` (no output); rows flagged infeasible in
    ``feasible`` never count as matches.
    """
    truth, preds = _pairs(truth, preds)
    hits = 0
    for i, (x, xh) in enumerate(zip(truth, preds)):
        if xh is None or (feasible is not None and not feasible[i]):
            continue
        xh = np.asarray(xh)
        if xh.shape != x.shape:
            raise LengthMismatchError("prediction length differs from ground truth")
        hits += bool(np.array_equal(x != 0, xh != 0))
    return hits / len(truth)


def edge_recall(truth, preds) -> float:
    """Mean over pairs of ``|x & x_hat| / |x|``."""
    truth, preds = _pairs(truth, preds)
    total = 0.0
    for x, xh in zip(truth, preds):
        x = np.asarray(x) != 0
        if not x.any():
            raise EmptyGroundTruthError("ground-truth solution selects no edges")
        xh = np.zeros_like(x) if xh is None else np.asarray(xh) != 0
        total += np.count_nonzero(x & xh) / np.count_nonzero(x)
    return total / len(truth)


def cluster_purity(latents, labels, n_clusters: int, seed: int = 0, n_init: int = 20) -> float:
    """k-means on the latents, then the share of points in their cluster's majority label."""
    from sklearn.cluster import KMeans

    Z = np.asarray(latents, dtype=np.float64)
    labels = np.asarray(labels)
    if len(Z) != len(labels):
        raise LengthMismatchError("one label per latent expected")
    if len(Z) == 0:
        raise EmptyInputError("no latents given")
    if Z.ndim == 1:
        Z = Z[:, None]
    if n_clusters == 1:
        assign = np.zeros(len(Z), dtype=int)
    else:
        assign = KMeans(n_clusters=n_clusters, n_init=n_init, random_state=seed).fit_predict(Z)
    total = 0
    for c in np.unique(assign):
        _, counts = np.unique(labels[assign == c], return_counts=True)
        total += counts.max()
    return total / len(Z)


def distinct_path_count(xs) -> int:
    xs = np.atleast_2d(np.asarray(xs))
    if xs.size == 0:
        raise EmptyInputError("no solutions given")
    return len({np.asarray(x != 0).tobytes() for x in xs})


@dataclass
class MetricReport:
    name: str
    value: float
    std: Optional[float] = None
    n: int = 1
    config_hash: str = ""
    dataset: str = ""
    model: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or not np.isfinite(self.value):
            raise ValueError("metric reports need n >= 1 and a finite value")


RESULT_FIELDS = ("metric", "value", "std", "n", "dataset", "model", "seed", "config_hash")


def append_results(path, reports: Sequence[MetricReport]) -> None:
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(RESULT_FIELDS)
        for r in reports:
            w.writerow(
                [
                    r.name,
                    f"{r.value:.10g}",
                    "" if r.std is None else f"{r.std:.10g}",
                    r.n,
                    r.dataset,
                    r.model,
                    "" if r.seed is None else r.seed,
                    r.config_hash,
                ]
            )


def summarize(name, values, **kw) -> MetricReport:
    v = np.asarray(values, dtype=np.float64)
    return MetricReport(name, float(v.mean()), float(v.std()) if len(v) > 1 else None, len(v), **kw)
