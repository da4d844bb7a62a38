"""Latent cost model trained through a black-box solver, plus baselines.

The model encodes an observed solution ``x`` (and its requirement) into a
Gaussian posterior over a small latent ``z``, decodes ``z`` into strictly
positive edge costs and reconstructs through the solver.  The solver is
not differentiable; the reconstruction term is the perturbed
Fenchel-Young loss

    <y, x> - E_eps[ min_{x'} <y + eps, x'> ]

whose gradient in ``y`` is ``x - x_hat_eps`` with
``x_hat_eps = solve(y + eps)``.  One solver call per sample per step.

Baselines: :class:`VaeBaseline` (Bernoulli decoder on edge bits, no
feasibility guarantee) and :class:`PoBaseline` (one global cost vector,
no latent space).
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from . import solvers
from .datasets import TrainingData, training_view
from .errors import (
    ConfigError,
    DimensionMismatchError,
    InfeasibleSampleError,
    LengthMismatchError,
    NonPositiveSigmaError,
    NumericalError,
)
from .graph import Graph, Requirement, validate_solution
from .neural import FreeVector, Mlp, load_checkpoint, make_optimizer, save_checkpoint, softplus
from .solvers import SolverKind

REQ_FEATURES = 4


@dataclass
class TrainConfig:
    """Optimisation settings.  Defaults follow the synthetic-path setup."""

    beta: float = 1.0
    sigma_eps: float = 0.25
    sigma_eps_mode: str = "relative"  # "relative": times batch-mean decoded cost
    learning_rate: float = 4e-5
    batch_size: int = 250
    epochs: int = 500
    optimizer: str = "rmsprop"
    weight_decay: Optional[float] = None
    seed: int = 0
    clamp_floor: float = solvers.DEFAULT_CLAMP_FLOOR
    threads: int = 1

    def __post_init__(self):
        if self.beta < 0 or self.sigma_eps < 0:
            raise ConfigError("beta and sigma_eps must be non-negative")
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("learning_rate >= 0, batch_size >= 1 and epochs >= 0 required")
        if self.sigma_eps_mode not in ("relative", "absolute"):
            raise ConfigError(f"sigma_eps_mode must be 'relative' or 'absolute', got {self.sigma_eps_mode!r}")

    @classmethod
    def paths(cls, **kw):
        """Shortest-path datasets: RMSProp, lr 4e-5, batch 250."""
        return cls(**{"learning_rate": 4e-5, "batch_size": 250, "optimizer": "rmsprop", **kw})

    @classmethod
    def tours(cls, **kw):
        """Hamiltonian-cycle datasets: AdamW, lr 1e-4, batch 200."""
        return cls(**{"learning_rate": 1e-4, "batch_size": 200, "optimizer": "adamw", **kw})

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown train config keys {sorted(unknown)}")
        return cls(**d)

    def optimizer_kwargs(self):
        return {} if self.weight_decay is None else {"weight_decay": self.weight_decay}


@dataclass
class EpochReport:
    epoch: int
    loss: float
    fy: float
    kl: float
    iou: float
    distinct_paths: int
    clamp_count: int = 0
    sigma_eps: float = 0.0

    FIELDS = ("epoch", "loss", "fy", "kl", "iou", "distinct_paths", "clamp_count", "sigma_eps")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


def append_training_log(path, reports: Sequence[EpochReport]):
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(EpochReport.FIELDS)
        for r in reports:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in r.row()])


# --------------------------------------------------------------------------
# loss pieces


def fy_loss(y, x, x_hat, eps):
    """Single-sample perturbed Fenchel-Young loss ``<y,x> - <y+eps, x_hat>``.

    Works row-wise on 2-D inputs.
    """
    y, x, x_hat, eps = (np.asarray(a, dtype=np.float64) for a in (y, x, x_hat, eps))
    if not (y.shape == x.shape == x_hat.shape == eps.shape):
        raise LengthMismatchError("y, x, x_hat and eps must share a shape")
    return np.sum(y * x, axis=-1) - np.sum((y + eps) * x_hat, axis=-1)


def fy_grad_y(x, x_hat):
    """Gradient of the perturbed Fenchel-Young loss in the costs: ``x - x_hat``."""
    x, x_hat = np.asarray(x, dtype=np.float64), np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise LengthMismatchError("x and x_hat must share a shape")
    return x - x_hat


def kl_gaussian(mu, sigma):
    """KL(N(mu, diag sigma^2) || N(0, I)), summed over the last axis."""
    mu, sigma = np.asarray(mu, dtype=np.float64), np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise NonPositiveSigmaError("sigma must be strictly positive")
    return 0.5 * np.sum(mu**2 + sigma**2 - 1.0 - 2.0 * np.log(sigma), axis=-1)


def reparameterize(mu, sigma, rng=None):
    rng = np.random.default_rng(rng)
    mu, sigma = np.asarray(mu, dtype=np.float64), np.asarray(sigma, dtype=np.float64)
    if mu.shape != sigma.shape:
        raise DimensionMismatchError("mu and sigma must share a shape")
    return mu + sigma * rng.standard_normal(mu.shape)


def encode_requirements(g: Graph, reqs: Sequence[Requirement]) -> np.ndarray:
    """Normalised source and target coordinates; zeros for tours."""
    out = np.zeros((len(reqs), REQ_FEATURES))
    pos = g.normalized_positions
    for i, p in enumerate(reqs):
        if p.is_path:
            out[i, :2] = pos[g.index(p.source)]
            out[i, 2:] = pos[g.index(p.target)]
    return out


def iou_rows(X, Xhat) -> np.ndarray:
    X, Xhat = np.asarray(X, dtype=bool), np.asarray(Xhat, dtype=bool)
    inter = np.sum(X & Xhat, axis=-1)
    union = np.sum(X | Xhat, axis=-1)
    return np.where(union == 0, 1.0, inter / np.maximum(union, 1))


def _sample_rng(seed, epoch, index):
    return np.random.default_rng([int(seed), 0, int(epoch), int(index)])


def _shuffle(seed, epoch, n):
    return np.random.default_rng([int(seed), 1, int(epoch)]).permutation(n)


def _batches(order, size):
    for start in range(0, len(order), size):
        yield order[start : start + size]


# --------------------------------------------------------------------------
# models


class _Encoded:
    """Shared encoder for the latent models: outputs (mu, log sigma)."""

    def _build_encoder(self, n_edges, latent_dim, hidden, seed):
        self.encoder = Mlp([n_edges + REQ_FEATURES, *hidden, 2 * latent_dim], "identity", seed=seed)

    def _encoder_input(self, X, reqs):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.graph.n_edges:
            raise DimensionMismatchError(f"solution length {X.shape[1]} != |E| = {self.graph.n_edges}")
        return np.hstack([X, encode_requirements(self.graph, reqs)])

    def encode(self, X, reqs):
        """Posterior ``(mu, sigma)`` for one solution or a batch of them."""
        single = np.asarray(X).ndim == 1
        if isinstance(reqs, Requirement):
            reqs = [reqs] * (1 if single else len(X))
        out = self.encoder(self._encoder_input(X, reqs))
        k = self.latent_dim
        mu, sigma = out[:, :k], np.exp(out[:, k:])
        return (mu[0], sigma[0]) if single else (mu, sigma)

    def _encode_for_training(self, X, reqs):
        out, cache = self.encoder.forward(self._encoder_input(X, reqs))
        k = self.latent_dim
        return out[:, :k], out[:, k:], cache

    def _encoder_backward(self, cache, g_mu, g_logsig):
        grads, _ = self.encoder.backward(cache, np.hstack([g_mu, g_logsig]))
        return grads


class IoLvm(_Encoded):
    """Encoder ``(x, p) -> (mu, sigma)``; decoder ``z -> softplus(g(z))`` edge costs."""

    def __init__(self, graph: Graph, latent_dim=2, hidden=(128, 128), solver_kind=None, seed=0, decoder_hidden=None):
        self.graph = graph
        self.latent_dim = int(latent_dim)
        self.hidden = tuple(int(h) for h in hidden)
        # a narrower decoder than encoder is allowed; None mirrors the encoder
        self.decoder_hidden = self.hidden if decoder_hidden is None else tuple(int(h) for h in decoder_hidden)
        self.solver_kind = SolverKind(solver_kind) if solver_kind else None
        self.seed = seed
        enc_seed, dec_seed = np.random.SeedSequence(seed).spawn(2)
        self._build_encoder(graph.n_edges, self.latent_dim, self.hidden, enc_seed)
        self.decoder = Mlp([self.latent_dim, *self.decoder_hidden, graph.n_edges], "softplus", seed=dec_seed)
        self.optimizer = None
        self.epoch = 0

    def modules(self):
        return {"encoder": self.encoder, "decoder": self.decoder}

    def describe(self) -> dict:
        return {
            "model": "iolvm",
            "latent_dim": self.latent_dim,
            "hidden": list(self.hidden),
            "decoder_hidden": list(self.decoder_hidden),
            "solver_kind": self.solver_kind.value if self.solver_kind else None,
            "graph": self.graph.fingerprint(),
        }

    def _kind_for(self, reqs):
        if self.solver_kind is None:
            self.solver_kind = SolverKind.SPP if reqs[0].is_path else solvers.tsp_kind_for(self.graph)
        return self.solver_kind

    def decode_cost(self, z):
        """Strictly positive edge costs for one latent vector or a batch."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.latent_dim:
            raise DimensionMismatchError(f"latent has dimension {z.shape[-1]}, model uses {self.latent_dim}")
        return self.decoder(z)

    def solve_costs(self, Y, reqs, threads=1):
        if isinstance(reqs, Requirement):
            reqs = [reqs] * len(np.atleast_2d(Y))
        X, _ = solvers.solve_batch(self._kind_for(reqs), self.graph, Y, reqs, threads=threads)
        return X

    def reconstruct(self, X, reqs, threads=1):
        """Deterministic round trip ``x -> mu -> costs -> solver``."""
        X = np.atleast_2d(X)
        if isinstance(reqs, Requirement):
            reqs = [reqs] * len(X)
        mu, _ = self.encode(X, reqs)
        return self.solve_costs(self.decode_cost(mu), reqs, threads)

    # ---- training

    def _ensure_optimizer(self, cfg: TrainConfig):
        if self.optimizer is None:
            self.optimizer = make_optimizer(
                cfg.optimizer, [self.encoder, self.decoder], cfg.learning_rate, **cfg.optimizer_kwargs()
            )

    def batch_gradients(self, X, reqs, xi, noise, cfg: TrainConfig, kind=None, x_hat=None):
        """Loss terms and parameter gradients for one batch.

        ``xi`` and ``noise`` are standard normal draws for z and for the
        cost perturbation.  Passing ``x_hat`` skips the solver (used to
        check gradients with the solver output frozen).
        """
        B = len(X)
        mu, logsig, enc_cache = self._encode_for_training(X, reqs)
        sigma = np.exp(logsig)
        z = mu + sigma * xi
        Y, dec_cache = self.decoder.forward(z)
        scale = cfg.sigma_eps * float(Y.mean()) if cfg.sigma_eps_mode == "relative" else cfg.sigma_eps
        eps = scale * noise
        n_clamped = 0
        if x_hat is None:
            kind = kind or self._kind_for(reqs)
            x_hat, n_clamped = solvers.solve_batch(kind, self.graph, Y + eps, reqs, cfg.clamp_floor, threads=cfg.threads)
        fy = fy_loss(Y, X, x_hat, eps)
        kl = kl_gaussian(mu, sigma)
        if not (np.all(np.isfinite(fy)) and np.all(np.isfinite(kl))):
            raise NumericalError(f"non-finite loss at epoch {self.epoch}")
        # loss = mean_b (fy_b + beta kl_b)
        dec_grads, g_z = self.decoder.backward(dec_cache, fy_grad_y(X, x_hat) / B)
        g_mu = g_z + cfg.beta * mu / B
        g_logsig = g_z * sigma * xi + cfg.beta * (sigma**2 - 1.0) / B
        enc_grads = self._encoder_backward(enc_cache, g_mu, g_logsig)
        return {"fy": fy, "kl": kl, "x_hat": x_hat, "scale": scale, "clamped": n_clamped, "grads": [enc_grads, dec_grads]}

    def train_epoch(self, data, cfg: TrainConfig) -> EpochReport:
        """One pass over the data: encode, sample z, decode, solve once, update."""
        data = training_view(data)
        if data.graph is not self.graph and data.graph.fingerprint() != self.graph.fingerprint():
            raise DimensionMismatchError("dataset graph differs from the model graph")
        kind = self._kind_for(data.requirements)
        self._ensure_optimizer(cfg)
        k, E = self.latent_dim, self.graph.n_edges
        epoch = self.epoch
        tot = {"loss": 0.0, "fy": 0.0, "kl": 0.0, "iou": 0.0, "clamp": 0, "scale": 0.0}
        recon = set()
        n_batches = 0
        for idx in _batches(_shuffle(cfg.seed, epoch, len(data)), cfg.batch_size):
            X = data.X[idx].astype(np.float64)
            reqs = [data.requirements[i] for i in idx]
            rngs = [_sample_rng(cfg.seed, epoch, i) for i in idx]
            xi = np.stack([r.standard_normal(k) for r in rngs])
            noise = np.stack([r.standard_normal(E) for r in rngs])

            step = self.batch_gradients(X, reqs, xi, noise, cfg, kind)
            fy, kl, Xhat, scale, n_clamped = step["fy"], step["kl"], step["x_hat"], step["scale"], step["clamped"]
            enc_grads, dec_grads = step["grads"]
            self.optimizer.step([enc_grads, dec_grads])
            tot["loss"] += float(np.sum(fy + cfg.beta * kl))
            tot["fy"] += float(np.sum(fy))
            tot["kl"] += float(np.sum(kl))
            tot["iou"] += float(np.sum(iou_rows(X, Xhat)))
            tot["clamp"] += n_clamped
            tot["scale"] += scale
            n_batches += 1
            recon.update(row.tobytes() for row in Xhat)
        self.epoch += 1
        n = len(data)
        return EpochReport(
            epoch=self.epoch,
            loss=tot["loss"] / n,
            fy=tot["fy"] / n,
            kl=tot["kl"] / n,
            iou=tot["iou"] / n,
            distinct_paths=len(recon),
            clamp_count=tot["clamp"],
            sigma_eps=tot["scale"] / max(n_batches, 1),
        )

    def save(self, path, cfg: TrainConfig | None = None):
        save_checkpoint(
            path,
            self.modules(),
            self.optimizer,
            config=cfg.to_dict() if cfg else {},
            extra={**self.describe(), "epoch": self.epoch},
        )

    @classmethod
    def load(cls, path, graph: Graph, cfg: TrainConfig | None = None):
        from .neural import read_checkpoint_meta

        meta = read_checkpoint_meta(path)
        extra = meta["extra"]
        m = cls(graph, extra["latent_dim"], extra["hidden"], extra.get("solver_kind"), decoder_hidden=extra.get("decoder_hidden"))
        if cfg is None and meta.get("config"):
            cfg = TrainConfig.from_dict(meta["config"])
        if cfg is not None and "optimizer" in meta:
            m._ensure_optimizer(cfg)
        load_checkpoint(path, m.modules(), m.optimizer)
        m.epoch = int(extra.get("epoch", 0))
        return m


def check_feasible(data: TrainingData) -> None:
    for i, (x, p) in enumerate(zip(data.X, data.requirements)):
        report = validate_solution(data.graph, x, p)
        if not report.feasible:
            raise InfeasibleSampleError(f"sample {i} infeasible: {report.failure.value}")


def fit(model, data, cfg: TrainConfig, log_path=None, callback=None, check=True) -> List[EpochReport]:
    """Train until ``model.epoch == cfg.epochs`` (resumes a partly trained model)."""
    data = training_view(data)
    if check:
        check_feasible(data)
    reports = []
    while model.epoch < cfg.epochs:
        rep = model.train_epoch(data, cfg)
        reports.append(rep)
        if log_path is not None:
            append_training_log(log_path, [rep])
        if callback is not None:
            callback(model, rep)
    return reports


def train_iolvm(data, cfg: TrainConfig, latent_dim=2, hidden=(128, 128), seed=None, decoder_hidden=None, **kw) -> IoLvm:
    data = training_view(data)
    m = IoLvm(data.graph, latent_dim, hidden, seed=cfg.seed if seed is None else seed, decoder_hidden=decoder_hidden)
    fit(m, data, cfg, **kw)
    return m


class VaeBaseline(_Encoded):
    """beta-VAE with independent Bernoulli edge bits; outputs need not be feasible."""

    def __init__(self, graph: Graph, latent_dim=2, hidden=(128, 128), seed=0):
        self.graph = graph
        self.latent_dim = int(latent_dim)
        self.hidden = tuple(int(h) for h in hidden)
        enc_seed, dec_seed = np.random.SeedSequence(seed).spawn(2)
        self._build_encoder(graph.n_edges, self.latent_dim, self.hidden, enc_seed)
        self.decoder = Mlp([self.latent_dim, *self.hidden, graph.n_edges], "sigmoid", seed=dec_seed)
        self.optimizer = None
        self.epoch = 0

    def modules(self):
        return {"encoder": self.encoder, "decoder": self.decoder}

    def describe(self):
        return {"model": "vae", "latent_dim": self.latent_dim, "hidden": list(self.hidden), "graph": self.graph.fingerprint()}

    def decode_probs(self, z):
        return self.decoder(np.asarray(z, dtype=np.float64))

    def reconstruct(self, X, reqs, threshold=0.5):
        X = np.atleast_2d(X)
        mu, _ = self.encode(X, reqs if not isinstance(reqs, Requirement) else [reqs] * len(X))
        return (self.decode_probs(mu) > threshold).astype(np.int8)

    def sample_solutions(self, Z, threshold=0.5):
        return (self.decode_probs(Z) > threshold).astype(np.int8)

    def batch_gradients(self, X, reqs, xi, cfg: TrainConfig):
        """Loss terms and parameter gradients for one batch, ``xi`` the standard normal draws for z."""
        B = len(X)
        mu, logsig, enc_cache = self._encode_for_training(X, reqs)
        sigma = np.exp(logsig)
        z = mu + sigma * xi
        P, dec_cache = self.decoder.forward(z)
        logits = dec_cache["pre"][-1]
        # binary cross-entropy from logits, summed over edges
        bce = np.sum(np.logaddexp(0.0, logits) - X * logits, axis=1)
        kl = kl_gaussian(mu, sigma)
        dec_grads, g_z = self.decoder.backward(dec_cache, (P - X) / B, through_head=False)
        g_mu = g_z + cfg.beta * mu / B
        g_logsig = g_z * sigma * xi + cfg.beta * (sigma**2 - 1.0) / B
        enc_grads = self._encoder_backward(enc_cache, g_mu, g_logsig)
        return {"bce": bce, "kl": kl, "probs": P, "grads": [enc_grads, dec_grads]}

    def train_epoch(self, data, cfg: TrainConfig) -> EpochReport:
        data = training_view(data)
        if self.optimizer is None:
            self.optimizer = make_optimizer(
                cfg.optimizer, [self.encoder, self.decoder], cfg.learning_rate, **cfg.optimizer_kwargs()
            )
        k, epoch = self.latent_dim, self.epoch
        tot_loss = tot_rec = tot_kl = tot_iou = 0.0
        recon = set()
        for idx in _batches(_shuffle(cfg.seed, epoch, len(data)), cfg.batch_size):
            X = data.X[idx].astype(np.float64)
            reqs = [data.requirements[i] for i in idx]
            xi = np.stack([_sample_rng(cfg.seed, epoch, i).standard_normal(k) for i in idx])
            out = self.batch_gradients(X, reqs, xi, cfg)
            self.optimizer.step(out["grads"])
            bce, kl = out["bce"], out["kl"]
            Xhat = (out["probs"] > 0.5).astype(np.int8)
            tot_loss += float(np.sum(bce + cfg.beta * kl))
            tot_rec += float(np.sum(bce))
            tot_kl += float(np.sum(kl))
            tot_iou += float(np.sum(iou_rows(X, Xhat)))
            recon.update(row.tobytes() for row in Xhat)
        self.epoch += 1
        n = len(data)
        return EpochReport(self.epoch, tot_loss / n, tot_rec / n, tot_kl / n, tot_iou / n, len(recon))

    def save(self, path, cfg: TrainConfig | None = None):
        save_checkpoint(path, self.modules(), self.optimizer, cfg.to_dict() if cfg else {}, {**self.describe(), "epoch": self.epoch})

    @classmethod
    def load(cls, path, graph, cfg=None):
        from .neural import read_checkpoint_meta

        meta = read_checkpoint_meta(path)
        extra = meta["extra"]
        m = cls(graph, extra["latent_dim"], extra["hidden"])
        if cfg is None and meta.get("config"):
            cfg = TrainConfig.from_dict(meta["config"])
        if cfg is not None and "optimizer" in meta:
            m.optimizer = make_optimizer(cfg.optimizer, [m.encoder, m.decoder], cfg.learning_rate, **cfg.optimizer_kwargs())
        load_checkpoint(path, m.modules(), m.optimizer)
        m.epoch = int(extra.get("epoch", 0))
        return m


def train_vae_baseline(data, cfg: TrainConfig, latent_dim=2, hidden=(128, 128), seed=None, **kw) -> VaeBaseline:
    data = training_view(data)
    m = VaeBaseline(data.graph, latent_dim, hidden, seed=cfg.seed if seed is None else seed)
    fit(m, data, cfg, **kw)
    return m


class PoBaseline:
    """Perturbed optimizer with a single learned cost vector ``softplus(w)``.

    Paths are sampled as ``solve(y + eps)`` with the training noise scale.
    """

    def __init__(self, graph: Graph, solver_kind=None, init_costs=None):
        self.graph = graph
        self.solver_kind = SolverKind(solver_kind) if solver_kind else None
        w0 = np.zeros(graph.n_edges) if init_costs is None else np.log(np.expm1(np.asarray(init_costs, dtype=np.float64)))
        self.weights = FreeVector(w0)
        self.optimizer = None
        self.epoch = 0
        self.sigma_eps = 0.0
        self.sigma_eps_mode = "relative"

    def modules(self):
        return {"weights": self.weights}

    def describe(self):
        return {"model": "po", "graph": self.graph.fingerprint(), "solver_kind": self.solver_kind.value if self.solver_kind else None}

    @property
    def costs(self):
        return softplus(self.weights.value)

    def noise_scale(self):
        y = self.costs
        return self.sigma_eps * float(y.mean()) if self.sigma_eps_mode == "relative" else self.sigma_eps

    def _kind_for(self, reqs):
        if self.solver_kind is None:
            self.solver_kind = SolverKind.SPP if reqs[0].is_path else solvers.tsp_kind_for(self.graph)
        return self.solver_kind

    def cost_gradient(self, g_y):
        """Chain a cost-space gradient through the softplus parameterisation."""
        return g_y * expit(self.weights.value)

    def train_epoch(self, data, cfg: TrainConfig) -> EpochReport:
        data = training_view(data)
        kind = self._kind_for(data.requirements)
        self.sigma_eps, self.sigma_eps_mode = cfg.sigma_eps, cfg.sigma_eps_mode
        if self.optimizer is None:
            self.optimizer = make_optimizer(cfg.optimizer, [self.weights], cfg.learning_rate, **cfg.optimizer_kwargs())
        E, epoch = self.graph.n_edges, self.epoch
        tot_fy = tot_iou = 0.0
        clamps = 0
        recon = set()
        for idx in _batches(_shuffle(cfg.seed, epoch, len(data)), cfg.batch_size):
            X = data.X[idx].astype(np.float64)
            reqs = [data.requirements[i] for i in idx]
            noise = np.stack([_sample_rng(cfg.seed, epoch, i).standard_normal(E) for i in idx])
            out = self.batch_gradients(X, reqs, noise, cfg, kind)
            self.optimizer.step(out["grads"])
            fy, Xhat, n_cl = out["fy"], out["x_hat"], out["clamped"]
            tot_fy += float(fy.sum())
            tot_iou += float(np.sum(iou_rows(X, Xhat)))
            clamps += n_cl
            recon.update(row.tobytes() for row in Xhat)
        self.epoch += 1
        n = len(data)
        return EpochReport(self.epoch, tot_fy / n, tot_fy / n, 0.0, tot_iou / n, len(recon), clamps, self.noise_scale())

    def batch_gradients(self, X, reqs, noise, cfg: TrainConfig, kind=None, x_hat=None):
        """FY loss per row and the gradient for the raw weights; ``x_hat`` freezes the solver."""
        B = len(X)
        y = self.costs
        eps = self.noise_scale() * noise
        n_clamped = 0
        if x_hat is None:
            kind = kind or self._kind_for(reqs)
            x_hat, n_clamped = solvers.solve_batch(kind, self.graph, y[None, :] + eps, reqs, cfg.clamp_floor, threads=cfg.threads)
        fy = fy_loss(np.broadcast_to(y, X.shape), X, x_hat, eps)
        g_y = fy_grad_y(X, x_hat).sum(axis=0) / B
        return {"fy": fy, "x_hat": x_hat, "clamped": n_clamped, "grads": [[self.cost_gradient(g_y)]]}

    def sample(self, p: Requirement, n: int, rng=None, threads=1) -> np.ndarray:
        """``n`` solutions of ``solve(y + eps, p)``."""
        rng = np.random.default_rng(rng)
        kind = self._kind_for([p])
        eps = solvers.perturbation(rng, self.noise_scale(), (n, self.graph.n_edges))
        X, _ = solvers.solve_batch(kind, self.graph, self.costs[None, :] + eps, p, threads=threads)
        return X

    def reconstruct(self, X, reqs):
        X = np.atleast_2d(X)
        if isinstance(reqs, Requirement):
            reqs = [reqs] * len(X)
        Y = np.broadcast_to(self.costs, X.shape)
        out, _ = solvers.solve_batch(self._kind_for(reqs), self.graph, Y, reqs)
        return out

    def save(self, path, cfg: TrainConfig | None = None):
        save_checkpoint(path, self.modules(), self.optimizer, cfg.to_dict() if cfg else {}, {**self.describe(), "epoch": self.epoch})

    @classmethod
    def load(cls, path, graph, cfg=None):
        from .neural import read_checkpoint_meta

        meta = read_checkpoint_meta(path)
        m = cls(graph, meta["extra"].get("solver_kind"))
        if cfg is None and meta.get("config"):
            cfg = TrainConfig.from_dict(meta["config"])
        if cfg is not None:
            m.sigma_eps, m.sigma_eps_mode = cfg.sigma_eps, cfg.sigma_eps_mode
            if "optimizer" in meta:
                m.optimizer = make_optimizer(cfg.optimizer, [m.weights], cfg.learning_rate, **cfg.optimizer_kwargs())
        load_checkpoint(path, m.modules(), m.optimizer)
        m.epoch = int(meta["extra"].get("epoch", 0))
        return m


def train_po_baseline(data, cfg: TrainConfig, **kw) -> PoBaseline:
    data = training_view(data)
    m = PoBaseline(data.graph)
    fit(m, data, cfg, **kw)
    return m
