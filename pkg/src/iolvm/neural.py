"""Dense ReLU networks with hand-written backprop, RMSProp/AdamW, checkpoints.

Everything is float64.  A network maps a batch ``(B, d_in)`` (or a
single vector) to ``(B, d_out)``; ``backward`` returns gradients of
``sum(grad_output * output)``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import CheckpointError, DimensionMismatchError, ShapeMismatchError, StaleCacheError

CHECKPOINT_VERSION = 1


def softplus(a):
    return np.logaddexp(0.0, a)


def softplus_inverse(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


# name -> (f(a), df/da given (a, f(a)))
ACTIVATIONS = {
    "identity": (lambda a: a, lambda a, f: np.ones_like(a)),
    "relu": (lambda a: np.maximum(a, 0.0), lambda a, f: (a > 0).astype(np.float64)),
    "softplus": (softplus, lambda a, f: expit(a)),
    "sigmoid": (expit, lambda a, f: f * (1.0 - f)),
}


class Module:
    """Holds a flat list of parameter arrays and a version counter."""

    def __init__(self, params):
        self.params = [np.asarray(p, dtype=np.float64) for p in params]
        self.version = 0

    def touch(self):
        self.version += 1

    def architecture(self) -> dict:
        return {"type": type(self).__name__, "shapes": [list(p.shape) for p in self.params]}

    def zero_grads(self):
        return [np.zeros_like(p) for p in self.params]


class Mlp(Module):
    """Fully connected network: ReLU hidden layers, configurable head.

    >>> net = Mlp([3, 8, 2], output_activation="softplus", seed=0)
    >>> out, cache = net.forward(np.zeros(3))
    >>> out.shape
    (2,)
    """

    def __init__(self, sizes, output_activation="identity", hidden_activation="relu", seed=None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise DimensionMismatchError(f"bad layer sizes {sizes}")
        if output_activation not in ACTIVATIONS or hidden_activation not in ACTIVATIONS:
            raise ValueError("unknown activation")
        rng = np.random.default_rng(seed)
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)  # He-uniform
            params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        super().__init__(params)
        self.sizes = sizes
        self.output_activation = output_activation
        self.hidden_activation = hidden_activation

    @property
    def layers(self):
        return list(zip(self.params[0::2], self.params[1::2]))

    def architecture(self) -> dict:
        arch = super().architecture()
        arch.update(sizes=self.sizes, output=self.output_activation, hidden=self.hidden_activation)
        return arch

    def _act(self, i):
        last = i == len(self.sizes) - 2
        return ACTIVATIONS[self.output_activation if last else self.hidden_activation]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.sizes[0]:
            raise DimensionMismatchError(f"input shape {x.shape}, network expects {self.sizes[0]} features")
        inputs, pre, post = [], [], []
        for i, (W, b) in enumerate(self.layers):
            inputs.append(h)
            a = h @ W + b
            h = self._act(i)[0](a)
            pre.append(a)
            post.append(h)
        cache = {"version": self.version, "inputs": inputs, "pre": pre, "post": post, "single": single}
        return (h[0] if single else h), cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_output, through_head=True):
        """Gradients of ``sum(grad_output * output)``.

        With ``through_head=False`` the incoming gradient is taken to be
        with respect to the last pre-activation instead (useful for
        sigmoid + cross-entropy).
        """
        if cache["version"] != self.version:
            raise StaleCacheError("parameters changed since the forward pass")
        g = np.asarray(grad_output, dtype=np.float64)
        if cache["single"]:
            g = g[None, :]
        if g.shape != cache["post"][-1].shape:
            raise DimensionMismatchError(f"grad_output shape {g.shape} does not match output")
        grads = [None] * len(self.params)
        n_layers = len(self.sizes) - 1
        for i in range(n_layers - 1, -1, -1):
            if i < n_layers - 1 or through_head:
                g = g * self._act(i)[1](cache["pre"][i], cache["post"][i])
            W = self.params[2 * i]
            grads[2 * i] = cache["inputs"][i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ W.T
        return grads, (g[0] if cache["single"] else g)


class FreeVector(Module):
    """A single unconstrained parameter vector."""

    def __init__(self, values):
        super().__init__([np.array(values, dtype=np.float64)])

    @property
    def value(self):
        return self.params[0]


# --------------------------------------------------------------------------
# optimizers


class Optimizer:
    """Updates a list of modules in place; mirrors the torch update rules."""

    kind = "base"

    def __init__(self, modules, lr):
        self.modules = list(modules)
        self.lr = float(lr)
        self.steps = 0
        self.state = [[self._init_state(p) for p in m.params] for m in self.modules]

    def _init_state(self, p):
        return {}

    def hyper(self) -> dict:
        return {"lr": self.lr}

    def step(self, grads):
        """``grads[i]`` is the list of gradients for ``modules[i]``."""
        if len(grads) != len(self.modules):
            raise ShapeMismatchError("one gradient list per module expected")
        for m, gs in zip(self.modules, grads):
            if len(gs) != len(m.params) or any(g.shape != p.shape for g, p in zip(gs, m.params)):
                raise ShapeMismatchError(f"gradient shapes do not match {type(m).__name__} parameters")
        self.steps += 1
        for m, gs, st in zip(self.modules, grads, self.state):
            for p, g, s in zip(m.params, gs, st):
                self._update(p, np.asarray(g, dtype=np.float64), s)
            m.touch()

    def _update(self, p, g, s):
        raise NotImplementedError

    def state_arrays(self) -> dict:
        out = {}
        for i, st in enumerate(self.state):
            for j, s in enumerate(st):
                for key, arr in s.items():
                    out[f"{i}.{j}.{key}"] = arr
        return out

    def load_state_arrays(self, arrays: dict, steps: int):
        for name, arr in arrays.items():
            i, j, key = name.split(".")
            target = self.state[int(i)][int(j)][key]
            if target.shape != arr.shape:
                raise CheckpointError(f"optimizer buffer {name} has shape {arr.shape}")
            target[...] = arr
        self.steps = int(steps)


class RmsProp(Optimizer):
    kind = "rmsprop"

    def __init__(self, modules, lr=1e-2, alpha=0.99, eps=1e-8, weight_decay=0.0):
        self.alpha, self.eps, self.weight_decay = alpha, eps, weight_decay
        super().__init__(modules, lr)

    def _init_state(self, p):
        return {"square_avg": np.zeros_like(p)}

    def hyper(self):
        return {"lr": self.lr, "alpha": self.alpha, "eps": self.eps, "weight_decay": self.weight_decay}

    def _update(self, p, g, s):
        if self.weight_decay:
            g = g + self.weight_decay * p
        sq = s["square_avg"]
        sq *= self.alpha
        sq += (1.0 - self.alpha) * g * g
        p -= self.lr * g / (np.sqrt(sq) + self.eps)


class AdamW(Optimizer):
    kind = "adamw"

    def __init__(self, modules, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-2):
        self.betas, self.eps, self.weight_decay = tuple(betas), eps, weight_decay
        super().__init__(modules, lr)

    def _init_state(self, p):
        return {"exp_avg": np.zeros_like(p), "exp_avg_sq": np.zeros_like(p)}

    def hyper(self):
        return {"lr": self.lr, "betas": list(self.betas), "eps": self.eps, "weight_decay": self.weight_decay}

    def _update(self, p, g, s):
        b1, b2 = self.betas
        t = self.steps
        p *= 1.0 - self.lr * self.weight_decay
        m, v = s["exp_avg"], s["exp_avg_sq"]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"rmsprop": RmsProp, "adamw": AdamW}


def make_optimizer(kind: str, modules, lr: float, **kwargs) -> Optimizer:
    try:
        cls = OPTIMIZERS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}; choose from {sorted(OPTIMIZERS)}") from None
    return cls(modules, lr=lr, **kwargs)


# --------------------------------------------------------------------------
# checkpoints


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, modules: dict, optimizer: Optimizer | None = None, config: dict | None = None, extra: dict | None = None):
    """Write parameters, optimizer buffers and config to a single ``.npz``."""
    arrays = {}
    for name, m in modules.items():
        for j, p in enumerate(m.params):
            arrays[f"param/{name}/{j}"] = p
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": {name: m.architecture() for name, m in modules.items()},
        "config": config or {},
        "config_hash": config_hash(config or {}),
        "extra": extra or {},
    }
    if optimizer is not None:
        meta["optimizer"] = {"kind": optimizer.kind, "hyper": optimizer.hyper(), "steps": optimizer.steps}
        for key, arr in optimizer.state_arrays().items():
            arrays[f"opt/{key}"] = arr
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def read_checkpoint_meta(path) -> dict:
    with np.load(path) as data:
        return json.loads(bytes(data["meta"]).decode())


def load_checkpoint(path, modules: dict, optimizer: Optimizer | None = None) -> dict:
    """Load into existing modules; rejects a mismatched architecture."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {meta.get('format_version')}")
        stored = meta["architecture"]
        if set(stored) != set(modules):
            raise CheckpointError(f"checkpoint holds modules {sorted(stored)}, expected {sorted(modules)}")
        for name, m in modules.items():
            if stored[name] != json.loads(json.dumps(m.architecture())):
                raise CheckpointError(f"architecture mismatch for {name!r}")
        for name, m in modules.items():
            for j, p in enumerate(m.params):
                p[...] = data[f"param/{name}/{j}"]
            m.touch()
        if optimizer is not None and "optimizer" in meta:
            if meta["optimizer"]["kind"] != optimizer.kind:
                raise CheckpointError("optimizer kind mismatch")
            opt_arrays = {k[4:]: data[k] for k in data.files if k.startswith("opt/")}
            optimizer.load_state_arrays(opt_arrays, meta["optimizer"]["steps"])
    return meta
