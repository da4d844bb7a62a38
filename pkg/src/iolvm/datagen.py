"""Synthetic datasets: multi-agent shortest paths on Waxman graphs and
tours on complete graphs with costs driven by hidden features.

Generation is a pure function of the spec: every random draw comes from a
generator seeded with ``[spec.seed, stream, index]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist
from scipy.special import expit

from . import solvers
from .datasets import Dataset
from .errors import ConfigError, DisconnectedBeyondThresholdError, NoPathExistsError
from .graph import Graph, Requirement, path_nodes
from .neural import softplus
from .solvers import SolverKind

BIASES = ("south", "north", "none")


@dataclass
class AgentSpec:
    """Cost preference of one synthetic agent.

    ``bias="south"`` makes southern (low y) edges more expensive,
    ``"north"`` the northern ones.  ``noise`` is the log-normal sigma of
    the per-path multiplicative cost noise.
    """

    bias: str = "none"
    strength: float = 0.0
    noise: float = 0.0

    def __post_init__(self):
        self.bias = self.bias.lower()
        if self.bias not in BIASES:
            raise ConfigError(f"bias must be one of {BIASES}")


def default_agents():
    return [AgentSpec("south", 3.0, 0.2), AgentSpec("none", 0.0, 0.2), AgentSpec("north", 3.0, 0.2)]


@dataclass
class WaxmanSpec:
    n_nodes: int = 200
    alpha: float = 0.05
    beta_w: float = 0.6
    seed: int = 0
    agents: List[AgentSpec] = field(default_factory=default_agents)
    n_paths: int = 1500
    requirement_mode: str = "single"  # or "multi"
    source: Optional[int] = None
    target: Optional[int] = None
    min_pair_distance: float = 0.3
    pair_band: Optional[float] = None  # multi: source x < band, target x > 1 - band
    pair_lat: float = 0.25  # with pair_band: both endpoints within this of y = 0.5
    bias_width: float = 0.25
    min_component_fraction: float = 0.9

    def __post_init__(self):
        self.agents = [a if isinstance(a, AgentSpec) else AgentSpec(**a) for a in self.agents]
        if not (0 < self.alpha <= 1 and 0 < self.beta_w <= 1):
            raise ConfigError("alpha and beta_w must lie in (0, 1]")
        if self.n_paths < 1 or self.n_nodes < 2 or not self.agents:
            raise ConfigError("need n_paths >= 1, n_nodes >= 2 and at least one agent")
        if self.requirement_mode not in ("single", "multi"):
            raise ConfigError("requirement_mode must be 'single' or 'multi'")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return dataclasses.asdict(self)


def waxman_probability(d, d_max, alpha, beta_w):
    """Edge probability ``alpha * exp(-d / (beta_w * d_max))``."""
    return alpha * np.exp(-np.asarray(d) / (beta_w * d_max))


def waxman_pairs(positions, alpha, beta_w, rng):
    """Bernoulli draw for every unordered pair ``i < j`` (row-major order).

    Returns ``(i, j, linked)``.
    """
    n = len(positions)
    i, j = np.triu_indices(n, k=1)
    d = pdist(positions)
    p = waxman_probability(d, d.max(), alpha, beta_w)
    return i, j, rng.random(len(d)) < p


def gen_waxman_graph(spec: WaxmanSpec) -> Graph:
    """Waxman random graph on the unit square, each link as two arcs.

    Only the largest connected component is kept (nodes renumbered in
    their original order).
    """
    rng = np.random.default_rng([spec.seed, 0])
    pos = rng.random((spec.n_nodes, 2))
    i, j, linked = waxman_pairs(pos, spec.alpha, spec.beta_w, rng)
    i, j = i[linked], j[linked]
    n = spec.n_nodes
    adj = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    sizes = np.bincount(labels)
    giant = int(np.argmax(sizes))
    if sizes[giant] < spec.min_component_fraction * n:
        raise DisconnectedBeyondThresholdError(
            f"largest component has {sizes[giant]} of {n} nodes (< {spec.min_component_fraction:.0%})"
        )
    keep = labels == giant
    new_id = np.cumsum(keep) - 1
    sel = keep[i] & keep[j]
    a, b = new_id[i[sel]], new_id[j[sel]]
    src = np.empty(2 * len(a), dtype=np.int64)
    dst = np.empty_like(src)
    src[0::2], dst[0::2] = a, b
    src[1::2], dst[1::2] = b, a
    m = int(keep.sum())
    return Graph(np.arange(m), pos[keep], src, dst, directed=True)


def latitude_weight(g: Graph, bias: str, width: float) -> np.ndarray:
    """Smooth 0..1 weight of each edge's midpoint latitude."""
    if bias == "none":
        return np.zeros(g.n_edges)
    y = g.normalized_positions[:, 1]
    mid = 0.5 * (y[g.src] + y[g.dst])
    sign = 1.0 if bias == "north" else -1.0
    return expit(sign * (mid - 0.5) / width)


def gen_agent_costs(g: Graph, agent: AgentSpec, rng=None, width: float = 0.25) -> np.ndarray:
    """Euclidean lengths scaled by a latitude penalty and log-normal noise."""
    cost = g.edge_lengths * (1.0 + agent.strength * latitude_weight(g, agent.bias, width))
    if agent.noise > 0:
        rng = np.random.default_rng(rng)
        cost = cost * np.exp(agent.noise * rng.standard_normal(g.n_edges))
    return cost


def default_endpoints(g: Graph):
    """West-most and east-most nodes near mid latitude."""
    pos = g.normalized_positions
    s = int(np.argmin(np.hypot(pos[:, 0] - 0.0, pos[:, 1] - 0.5)))
    t = int(np.argmin(np.hypot(pos[:, 0] - 1.0, pos[:, 1] - 0.5)))
    return int(g.node_ids[s]), int(g.node_ids[t])


def _random_pair(g: Graph, rng, min_dist, band=None, lat=0.25):
    pos = g.normalized_positions
    if band is not None:
        mid = np.abs(pos[:, 1] - 0.5) < lat
        west = np.flatnonzero((pos[:, 0] < band) & mid)
        east = np.flatnonzero((pos[:, 0] > 1.0 - band) & mid)
        if len(west) == 0 or len(east) == 0:
            raise ConfigError(f"no nodes inside the pair band {band}")
    for _ in range(1000):
        if band is None:
            s, t = rng.choice(g.n_nodes, size=2, replace=False)
        else:
            s, t = rng.choice(west), rng.choice(east)
        if np.hypot(*(pos[s] - pos[t])) >= min_dist:
            return int(g.node_ids[s]), int(g.node_ids[t])
    raise ConfigError("could not find a source/target pair at the requested distance")


def gen_waxman_dataset(spec: WaxmanSpec, graph: Graph | None = None, chunk: int = 500) -> Dataset:
    """Paths from agents with biased, noisy costs, solved by Dijkstra.

    The agent id is stored in ``meta`` only.
    """
    g = gen_waxman_graph(spec) if graph is None else graph
    if spec.requirement_mode == "single":
        if spec.source is not None and spec.target is not None:
            fixed = Requirement(spec.source, spec.target)
        else:
            fixed = Requirement(*default_endpoints(g))
        fixed.check(g)
    X = np.zeros((spec.n_paths, g.n_edges), dtype=np.int8)
    reqs, metas = [], []
    for start in range(0, spec.n_paths, chunk):
        idx = range(start, min(start + chunk, spec.n_paths))
        Y = np.empty((len(idx), g.n_edges))
        chunk_reqs = []
        for r, i in enumerate(idx):
            rng = np.random.default_rng([spec.seed, 2, i])
            agent = int(rng.integers(len(spec.agents)))
            Y[r] = gen_agent_costs(g, spec.agents[agent], rng, spec.bias_width)
            p = fixed if spec.requirement_mode == "single" else Requirement(*_random_pair(g, rng, spec.min_pair_distance, spec.pair_band, spec.pair_lat))
            chunk_reqs.append(p)
            metas.append({"agent": agent})
        X[idx.start : idx.stop], _ = solvers.solve_batch(SolverKind.SPP, g, Y, chunk_reqs)
        reqs.extend(chunk_reqs)
    return Dataset(g, X, reqs, metas)


# --------------------------------------------------------------------------
# tours


@dataclass
class TspCostSpec:
    """Complete graph whose edge costs depend on ``n_features`` hidden features.

    ``cost_e = length_e * (1 + strength * softplus(<w_e, u>) / log 2)`` with
    ``w_e ~ N(0, feature_scale^2 / n_features)`` fixed per spec and
    ``u ~ N(0, I)`` drawn per sample.
    """

    n_nodes: int = 14
    n_features: int = 3
    seed: int = 0
    n_samples: int = 3000
    strength: float = 1.0
    feature_scale: float = 1.0

    def __post_init__(self):
        if self.n_features < 1 or self.n_nodes < 3 or self.n_samples < 1:
            raise ConfigError("need n_features >= 1, n_nodes >= 3, n_samples >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return dataclasses.asdict(self)


def gen_tsp_graph(spec: TspCostSpec) -> Graph:
    rng = np.random.default_rng([spec.seed, 0])
    pos = rng.random((spec.n_nodes, 2))
    i, j = np.triu_indices(spec.n_nodes, k=1)
    return Graph(np.arange(spec.n_nodes), pos, i, j, directed=False)


def tsp_feature_weights(spec: TspCostSpec, g: Graph) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 1])
    return rng.standard_normal((g.n_edges, spec.n_features)) * spec.feature_scale / np.sqrt(spec.n_features)


def tsp_costs(spec: TspCostSpec, g: Graph, W, u) -> np.ndarray:
    return g.edge_lengths * (1.0 + spec.strength * softplus(W @ u) / np.log(2.0))


def gen_tsp_dataset(spec: TspCostSpec, chunk: int = 500) -> Dataset:
    """Optimal (exact up to 16 nodes, 2-opt beyond) tours for hidden-feature costs."""
    g = gen_tsp_graph(spec)
    W = tsp_feature_weights(spec, g)
    kind = solvers.tsp_kind_for(g)
    X = np.zeros((spec.n_samples, g.n_edges), dtype=np.int8)
    metas = []
    none = Requirement()
    for start in range(0, spec.n_samples, chunk):
        stop = min(start + chunk, spec.n_samples)
        U = np.stack([np.random.default_rng([spec.seed, 2, i]).standard_normal(spec.n_features) for i in range(start, stop)])
        Y = np.stack([tsp_costs(spec, g, W, u) for u in U])
        X[start:stop], _ = solvers.solve_batch(kind, g, Y, none)
        metas.extend({"u": [float(v) for v in u]} for u in U)
    return Dataset(g, X, [none] * spec.n_samples, metas)


def euclidean_solutions(data: Dataset) -> np.ndarray:
    """Solver output on plain edge lengths for every record (non-learning baseline)."""
    g = data.graph
    kind = solvers.tsp_kind_for(g) if not data.is_path_data else SolverKind.SPP
    X, _ = solvers.solve_batch(kind, g, np.broadcast_to(g.edge_lengths, (len(data), g.n_edges)), data.requirements)
    return X


# --------------------------------------------------------------------------
# corrupted paths for outlier and denoising checks

BLOCKED_COST = 1e6


def _segments_hit_box(a, b, box):
    """Whether each segment ``a[i] -> b[i]`` meets the axis-aligned box (Liang-Barsky clipping)."""
    x0, y0, x1, y1 = box
    d = b - a
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    hit = np.ones(len(a), dtype=bool)
    for q, lo, hi in ((0, x0, x1), (1, y0, y1)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - a[:, q]) / d[:, q]
            tb = (hi - a[:, q]) / d[:, q]
        flat = d[:, q] == 0
        hit &= ~(flat & ((a[:, q] < lo) | (a[:, q] > hi)))
        t0 = np.where(flat, t0, np.maximum(t0, np.minimum(ta, tb)))
        t1 = np.where(flat, t1, np.minimum(t1, np.maximum(ta, tb)))
    return hit & (t0 <= t1)


def detour_path(g: Graph, p: Requirement, box, y=None) -> np.ndarray:
    """Shortest path after removing every edge that crosses ``box``.

    ``box = (x0, y0, x1, y1)`` in normalised coordinates.  Removed edges
    get a prohibitive cost before re-solving under ``y`` (edge lengths by
    default).
    """
    y = g.edge_lengths if y is None else np.asarray(y, dtype=np.float64)
    pos = g.normalized_positions
    x0, y0, x1, y1 = box
    for n in (p.source, p.target):
        px, py = pos[g.index(n)]
        if x0 <= px <= x1 and y0 <= py <= y1:
            raise ConfigError("detour box contains the source or target")
    blocked = _segments_hit_box(pos[g.src], pos[g.dst], box)
    x = solvers.solve(SolverKind.SPP, g, np.where(blocked, BLOCKED_COST, y), p)
    if np.any(x[blocked]):
        raise NoPathExistsError("no path around the detour box")
    return x


def one_edge_detour(g: Graph, x, p: Requirement, rng=None):
    """Replace one arc ``u -> v`` of the path by ``u -> w -> v`` with a fresh node ``w``.

    Returns None when no arc of the path admits such a detour.
    """
    rng = np.random.default_rng(rng)
    nodes = [g.index(n) for n in path_nodes(g, x, p)]
    on_path = set(nodes)
    em = g.edge_matrix
    for k in rng.permutation(len(nodes) - 1):
        u, v = nodes[k], nodes[k + 1]
        ws = [w for w in range(g.n_nodes) if w not in on_path and em[u, w] >= 0 and em[w, v] >= 0]
        if ws:
            w = ws[rng.integers(len(ws))]
            out = np.array(x, dtype=np.int8).copy()
            out[em[u, v]] = 0
            out[em[u, w]] = 1
            out[em[w, v]] = 1
            return out
    return None
