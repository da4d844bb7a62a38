"""Spatially embedded graphs, solution vectors and their validation."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DanglingEdgeError,
    DuplicateEdgeError,
    DuplicateNodeError,
    EmptyInputError,
    GraphMismatchError,
    LengthMismatchError,
    NotNormalizedError,
    ParseError,
    SelfLoopError,
)


class Graph:
    """Immutable graph with 2-D node positions and densely indexed edges.

    Edges are stored as two integer arrays ``src``/``dst`` holding *node
    indices* (positions in ``node_ids``), so edge ``e`` joins
    ``src[e] -> dst[e]``.  Undirected graphs keep one canonical edge per
    node pair and solvers traverse it both ways.
    """

    def __init__(self, node_ids, positions, src, dst, directed: bool):
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.directed = bool(directed)
        self._index = {int(v): i for i, v in enumerate(self.node_ids)}
        for arr in (self.node_ids, self.positions, self.src, self.dst):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph({kind}, |V|={self.n_nodes}, |E|={self.n_edges})"

    def index(self, node_id: int) -> int:
        """Position of ``node_id`` in the node arrays."""
        try:
            return self._index[int(node_id)]
        except KeyError:
            raise GraphMismatchError(f"node {node_id} is not in the graph") from None

    def has_node(self, node_id: int) -> bool:
        return int(node_id) in self._index

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.positions[self.dst] - self.positions[self.src]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def normalized_positions(self) -> np.ndarray:
        """Positions rescaled to the unit square by the bounding box."""
        lo = self.positions.min(axis=0)
        span = self.positions.max(axis=0) - lo
        span[span == 0] = 1.0
        return (self.positions - lo) / span

    @cached_property
    def edge_matrix(self) -> np.ndarray:
        """``(n, n)`` matrix of edge ids, ``-1`` where no edge exists.

        For parallel directed arcs the first one wins.
        """
        m = np.full((self.n_nodes, self.n_nodes), -1, dtype=np.int64)
        for e in range(self.n_edges - 1, -1, -1):
            m[self.src[e], self.dst[e]] = e
            if not self.directed:
                m[self.dst[e], self.src[e]] = e
        return m

    @cached_property
    def csr(self):
        """Outgoing-arc adjacency ``(indptr, heads, edge_ids)``.

        Undirected edges appear once in each direction.  Arcs of a node
        are sorted by head node, then edge id.
        """
        if self.directed:
            tails, heads, eids = self.src, self.dst, np.arange(self.n_edges)
        else:
            tails = np.concatenate([self.src, self.dst])
            heads = np.concatenate([self.dst, self.src])
            eids = np.concatenate([np.arange(self.n_edges)] * 2)
        order = np.lexsort((eids, heads, tails))
        tails, heads, eids = tails[order], heads[order], eids[order]
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, tails + 1, 1)
        return np.cumsum(indptr), heads.astype(np.int64), eids.astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "directed": self.directed,
            "nodes": [
                {"id": int(v), "x": float(p[0]), "y": float(p[1])}
                for v, p in zip(self.node_ids, self.positions)
            ],
            "edges": [
                {"id": e, "src": int(self.node_ids[s]), "dst": int(self.node_ids[t])}
                for e, (s, t) in enumerate(zip(self.src, self.dst))
            ],
        }

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(b"D" if self.directed else b"U")
        for arr in (self.node_ids, self.positions, self.src, self.dst):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def build_graph(nodes: Iterable, edges: Iterable, directed: bool = True) -> Graph:
    """Build a :class:`Graph`.

    ``nodes`` is an iterable of ``(node_id, (x, y))`` and ``edges`` an
    iterable of ``(src_id, dst_id)``; edge ids follow input order.
    """
    node_ids, positions, index = [], [], {}
    for node_id, pos in nodes:
        node_id = int(node_id)
        if node_id in index:
            raise DuplicateNodeError(f"node {node_id} appears twice")
        index[node_id] = len(node_ids)
        node_ids.append(node_id)
        positions.append(tuple(float(c) for c in pos))

    src, dst, seen = [], [], set()
    for e, (u, v) in enumerate(edges):
        if u not in index or v not in index:
            missing = u if u not in index else v
            raise DanglingEdgeError(f"edge {e} references unknown node {missing}")
        if u == v:
            raise SelfLoopError(f"edge {e} is a self-loop on node {u}")
        if not directed:
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DuplicateEdgeError(f"node pair {key} appears twice")
            seen.add(key)
        src.append(index[u])
        dst.append(index[v])
    return Graph(node_ids, np.array(positions).reshape(-1, 2), src, dst, directed)


def graph_from_dict(data: dict) -> Graph:
    try:
        directed = bool(data["directed"])
        nodes = [(n["id"], (n["x"], n["y"])) for n in data["nodes"]]
        edges = sorted(data["edges"], key=lambda e: int(e["id"]))
        ids = [int(e["id"]) for e in edges]
        pairs = [(int(e["src"]), int(e["dst"])) for e in edges]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed graph document: {exc}") from exc
    if ids != list(range(len(ids))):
        raise ParseError("edge ids must be dense and unique (0..|E|-1)")
    return build_graph(nodes, pairs, directed)


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict()))


def load_graph(path) -> Graph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return graph_from_dict(data)


@dataclass(frozen=True)
class Requirement:
    """Start/target pair for path problems; both ``None`` for tours."""

    source: Optional[int] = None
    target: Optional[int] = None

    @classmethod
    def none(cls) -> "Requirement":
        return cls()

    @property
    def is_path(self) -> bool:
        return self.source is not None

    def check(self, g: Graph) -> None:
        if (self.source is None) != (self.target is None):
            raise ConfigError("source and target must both be set or both be None")
        if self.is_path:
            if self.source == self.target:
                raise ConfigError("source and target must differ")
            g.index(self.source)
            g.index(self.target)


class Failure(enum.Enum):
    DISCONNECTED_EDGES = "DisconnectedEdges"
    WRONG_ENDPOINTS = "WrongEndpoints"
    NOT_A_CYCLE = "NotACycle"
    NODE_REVISITED = "NodeRevisited"
    NOT_HAMILTONIAN = "NotHamiltonian"


@dataclass(frozen=True)
class ValidationReport:
    feasible: bool
    failure: Optional[Failure] = None

    def __bool__(self):
        return self.feasible


_OK = ValidationReport(True)


def as_solution(x, n_edges: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or len(x) != n_edges:
        raise LengthMismatchError(f"solution has shape {x.shape}, expected ({n_edges},)")
    return x


def _selected_arcs(g: Graph, x: np.ndarray):
    """Map node -> list of (neighbour, edge id) over selected edges."""
    out = [[] for _ in range(g.n_nodes)]
    indeg = np.zeros(g.n_nodes, dtype=np.int64)
    for e in np.flatnonzero(x):
        u, v = int(g.src[e]), int(g.dst[e])
        out[u].append((v, int(e)))
        if g.directed:
            indeg[v] += 1
        else:
            out[v].append((u, int(e)))
    return out, indeg


def validate_solution(g: Graph, x, p: Requirement) -> ValidationReport:
    """Check that ``x`` is a simple s-t path (``p`` set) or a Hamiltonian cycle."""
    x = as_solution(x, g.n_edges)
    if np.any((x != 0) & (x != 1)):
        return ValidationReport(False, Failure.DISCONNECTED_EDGES)
    n_sel = int(np.count_nonzero(x))
    adj, indeg = _selected_arcs(g, x)
    deg = np.array([len(a) for a in adj])

    if p.is_path:
        s, t = g.index(p.source), g.index(p.target)
        if n_sel == 0:
            return ValidationReport(False, Failure.WRONG_ENDPOINTS)
        limit = 1 if g.directed else 2
        if np.any(deg > limit) or np.any(indeg > 1):
            return ValidationReport(False, Failure.NODE_REVISITED)
        if g.directed:
            if indeg[s] != 0 or deg[t] != 0 or deg[s] != 1 or indeg[t] != 1:
                return ValidationReport(False, Failure.WRONG_ENDPOINTS)
        elif deg[s] != 1 or deg[t] != 1:
            return ValidationReport(False, Failure.WRONG_ENDPOINTS)
        visited = {s}
        cur, prev_edge, walked = s, -1, 0
        while cur != t:
            nxt = [(v, e) for v, e in adj[cur] if e != prev_edge]
            if not nxt:
                if walked == n_sel:
                    return ValidationReport(False, Failure.WRONG_ENDPOINTS)
                return ValidationReport(False, Failure.DISCONNECTED_EDGES)
            v, e = nxt[0]
            if v in visited:
                return ValidationReport(False, Failure.NODE_REVISITED)
            visited.add(v)
            cur, prev_edge = v, e
            walked += 1
        if walked != n_sel:
            return ValidationReport(False, Failure.DISCONNECTED_EDGES)
        return _OK

    if n_sel == 0:
        return ValidationReport(False, Failure.NOT_HAMILTONIAN)
    if g.directed:
        if np.any(deg > 1) or np.any(indeg > 1):
            return ValidationReport(False, Failure.NODE_REVISITED)
        if np.any((deg > 0) != (indeg > 0)):
            return ValidationReport(False, Failure.NOT_A_CYCLE)
    else:
        if np.any(deg > 2):
            return ValidationReport(False, Failure.NODE_REVISITED)
        if np.any(deg == 1):
            return ValidationReport(False, Failure.NOT_A_CYCLE)
    start = int(np.flatnonzero(deg)[0])
    cur, prev_edge, walked = start, -1, 0
    while True:
        nxt = [(v, e) for v, e in adj[cur] if e != prev_edge]
        if not nxt:
            return ValidationReport(False, Failure.NOT_A_CYCLE)
        cur, prev_edge = nxt[0]
        walked += 1
        if cur == start:
            break
    if walked != n_sel:
        return ValidationReport(False, Failure.NOT_A_CYCLE)
    if walked != g.n_nodes:
        return ValidationReport(False, Failure.NOT_HAMILTONIAN)
    return _OK


def edge_usage(xs, normalize: bool = False) -> np.ndarray:
    """Per-edge usage counts over a collection of solutions.

    ``xs`` is a sequence of solution vectors or a 2-D array with one
    solution per row.  With ``normalize`` the result sums to one.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise EmptyInputError("edge_usage needs at least one solution")
    if xs.ndim == 1:
        xs = xs[None, :]
    counts = xs.sum(axis=0)
    if normalize:
        total = counts.sum()
        if total <= 0:
            raise NotNormalizedError("solutions select no edges; cannot normalize")
        counts = counts / total
    return counts


def solution_from_edges(edge_ids: Sequence[int], n_edges: int) -> np.ndarray:
    x = np.zeros(n_edges, dtype=np.int8)
    edge_ids = np.asarray(list(edge_ids), dtype=np.int64)
    if edge_ids.size and (edge_ids.min() < 0 or edge_ids.max() >= n_edges):
        raise DanglingEdgeError("edge id out of range")
    x[edge_ids] = 1
    return x


def path_nodes(g: Graph, x, p: Requirement) -> list:
    """Node indices visited by a feasible s-t path, in order."""
    adj, _ = _selected_arcs(g, np.asarray(x))
    cur, prev_edge = g.index(p.source), -1
    t = g.index(p.target)
    nodes = [cur]
    while cur != t:
        cur, prev_edge = next((v, e) for v, e in adj[cur] if e != prev_edge)
        nodes.append(cur)
    return nodes
