"""Linear-objective combinatorial solvers ``argmin_{x in X(p)} <y, x>``.

Three solver kinds are provided:

* ``SolverKind.SPP`` -- Dijkstra shortest s-t path (non-negative costs).
* ``SolverKind.TSP_EXACT`` -- Held-Karp dynamic programming, up to 16 nodes.
* ``SolverKind.TSP_HEURISTIC`` -- nearest neighbour followed by 2-opt.

Perturbed calls draw i.i.d. Gaussian noise, add it to the costs and
clamp (SPP only) at a small positive floor before solving.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (
    GraphTooLargeForBruteForceError,
    GraphTooLargeForExactError,
    LengthMismatchError,
    NoPathExistsError,
    RequirementMismatchError,
)
from .graph import Graph, Requirement

MAX_EXACT_NODES = 16
DEFAULT_CLAMP_FLOOR = 1e-6
TWO_OPT_TOL = 1e-12


class SolverKind(str, enum.Enum):
    SPP = "spp"
    TSP_EXACT = "tsp_exact"
    TSP_HEURISTIC = "tsp_heuristic"

    @property
    def is_tsp(self) -> bool:
        return self is not SolverKind.SPP


def tsp_kind_for(g: Graph) -> SolverKind:
    """Exact Held-Karp when it fits in memory, 2-opt otherwise."""
    return SolverKind.TSP_EXACT if g.n_nodes <= MAX_EXACT_NODES else SolverKind.TSP_HEURISTIC


def solution_cost(y, x) -> float:
    return float(np.dot(np.asarray(y, dtype=np.float64), np.asarray(x, dtype=np.float64)))


def clamp_costs(y, floor: float = DEFAULT_CLAMP_FLOOR):
    """Raise entries below ``floor`` to ``floor``; returns ``(costs, n_clamped)``."""
    y = np.asarray(y, dtype=np.float64)
    low = y < floor
    n = int(np.count_nonzero(low))
    if n:
        y = np.where(low, floor, y)
    return y, n


def perturbation(rng, sigma: float, size) -> np.ndarray:
    """Zero-mean Gaussian cost noise with standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(rng)
    if sigma == 0:
        return np.zeros(size)
    return rng.normal(0.0, sigma, size=size)


def _check_requirements(kind: SolverKind, g: Graph, reqs: Sequence[Requirement]):
    for p in reqs:
        if kind.is_tsp and p.is_path:
            raise RequirementMismatchError("TSP solvers take an empty requirement")
        if not kind.is_tsp and not p.is_path:
            raise RequirementMismatchError("SPP needs a source/target requirement")
        p.check(g)
    if kind is SolverKind.TSP_EXACT and g.n_nodes > MAX_EXACT_NODES:
        raise GraphTooLargeForExactError(
            f"Held-Karp limited to {MAX_EXACT_NODES} nodes, graph has {g.n_nodes}"
        )
    if kind.is_tsp and g.n_nodes < (2 if g.directed else 3):
        raise NoPathExistsError("graph too small for a Hamiltonian cycle")


def _solve_chunk(kind, g, costs, src, dst, out):
    if kind is SolverKind.SPP:
        indptr, heads, eids = g.csr
        return _kernels.dijkstra_batch(indptr, heads, eids, costs, g.n_nodes, src, dst, out)
    exact = kind is SolverKind.TSP_EXACT
    return _kernels.tsp_batch(g.edge_matrix, costs, exact, TWO_OPT_TOL, out)


def solve_batch(
    kind: SolverKind,
    g: Graph,
    Y,
    reqs: Sequence[Requirement] | Requirement,
    clamp_floor: float = DEFAULT_CLAMP_FLOOR,
    threads: int = 1,
):
    """Solve one problem per row of ``Y``.

    Returns ``(X, n_clamped)`` where ``X`` is an ``int8`` array with one
    solution per row.  ``reqs`` may be a single requirement shared by all
    rows.  Rows are split into contiguous chunks when ``threads > 1``;
    the result does not depend on the thread count.
    """
    kind = SolverKind(kind)
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y.shape[1] != g.n_edges:
        raise LengthMismatchError(f"cost rows have length {Y.shape[1]}, graph has {g.n_edges} edges")
    if isinstance(reqs, Requirement):
        reqs = [reqs] * len(Y)
    if len(reqs) != len(Y):
        raise LengthMismatchError("need one requirement per cost row")
    _check_requirements(kind, g, set(reqs))
    n_clamped = 0
    if kind is SolverKind.SPP:
        Y, n_clamped = clamp_costs(Y, clamp_floor)
        src = np.array([g.index(p.source) for p in reqs], dtype=np.int64)
        dst = np.array([g.index(p.target) for p in reqs], dtype=np.int64)
    else:
        src = dst = np.zeros(len(Y), dtype=np.int64)
    Y = np.ascontiguousarray(Y)
    X = np.zeros(Y.shape, dtype=np.int8)
    if threads > 1 and len(Y) > 1:
        bounds = np.linspace(0, len(Y), min(threads, len(Y)) + 1).astype(int)
        spans = list(zip(bounds[:-1], bounds[1:]))
        with ThreadPoolExecutor(len(spans)) as pool:
            parts = list(
                pool.map(lambda ab: _solve_chunk(kind, g, Y[ab[0]:ab[1]], src[ab[0]:ab[1]], dst[ab[0]:ab[1]], X[ab[0]:ab[1]]), spans)
            )
        ok = np.concatenate(parts)
    else:
        ok = _solve_chunk(kind, g, Y, src, dst, X)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        if kind is SolverKind.SPP:
            raise NoPathExistsError(f"target {reqs[bad].target} unreachable from {reqs[bad].source}")
        raise NoPathExistsError("graph has no Hamiltonian cycle")
    return X, n_clamped


def solve(kind: SolverKind, g: Graph, y, p: Requirement, clamp_floor: float = DEFAULT_CLAMP_FLOOR):
    """Optimal solution vector for costs ``y`` under requirement ``p``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (g.n_edges,):
        raise LengthMismatchError(f"cost vector has shape {y.shape}, graph has {g.n_edges} edges")
    X, _ = solve_batch(kind, g, y[None, :], [p], clamp_floor)
    return X[0]


def solve_perturbed(kind, g, y, p, sigma_eps: float, rng=None, clamp_floor: float = DEFAULT_CLAMP_FLOOR):
    """Solve on ``y + eps`` with ``eps ~ N(0, sigma_eps^2 I)``; returns ``(x, eps)``."""
    y = np.asarray(y, dtype=np.float64)
    eps = perturbation(rng, sigma_eps, y.shape)
    return solve(kind, g, y + eps, p, clamp_floor), eps


# --------------------------------------------------------------------------
# exhaustive oracles

BRUTE_FORCE_LIMITS = {SolverKind.SPP: 10, SolverKind.TSP_EXACT: 8, SolverKind.TSP_HEURISTIC: 8}


def _best(candidates, y):
    best_key, best = None, None
    for edges in candidates:
        key = (sum(y[e] for e in edges), tuple(sorted(edges)))
        if best_key is None or key < best_key:
            best_key, best = key, edges
    return best


def _simple_paths(g: Graph, s: int, t: int):
    out = [[] for _ in range(g.n_nodes)]
    for e in range(g.n_edges):
        u, v = int(g.src[e]), int(g.dst[e])
        out[u].append((v, e))
        if not g.directed:
            out[v].append((u, e))
    stack = [(s, (s,), ())]
    while stack:
        node, seen, edges = stack.pop()
        if node == t:
            yield edges
            continue
        for v, e in out[node]:
            if v not in seen:
                stack.append((v, seen + (v,), edges + (e,)))


def _cycles(g: Graph):
    em = g.edge_matrix
    n = g.n_nodes
    for perm in itertools.permutations(range(1, n)):
        order = (0,) + perm
        edges = []
        for a, b in zip(order, order[1:] + (0,)):
            e = em[a, b]
            if e < 0:
                break
            edges.append(int(e))
        else:
            yield tuple(edges)


def brute_force(kind: SolverKind, g: Graph, y, p: Requirement) -> np.ndarray:
    """Exhaustive-enumeration optimum.

    Ties are broken towards the lexicographically smallest sorted tuple
    of edge ids.  Limited to 10 nodes for paths and 8 for tours.
    """
    kind = SolverKind(kind)
    y = [float(v) for v in np.asarray(y, dtype=np.float64)]
    if len(y) != g.n_edges:
        raise LengthMismatchError("cost vector length differs from |E|")
    if g.n_nodes > BRUTE_FORCE_LIMITS[kind]:
        raise GraphTooLargeForBruteForceError(
            f"brute force limited to {BRUTE_FORCE_LIMITS[kind]} nodes for {kind.value}"
        )
    _check_requirements(kind, g, [p])
    if kind is SolverKind.SPP:
        best = _best(_simple_paths(g, g.index(p.source), g.index(p.target)), y)
    else:
        best = _best(_cycles(g), y)
    if best is None:
        raise NoPathExistsError("no feasible solution")
    x = np.zeros(g.n_edges, dtype=np.int8)
    x[list(best)] = 1
    return x


def enumerate_solutions(kind: SolverKind, g: Graph, p: Requirement) -> np.ndarray:
    """All feasible solution vectors of a small instance, one per row."""
    kind = SolverKind(kind)
    if g.n_nodes > BRUTE_FORCE_LIMITS[kind]:
        raise GraphTooLargeForBruteForceError("instance too large to enumerate")
    _check_requirements(kind, g, [p])
    if kind is SolverKind.SPP:
        sets = _simple_paths(g, g.index(p.source), g.index(p.target))
    else:
        sets = _cycles(g)
    rows = {tuple(sorted(s)) for s in sets}
    X = np.zeros((len(rows), g.n_edges), dtype=np.int8)
    for i, s in enumerate(sorted(rows)):
        X[i, list(s)] = 1
    return X


def tour_order(g: Graph, x) -> list:
    """Node indices of a Hamiltonian cycle, starting at node 0."""
    x = np.asarray(x)
    nbrs = [[] for _ in range(g.n_nodes)]
    for e in np.flatnonzero(x):
        u, v = int(g.src[e]), int(g.dst[e])
        nbrs[u].append(v)
        if not g.directed:
            nbrs[v].append(u)
    order, prev = [0], -1
    while len(order) < g.n_nodes:
        cur = order[-1]
        nxt = next(v for v in nbrs[cur] if v != prev)
        prev = cur
        order.append(nxt)
    return order


def improving_two_opt_move(g: Graph, y, x, tol: float = 1e-9):
    """First 2-opt move that lowers the tour cost by more than ``tol``, else None.

    Pure-Python check used to audit the heuristic's local optimality.
    """
    tour = tour_order(g, x)
    n = len(tour)
    em = g.edge_matrix

    def cost(order):
        total = 0.0
        for a, b in zip(order, order[1:] + order[:1]):
            e = em[a, b]
            if e < 0:
                return np.inf
            total += y[e]
        return total

    base = cost(tour)
    for i in range(n - 1):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            cand = tour[: i + 1] + tour[i + 1 : j + 1][::-1] + tour[j + 1 :]
            if cost(cand) < base - tol:
                return i, j
    return None
