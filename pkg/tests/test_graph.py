import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iolvm import errors
from iolvm.graph import (
    Failure,
    Requirement,
    build_graph,
    edge_usage,
    graph_from_dict,
    load_graph,
    path_nodes,
    save_graph,
    solution_from_edges,
    validate_solution,
)
from iolvm.solvers import SolverKind, solve

from conftest import complete_graph, line_graph, random_digraph


def test_smallest_graph():
    g = build_graph([(0, (0, 0)), (1, (1, 0))], [(0, 1)])
    assert g.n_edges == 1 and g.n_nodes == 2
    assert g.src[0] == 0 and g.dst[0] == 1


def test_construction_errors():
    nodes = [(0, (0, 0)), (1, (1, 0)), (2, (2, 0))]
    with pytest.raises(errors.DanglingEdgeError):
        build_graph(nodes, [(0, 99)])
    with pytest.raises(errors.DuplicateNodeError):
        build_graph(nodes + [(1, (5, 5))], [])
    with pytest.raises(errors.SelfLoopError):
        build_graph(nodes, [(2, 2)])
    with pytest.raises(errors.DuplicateEdgeError):
        build_graph(nodes, [(0, 1), (1, 0)], directed=False)
    # antiparallel arcs are fine when directed
    assert build_graph(nodes, [(0, 1), (1, 0)]).n_edges == 2


def test_edge_lengths_and_normalized_positions():
    g = build_graph([(5, (1, 1)), (7, (4, 5))], [(5, 7)])
    assert g.edge_lengths[0] == pytest.approx(5.0)
    assert np.allclose(g.normalized_positions, [[0, 0], [1, 1]])
    assert g.index(7) == 1 and not g.has_node(6)


def test_json_round_trip(tmp_path):
    g = complete_graph(5, 0)
    save_graph(g, tmp_path / "g.json")
    h = load_graph(tmp_path / "g.json")
    assert h.fingerprint() == g.fingerprint()
    doc = json.loads((tmp_path / "g.json").read_text())
    assert set(doc) >= {"directed", "nodes", "edges"}
    assert set(doc["nodes"][0]) == {"id", "x", "y"}


def test_loader_rejects_non_dense_ids():
    doc = {
        "directed": True,
        "nodes": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 1, "y": 0}],
        "edges": [{"id": 1, "src": 0, "dst": 1}],
    }
    with pytest.raises(errors.ParseError):
        graph_from_dict(doc)


def test_line_path_feasible():
    g = line_graph(3)
    assert validate_solution(g, [1, 1], Requirement(0, 2)).feasible


def test_disconnected_segments():
    g = line_graph(5)
    # s=0 -> 1 and 3 -> 4 only
    rep = validate_solution(g, [1, 0, 1, 0], Requirement(0, 4))
    assert not rep.feasible
    # 0->1, 2->3 with target 3: the walk from 0 gets stuck
    rep = validate_solution(g, [1, 0, 1, 0], Requirement(0, 3))
    assert rep.failure == Failure.DISCONNECTED_EDGES


def test_path_with_extra_cycle_is_rejected():
    # 0->1->2 plus a separate 3->4->3 loop
    nodes = [(i, (i, 0)) for i in range(5)]
    g = build_graph(nodes, [(0, 1), (1, 2), (3, 4), (4, 3)])
    rep = validate_solution(g, [1, 1, 1, 1], Requirement(0, 2))
    assert rep.failure == Failure.DISCONNECTED_EDGES


def test_wrong_endpoints_and_revisits():
    g = line_graph(4)
    assert validate_solution(g, [1, 1, 0], Requirement(0, 3)).failure == Failure.WRONG_ENDPOINTS
    nodes = [(i, (i, 0)) for i in range(3)]
    g = build_graph(nodes, [(0, 1), (1, 2), (2, 1), (1, 0)])
    rep = validate_solution(g, [1, 1, 1, 0], Requirement(0, 2))
    assert rep.failure == Failure.NODE_REVISITED
    assert not validate_solution(g, [0, 0, 0, 0], Requirement(0, 2)).feasible


def test_triangle_cycle():
    g = complete_graph(3, 1)
    assert validate_solution(g, [1, 1, 1], Requirement()).feasible


def test_cycle_failures():
    g = complete_graph(6, 2)
    E = g.edge_matrix

    def sol(pairs):
        return solution_from_edges([E[a, b] for a, b in pairs], g.n_edges)

    two_triangles = sol([(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert validate_solution(g, two_triangles, Requirement()).failure == Failure.NOT_A_CYCLE
    short = sol([(0, 1), (1, 2), (2, 0)])
    assert validate_solution(g, short, Requirement()).failure == Failure.NOT_HAMILTONIAN
    open_path = sol([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    assert validate_solution(g, open_path, Requirement()).failure == Failure.NOT_A_CYCLE
    star = sol([(0, 1), (0, 2), (0, 3)])
    assert validate_solution(g, star, Requirement()).failure == Failure.NODE_REVISITED
    full = sol([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)])
    assert validate_solution(g, full, Requirement()).feasible


def test_length_mismatch():
    g = line_graph(3)
    with pytest.raises(errors.LengthMismatchError):
        validate_solution(g, [1, 1, 1], Requirement(0, 2))


def test_requirement_checks():
    g = line_graph(3)
    with pytest.raises(errors.ConfigError):
        Requirement(1, 1).check(g)
    with pytest.raises(errors.GraphMismatchError):
        Requirement(0, 9).check(g)


def test_edge_usage_basic():
    assert edge_usage([[1, 0, 1, 0]]).tolist() == [1, 0, 1, 0]
    one = edge_usage([[1, 0, 1]], normalize=True)
    two = edge_usage([[1, 0, 1], [1, 0, 1]], normalize=True)
    assert np.allclose(one, two)
    with pytest.raises(errors.EmptyInputError):
        edge_usage([])


def test_edge_usage_bernoulli_counts(rng):
    # oracle: binomial mean and variance per edge
    probs = rng.uniform(0.1, 0.9, 30)
    xs = (rng.random((100, 30)) < probs).astype(np.int8)
    counts = edge_usage(xs)
    var = 100 * probs * (1 - probs)
    # total count is a sum of independent binomials
    assert abs(counts.sum() - 100 * probs.sum()) < 3 * np.sqrt(var.sum())
    assert np.mean(np.abs(counts - 100 * probs) < 3 * np.sqrt(var)) >= 0.9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1), min_size=6, max_size=6), min_size=1, max_size=20))
def test_edge_usage_normalized_sums_to_one(rows):
    xs = np.array(rows)
    if xs.sum() == 0:
        with pytest.raises(errors.NotNormalizedError):
            edge_usage(xs, normalize=True)
        return
    u = edge_usage(xs, normalize=True)
    assert abs(u.sum() - 1) < 1e-12 and np.all(u >= 0)


def test_solver_outputs_always_validate():
    # cross-module round trip on 1000 random instances
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        g = random_digraph(8, 0.35, rng)
        y = rng.uniform(0.1, 2.0, g.n_edges)
        s, t = rng.choice(8, 2, replace=False)
        try:
            x = solve(SolverKind.SPP, g, y, Requirement(int(s), int(t)))
        except errors.NoPathExistsError:
            continue
        assert validate_solution(g, x, Requirement(int(s), int(t))).feasible
        # degree property of a feasible s-t path
        nodes = path_nodes(g, x, Requirement(int(s), int(t)))
        assert nodes[0] == s and nodes[-1] == t and len(set(nodes)) == len(nodes)
        checked += 1
    for seed in range(50):
        g = complete_graph(int(np.random.default_rng(seed).integers(4, 10)), seed)
        y = np.random.default_rng(seed).uniform(0.1, 2, g.n_edges)
        x = solve(SolverKind.TSP_EXACT, g, y, Requirement())
        assert validate_solution(g, x, Requirement()).feasible
