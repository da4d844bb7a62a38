"""Dataset container and its JSONL file format.

One record per line::

    {"edges": [3, 17, 42], "source": 0, "target": 9, "meta": {"agent": 1}}

``source``/``target`` are ``null`` for tours.  The graph lives in a
companion JSON file (see :func:`iolvm.graph.save_graph`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .errors import GraphMismatchError, InfeasibleRecordError, LengthMismatchError, ParseError
from .graph import Graph, Requirement, load_graph, save_graph, validate_solution


@dataclass
class Dataset:
    graph: Graph
    X: np.ndarray
    requirements: List[Requirement]
    meta: List[dict] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.int8)
        if self.X.ndim != 2 or self.X.shape[1] != self.graph.n_edges:
            raise LengthMismatchError(f"solution matrix shape {self.X.shape} does not fit {self.graph}")
        if len(self.requirements) != len(self.X):
            raise LengthMismatchError("one requirement per record expected")
        if not self.meta:
            self.meta = [{} for _ in range(len(self.X))]
        if len(self.meta) != len(self.X):
            raise LengthMismatchError("one meta entry per record expected")

    def __len__(self):
        return len(self.X)

    @property
    def is_path_data(self) -> bool:
        return bool(self.requirements) and self.requirements[0].is_path

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.graph, self.X[idx], [self.requirements[i] for i in idx], [self.meta[i] for i in idx])

    def split(self, n_train: int):
        """First ``n_train`` records for training, the rest for testing."""
        n = len(self)
        return self.subset(np.arange(min(n_train, n))), self.subset(np.arange(min(n_train, n), n))

    def meta_column(self, key, default=None) -> np.ndarray:
        return np.array([m.get(key, default) for m in self.meta])

    def without_meta(self) -> "Dataset":
        return Dataset(self.graph, self.X.copy(), list(self.requirements), [{} for _ in range(len(self))])

    def validate(self) -> None:
        for i, (x, p) in enumerate(zip(self.X, self.requirements)):
            report = validate_solution(self.graph, x, p)
            if not report.feasible:
                raise InfeasibleRecordError(f"record {i} infeasible: {report.failure.value}")


@dataclass(frozen=True)
class TrainingData:
    """What a learner is allowed to see: solutions and requirements only."""

    graph: Graph
    X: np.ndarray
    requirements: Sequence[Requirement]

    def __len__(self):
        return len(self.X)


def training_view(data) -> TrainingData:
    if isinstance(data, TrainingData):
        return data
    return TrainingData(data.graph, np.asarray(data.X, dtype=np.int8), tuple(data.requirements))


def save_dataset(ds: Dataset, path, graph_path=None) -> Path:
    """Write the records as JSONL and the graph next to them.

    Returns the graph path (default ``<stem>.graph.json``).
    """
    path = Path(path)
    graph_path = Path(graph_path) if graph_path else path.with_name(path.stem + ".graph.json")
    save_graph(ds.graph, graph_path)
    with open(path, "w") as fh:
        for x, p, meta in zip(ds.X, ds.requirements, ds.meta):
            rec = {
                "edges": [int(e) for e in np.flatnonzero(x)],
                "source": p.source,
                "target": p.target,
                "meta": meta,
            }
            fh.write(json.dumps(rec, default=_json_default) + "\n")
    return graph_path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def load_dataset(path, graph=None, graph_path=None) -> Dataset:
    """Read a JSONL dataset, validating every record against the graph."""
    path = Path(path)
    if graph is None:
        graph_path = Path(graph_path) if graph_path else path.with_name(path.stem + ".graph.json")
        graph = load_graph(graph_path)
    X, reqs, metas = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                edges = [int(e) for e in rec["edges"]]
                src, dst = rec.get("source"), rec.get("target")
                meta = rec.get("meta") or {}
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if any(e < 0 or e >= graph.n_edges for e in edges):
                raise InfeasibleRecordError(f"{path}:{lineno}: edge id outside 0..{graph.n_edges - 1}")
            for node in (src, dst):
                if node is not None and not graph.has_node(node):
                    raise GraphMismatchError(f"{path}:{lineno}: node {node} not in graph")
            if (src is None) != (dst is None):
                raise ParseError(f"{path}:{lineno}: source and target must both be set or null")
            p = Requirement(None if src is None else int(src), None if dst is None else int(dst))
            x = np.zeros(graph.n_edges, dtype=np.int8)
            x[edges] = 1
            report = validate_solution(graph, x, p)
            if not report.feasible:
                raise InfeasibleRecordError(f"{path}:{lineno}: {report.failure.value}")
            X.append(x)
            reqs.append(p)
            metas.append(meta)
    X = np.array(X, dtype=np.int8).reshape(-1, graph.n_edges)
    return Dataset(graph, X, reqs, metas)
