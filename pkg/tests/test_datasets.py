import json

import numpy as np
import pytest

from iolvm import errors
from iolvm.datagen import WaxmanSpec, gen_waxman_dataset
from iolvm.datasets import Dataset, TrainingData, load_dataset, save_dataset, training_view
from iolvm.graph import Requirement


@pytest.fixture
def small_ds():
    spec = WaxmanSpec(n_nodes=40, alpha=0.6, beta_w=0.5, n_paths=25, requirement_mode="multi")
    return gen_waxman_dataset(spec)


def test_round_trip(tmp_path, small_ds):
    small_ds.meta[0]["note"] = {"width": 12.5, "tags": ["a", "b"]}
    gpath = save_dataset(small_ds, tmp_path / "d.jsonl")
    assert gpath.name == "d.graph.json"
    back = load_dataset(tmp_path / "d.jsonl")
    assert np.array_equal(back.X, small_ds.X)
    assert back.requirements == small_ds.requirements
    assert back.meta == small_ds.meta
    assert back.graph.fingerprint() == small_ds.graph.fingerprint()


def test_record_format(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path / "d.jsonl")
    rec = json.loads((tmp_path / "d.jsonl").read_text().splitlines()[0])
    assert set(rec) == {"edges", "source", "target", "meta"}
    assert rec["edges"] == np.flatnonzero(small_ds.X[0]).tolist()


def _write(tmp_path, small_ds, line):
    save_dataset(small_ds, tmp_path / "d.jsonl")
    (tmp_path / "d.jsonl").write_text(line + "\n")
    return tmp_path / "d.jsonl"


def test_load_errors(tmp_path, small_ds):
    p = small_ds.requirements[0]
    with pytest.raises(errors.InfeasibleRecordError):
        load_dataset(_write(tmp_path, small_ds, json.dumps({"edges": [10**6], "source": p.source, "target": p.target})))
    with pytest.raises(errors.InfeasibleRecordError):
        load_dataset(_write(tmp_path, small_ds, json.dumps({"edges": [0], "source": p.source, "target": p.target})))
    with pytest.raises(errors.ParseError):
        load_dataset(_write(tmp_path, small_ds, "{not json"))
    with pytest.raises(errors.ParseError):
        load_dataset(_write(tmp_path, small_ds, json.dumps({"source": 1, "target": 2})))
    with pytest.raises(errors.GraphMismatchError):
        load_dataset(_write(tmp_path, small_ds, json.dumps({"edges": [], "source": 999, "target": 0})))


def test_training_view_hides_meta(small_ds):
    view = training_view(small_ds)
    assert isinstance(view, TrainingData)
    assert not hasattr(view, "meta")
    assert training_view(view) is view


def test_shape_checks(small_ds):
    g = small_ds.graph
    with pytest.raises(errors.LengthMismatchError):
        Dataset(g, np.zeros((2, g.n_edges + 1)), [Requirement(), Requirement()])
    with pytest.raises(errors.LengthMismatchError):
        Dataset(g, np.zeros((2, g.n_edges)), [Requirement()])
    sub = small_ds.subset([3, 1])
    assert np.array_equal(sub.X, small_ds.X[[3, 1]]) and sub.meta[0] == small_ds.meta[3]
    assert all(m == {} for m in small_ds.without_meta().meta)
