import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon

from iolvm import errors, metrics


def test_jsd_extremes():
    p = np.array([0.5, 0.5, 0.0])
    assert metrics.js_divergence(p, p) == 0.0
    assert metrics.js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)


def test_jsd_against_scipy(rng):
    for _ in range(20):
        a = rng.dirichlet(np.ones(8))
        b = rng.dirichlet(np.ones(8))
        assert metrics.js_divergence(a, b) == pytest.approx(jensenshannon(a, b, base=2) ** 2, abs=1e-12)


def test_jsd_errors():
    with pytest.raises(errors.NotNormalizedError):
        metrics.js_divergence([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(errors.LengthMismatchError):
        metrics.js_divergence([1.0], [0.5, 0.5])


def test_rmse_and_iou():
    assert metrics.rmse_edge_usage([1, 2, 3], [1, 2, 3]) == 0
    assert metrics.rmse_edge_usage([0, 0], [3, 4]) == pytest.approx(np.sqrt(12.5))
    assert metrics.iou([1, 1, 0, 0], [0, 1, 1, 0]) == pytest.approx(1 / 3)
    assert metrics.iou([0, 0], [0, 0]) == 1.0


def test_full_match_and_recall():
    truth = np.array([[1, 1, 0, 0], [0, 1, 1, 0]])
    preds = [np.array([1, 1, 0, 0]), np.array([0, 1, 0, 1])]
    assert metrics.full_match_rate(truth, preds) == 0.5
    assert metrics.full_match_rate(truth, preds, feasible=[False, True]) == 0.0
    assert metrics.full_match_rate(truth, [None, preds[1]]) == 0.0
    assert metrics.edge_recall(truth, preds) == pytest.approx(0.75)
    with pytest.raises(errors.EmptyGroundTruthError):
        metrics.edge_recall([[0, 0]], [np.array([1, 0])])
    with pytest.raises(errors.EmptyInputError):
        metrics.full_match_rate(np.zeros((0, 3)), [])


def test_cluster_purity(rng):
    centers = np.array([[0, 0], [10, 0], [0, 10]])
    labels = np.repeat([0, 1, 2], 50)
    Z = centers[labels] + rng.normal(scale=0.5, size=(150, 2))
    assert metrics.cluster_purity(Z, labels, 3) == 1.0
    # unrelated labels on one blob: purity near the majority share
    labs = rng.integers(0, 3, 300)
    p = metrics.cluster_purity(rng.normal(size=(300, 2)), labs, 3)
    assert p < 0.5
    assert metrics.cluster_purity(Z, labels, 1) == pytest.approx(1 / 3)


def test_distinct_paths():
    assert metrics.distinct_path_count([[1, 0], [1, 0], [0, 1]]) == 2


def test_results_csv(tmp_path):
    path = tmp_path / "r.csv"
    metrics.append_results(path, [metrics.MetricReport("jsd", 0.1, dataset="d", model="m", seed=1)])
    metrics.append_results(path, [metrics.summarize("iou", [0.5, 0.7])])
    lines = path.read_text().splitlines()
    assert lines[0].startswith("metric,value,std,n")
    assert len(lines) == 3 and lines[2].startswith("iou,0.6,0.1,2")
    with pytest.raises(ValueError):
        metrics.MetricReport("x", float("nan"))
