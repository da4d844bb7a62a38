import numpy as np
import pytest

from iolvm import errors
from iolvm.neural import (
    AdamW,
    FreeVector,
    Mlp,
    RmsProp,
    load_checkpoint,
    make_optimizer,
    read_checkpoint_meta,
    save_checkpoint,
    softplus,
    softplus_inverse,
)


def numeric_grad(f, arr, h=1e-5):
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        fp = f()
        arr[i] = old - h
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)


def test_zero_net_outputs():
    net = Mlp([3, 4, 2], "identity", seed=0)
    for p in net.params:
        p[...] = 0
    assert np.all(net(np.ones(3)) == 0)
    one = Mlp([2, 2], "softplus", seed=0)
    one.params[0][...] = np.eye(2)
    one.params[1][...] = 0
    assert np.allclose(one(np.zeros(2)), np.log(2))


def test_forward_matches_manual_recomputation(rng):
    net = Mlp([5, 7, 6, 3], "sigmoid", seed=1)
    x = rng.normal(size=(4, 5))
    (W1, b1), (W2, b2), (W3, b3) = net.layers
    h = np.maximum(x @ W1 + b1, 0)
    h = np.maximum(h @ W2 + b2, 0)
    out = 1 / (1 + np.exp(-(h @ W3 + b3)))
    assert np.allclose(net(x), out, atol=1e-14)


def test_dimension_checks():
    net = Mlp([3, 2], seed=0)
    with pytest.raises(errors.DimensionMismatchError):
        net(np.zeros(4))
    with pytest.raises(errors.DimensionMismatchError):
        Mlp([3], seed=0)


@pytest.mark.parametrize("head", ["identity", "softplus", "sigmoid"])
@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_finite_differences(head, seed):
    rng = np.random.default_rng(seed)
    net = Mlp([4, 6, 5, 3], head, seed=seed)
    x = rng.normal(size=(3, 4))
    gout = rng.normal(size=(3, 3))
    out, cache = net.forward(x)
    grads, gin = net.backward(cache, gout)

    def f():
        return float(np.sum(gout * net(x)))

    for p, g in zip(net.params, grads):
        assert rel_err(g, numeric_grad(f, p)) < 1e-4
    gx = numeric_grad(lambda: float(np.sum(gout * net(x))), x)
    assert rel_err(gin, gx) < 1e-4


def test_backward_without_head_uses_preactivation_gradient(rng):
    net = Mlp([3, 4, 2], "sigmoid", seed=2)
    x = rng.normal(size=(5, 3))
    g_pre = rng.normal(size=(5, 2))
    _, cache = net.forward(x)
    grads, _ = net.backward(cache, g_pre, through_head=False)

    def f():
        _, c = net.forward(x)
        return float(np.sum(g_pre * c["pre"][-1]))

    for p, g in zip(net.params, grads):
        assert rel_err(g, numeric_grad(f, p)) < 1e-4


def test_zero_grad_output_and_linear_case(rng):
    net = Mlp([3, 2], "identity", seed=0)
    x = rng.normal(size=3)
    _, cache = net.forward(x)
    grads, gin = net.backward(cache, np.zeros(2))
    assert all(np.all(g == 0) for g in grads) and np.all(gin == 0)
    go = rng.normal(size=2)
    _, gin = net.backward(cache, go)
    assert np.allclose(gin, net.params[0] @ go)


def test_stale_cache_detected():
    net = Mlp([2, 2], seed=0)
    _, cache = net.forward(np.ones(2))
    opt = RmsProp([net], lr=0.1)
    opt.step([net.zero_grads()])
    with pytest.raises(errors.StaleCacheError):
        net.backward(cache, np.ones(2))


def test_softplus_positive_and_inverse():
    a = np.linspace(-50, 50, 101)
    assert np.all(softplus(a) > 0)
    y = np.array([1e-3, 0.5, 2.0, 30.0])
    assert np.allclose(softplus(softplus_inverse(y)), y)


def test_adamw_two_step_hand_trace():
    # torch.optim.AdamW rule, written out for one scalar:
    # p <- p (1 - lr wd); m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2
    # p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    lr, wd, b1, b2, eps = 0.1, 0.01, 0.9, 0.999, 1e-8
    fv = FreeVector([1.0])
    opt = AdamW([fv], lr=lr, betas=(b1, b2), eps=eps, weight_decay=wd)
    opt.step([[np.array([0.5])]])
    # step 1: m_hat = 0.5, v_hat = 0.25 -> update = 0.1 * 0.5 / (0.5 + 1e-8)
    p1 = 1.0 * (1 - 0.001) - 0.1 * 0.5 / (0.5 + 1e-8)
    assert fv.value[0] == pytest.approx(p1, abs=1e-15)
    assert p1 == pytest.approx(0.899000002, abs=1e-9)
    opt.step([[np.array([-0.2])]])
    m = 0.9 * 0.05 + 0.1 * -0.2  # 0.025
    v = 0.999 * 0.00025 + 0.001 * 0.04  # 0.00028975
    p2 = p1 * (1 - 0.001) - 0.1 * (m / 0.19) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
    assert fv.value[0] == pytest.approx(p2, abs=1e-14)
    assert p2 == pytest.approx(0.8635408, abs=1e-6)
    assert opt.steps == 2


def test_rmsprop_step_trace():
    fv = FreeVector([2.0, -1.0])
    opt = RmsProp([fv], lr=0.01, alpha=0.99, eps=1e-8)
    g = np.array([0.3, -4.0])
    opt.step([[g]])
    sq = 0.01 * g**2
    assert np.allclose(fv.value, np.array([2.0, -1.0]) - 0.01 * g / (np.sqrt(sq) + 1e-8))


@pytest.mark.parametrize("kind", ["rmsprop", "adamw"])
def test_no_op_updates(kind):
    fv = FreeVector([1.0, 2.0])
    opt = make_optimizer(kind, [fv], lr=0.1, weight_decay=0.0)
    opt.step([[np.zeros(2)]])
    assert np.array_equal(fv.value, [1.0, 2.0])
    fv2 = FreeVector([1.0, 2.0])
    opt2 = make_optimizer(kind, [fv2], lr=0.0)
    opt2.step([[np.ones(2)]])
    assert np.array_equal(fv2.value, [1.0, 2.0])


def test_shape_mismatch():
    fv = FreeVector([1.0, 2.0])
    opt = RmsProp([fv], lr=0.1)
    with pytest.raises(errors.ShapeMismatchError):
        opt.step([[np.zeros(3)]])


def test_checkpoint_round_trip(tmp_path, rng):
    net = Mlp([3, 5, 2], "softplus", seed=0)
    opt = AdamW([net], lr=0.01)
    _, cache = net.forward(rng.normal(size=(4, 3)))
    grads, _ = net.backward(cache, rng.normal(size=(4, 2)))
    opt.step([grads])
    save_checkpoint(tmp_path / "c.npz", {"net": net}, opt, {"beta": 1.0})
    net2 = Mlp([3, 5, 2], "softplus", seed=9)
    opt2 = AdamW([net2], lr=0.01)
    meta = load_checkpoint(tmp_path / "c.npz", {"net": net2}, opt2)
    for a, b in zip(net.params, net2.params):
        assert np.array_equal(a, b)
    assert opt2.steps == 1 and meta["config"] == {"beta": 1.0}
    assert read_checkpoint_meta(tmp_path / "c.npz")["config_hash"] == meta["config_hash"]
    with pytest.raises(errors.CheckpointError):
        load_checkpoint(tmp_path / "c.npz", {"net": Mlp([3, 6, 2], "softplus", seed=0)})
