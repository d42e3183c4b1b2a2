import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import gradcheck
from pose2imu.nn import (TCN, Adam, CheckpointError, EarlyStopping, Tensor, Topology, TrainConfig,
                         TrainingDivergedError, conv1d_same, dropout, mse_loss, mul, pack,
                         softmax_cross_entropy, total, train_loop, unpack)


@pytest.mark.parametrize("seed", range(3))
def test_primitive_gradients(seed):
    for name, build, inputs in gradcheck.op_cases(seed):
        assert gradcheck.check(build, inputs) <= gradcheck.TOL, name


def test_network_gradients():
    worst, skipped, n = gradcheck.network_check(0)
    assert worst <= gradcheck.TOL
    assert skipped < n


def test_linear_form_gradient_is_input():
    x = np.arange(6.0).reshape(2, 3)
    w = Tensor(np.ones((2, 3)), requires_grad=True)
    total(mul(w, Tensor(x))).backward()
    np.testing.assert_array_equal(w.grad, x)


def test_parameter_off_loss_path_has_zero_gradient():
    net = TCN(Topology(2, 1, widths=(4,), kernels=(3,), dilations=(1,), dropout=0.0), dtype=np.float64)
    x = np.random.default_rng(0).standard_normal((1, 8, 2))
    unused = Tensor(np.ones(3), requires_grad=True)
    mse_loss(net.forward(x), np.zeros((1, 8, 1))).backward()
    opt = Adam({"u": unused, **net.parameters()})
    before = unused.data.copy()
    opt.step()
    assert unused.grad is None
    np.testing.assert_array_equal(unused.data, before)


def test_identity_width_one_conv():
    x = np.random.default_rng(1).standard_normal((2, 10, 3))
    out = conv1d_same(x, np.eye(3)[None], None, 1)
    np.testing.assert_array_equal(out.data, x)


def test_delta_kernel_is_identity():
    x = np.random.default_rng(2).standard_normal((2, 10, 3))
    w = np.zeros((3, 3, 3))
    w[1] = np.eye(3)
    np.testing.assert_allclose(conv1d_same(x, w, None, 4).data, x, atol=0)


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 11, 2))
    w = rng.standard_normal((3, 2, 4))
    d = 2
    out = conv1d_same(x, w, None, d).data
    ref = np.zeros((1, 11, 4))
    for t in range(11):
        for k in range(3):
            s = t + (k - 1) * d
            if 0 <= s < 11:
                ref[0, t] += x[0, s] @ w[k]
    np.testing.assert_allclose(out, ref, atol=1e-12)


@given(t=st.integers(1, 40), k=st.sampled_from([1, 3, 5, 7]), d=st.integers(1, 8))
@settings(max_examples=60, deadline=None)
def test_same_padding_preserves_length(t, k, d):
    out = conv1d_same(np.zeros((1, t, 2)), np.zeros((k, 2, 3)), None, d)
    assert out.shape == (1, t, 3)


def test_zero_kernels_give_identity_residual():
    net = TCN(Topology(4, 4, widths=(4, 4), kernels=(3, 3), dilations=(1, 2), dropout=0.0))
    for name, p in net.parameters().items():
        if name.startswith("block"):
            p.data[:] = 0
    x = np.random.default_rng(0).standard_normal((2, 16, 4)).astype(np.float32)
    out = x
    for i in range(2):
        out = net.block(i, Tensor(out)).data
    np.testing.assert_array_equal(out, x)


def test_dropout_seeded_reproducible():
    net = TCN(Topology(3, 1), seed=5)
    x = np.random.default_rng(0).standard_normal((2, 16, 3)).astype(np.float32)
    a = net.forward(x, train=True, rng=np.random.default_rng(9)).data
    b = net.forward(x, train=True, rng=np.random.default_rng(9)).data
    assert a.tobytes() == b.tobytes()
    c = net.forward(x).data
    assert c.tobytes() == net.forward(x).data.tobytes()


def test_dropout_scaling():
    x = np.ones((1000, 10))
    y = dropout(x, 0.2, np.random.default_rng(0)).data
    assert set(np.unique(y)) <= {0.0, 1.25}
    assert abs(y.mean() - 1.0) < 0.02


def test_default_topology():
    t = Topology(14, 1)
    assert t.widths == (64, 64, 64, 32) and t.kernels == (3, 3, 3, 1) and t.dilations == (1, 2, 4, 8)
    net = TCN(t)
    assert "block0.proj.w" in net.params and "block3.proj.w" in net.params
    assert "block1.proj.w" not in net.params
    assert net.forward(np.zeros((2, 16, 14), np.float32)).shape == (2, 16, 1)


def test_losses():
    p = np.random.default_rng(0).standard_normal((2, 5, 1))
    assert float(mse_loss(p, p).data) == 0.0
    assert float(mse_loss(p + 2, p).data) == pytest.approx(4.0)
    ce = float(softmax_cross_entropy(np.zeros((3, 4, 10)), np.zeros((3, 4), int)).data)
    assert ce == pytest.approx(math.log(10), abs=1e-12)


def test_adam_first_step():
    w = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam({"w": w})
    total(mul(w, w)).backward()
    opt.step()
    # bias-corrected m_hat = 2, v_hat = 4
    assert w.data[0] == pytest.approx(1 - 0.001 * 2 / (2 + 1e-8), abs=1e-15)


def test_adam_zero_gradient_leaves_params():
    w = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam({"w": w})
    w.grad = np.array([1.0, 1.0])
    opt.step()
    after_one = w.data.copy()
    w.grad = np.zeros(2)
    opt.step()
    np.testing.assert_allclose(w.data, after_one - 0.001 * (0.09 / 0.19) / (np.sqrt(0.000999 / 0.001999) + 1e-8)
                               * np.ones(2), rtol=1e-12)


def test_adam_zero_gradient_from_start_is_noop():
    w = Tensor(np.array([0.5]), requires_grad=True)
    opt = Adam({"w": w})
    for _ in range(3):
        w.grad = np.zeros(1)
        opt.step()
    assert w.data[0] == 0.5


def test_early_stopping_scripted_schedule():
    losses = [1.0 / (e + 1) for e in range(1, 31)] + [1.0 / 31] * 100
    es = EarlyStopping(25)
    for epoch, l in enumerate(losses, start=1):
        es.update(epoch, l)
        if es.should_stop:
            break
    assert epoch == 55 and es.best_epoch == 30


def test_early_stopping_immediate_plateau():
    es = EarlyStopping(25)
    for epoch in range(1, 100):
        es.update(epoch, 1.0)
        if es.should_stop:
            break
    assert epoch == 26 and es.best_epoch == 1


def test_train_loop_restores_best_weights():
    net = TCN(Topology(1, 1, widths=(4,), kernels=(1,), dilations=(1,), dropout=0.0))
    x = np.random.default_rng(0).standard_normal((64, 4, 1)).astype(np.float32)
    schedule = [5.0, 1.0] + [3.0] * 10
    snapshots = {}

    def evaluate(model, epoch):
        snapshots[epoch] = model.state()
        return schedule[epoch - 1]
    cfg = TrainConfig(max_epochs=50, patience=5, batch_size=16)
    net, hist = train_loop(net, (x, 3 * x), (x, 3 * x), cfg, evaluate)
    assert hist.best_epoch == 2 and hist.stopped_epoch == 7
    for k, v in net.state().items():
        np.testing.assert_array_equal(v, snapshots[2][k])


def test_linear_regression_slope():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (256, 1, 1))
    net = TCN(Topology(1, 1, widths=(), kernels=(), dilations=(), dropout=0.0), dtype=np.float64)
    cfg = TrainConfig(max_epochs=400, patience=50, batch_size=32, lr=0.05)
    net, _ = train_loop(net, (x, 3 * x), (x[:32], 3 * x[:32]), cfg)
    assert net.params["head.w"].data.item() == pytest.approx(3.0, abs=1e-2)


def test_identical_runs_identical_trajectories():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 8, 2)).astype(np.float32)
    y = x[..., :1] * 2
    runs = []
    for _ in range(2):
        net = TCN(Topology(2, 1, widths=(4, 4), kernels=(3, 3), dilations=(1, 2)), seed=1)
        net, hist = train_loop(net, (x, y), (x, y), TrainConfig(max_epochs=4, patience=2, batch_size=8, seed=3))
        runs.append((hist.train_loss, pack({}, net.state())))
    assert runs[0] == runs[1]


def test_divergence_raises():
    net = TCN(Topology(1, 1, widths=(), kernels=(), dilations=(), dropout=0.0))
    x = np.ones((8, 2, 1), np.float32)
    with pytest.raises(TrainingDivergedError):
        train_loop(net, (x, np.full_like(x, np.nan)), (x, x), TrainConfig(max_epochs=3, patience=1))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=10, patience=10)
    with pytest.raises(ValueError):
        TrainConfig(loss="hinge")


def test_checkpoint_roundtrip_and_tamper():
    net = TCN(Topology(3, 2, widths=(4,), kernels=(3,), dilations=(1,)))
    raw = pack({"kind": "x", "n": 1}, net.state())
    header, arrays = unpack(raw)
    assert header["kind"] == "x"
    for k, v in net.state().items():
        assert arrays[k].tobytes() == v.tobytes()
    assert pack(header, arrays) == raw
    lines = raw.split(b"\n", 2)
    with pytest.raises(CheckpointError):
        unpack(lines[0] + b"\n" + lines[1].replace(b'"n":1', b'"n":2') + b"\n" + lines[2])
    with pytest.raises(CheckpointError):
        unpack(raw[:-1] + bytes([raw[-1] ^ 1]))
    with pytest.raises(CheckpointError):
        unpack(raw + b"\0")
    with pytest.raises(CheckpointError):
        unpack(b"NOT-A-CHECKPOINT\n{}\n")
