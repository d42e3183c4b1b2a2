import numpy as np
import pytest

from pose2imu import regressor
from pose2imu.imu_dsp import ChannelSeries
from pose2imu.nn import CheckpointError, Topology, TrainConfig
from pose2imu.pose_features import NormalizedPoseSequence, normalize_pose_sequence
from pose2imu.regressor import (RegressorSpec, coverage_counts, load_checkpoint, save_checkpoint,
                                simulate_channel, stitch_windows, train_regressor)
from pose2imu.synth import SceneConfig, generate_scene, make_sample

SMALL = dict(widths=(8, 8), kernels=(3, 3), dilations=(1, 2), dropout=0.1)


def small_spec(placement="left_wrist", **train):
    cfg = dict(max_epochs=4, patience=2, batch_size=64, seed=0) | train
    return RegressorSpec(placement, topology=Topology(14, 1, **SMALL), train=TrainConfig(**cfg))


def oracle_pairs(n, seed=0, duration=4.0, placement="left_wrist"):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        s = make_sample(generate_scene(SceneConfig(duration=duration), rng), placements=[placement])
        out.append((normalize_pose_sequence(s.poses), s.imu[placement]["acc_norm"]))
    return out


def test_stitch_single_window():
    p = np.arange(16.0)[None]
    np.testing.assert_array_equal(stitch_windows(p, 16), p[0])


def test_stitch_overlap_counts():
    np.testing.assert_array_equal(coverage_counts(17), [1] + [2] * 15 + [1])
    preds = np.stack([np.zeros(16), np.ones(16)])
    out = stitch_windows(preds, 17)
    assert out[0] == 0 and out[16] == 1
    np.testing.assert_allclose(out[1:16], 0.5)


def test_stitch_constant_roundtrip():
    n = 50
    windows = np.lib.stride_tricks.sliding_window_view(np.arange(n, dtype=float), 16)
    np.testing.assert_allclose(stitch_windows(windows, n), np.arange(n))


def test_spec_rejects_wrong_topology():
    with pytest.raises(ValueError):
        RegressorSpec("left_wrist", topology=Topology(10, 1))
    with pytest.raises(ValueError):
        RegressorSpec("left_wrist", scaler="minmax")


def test_spec_dict_roundtrip():
    spec = small_spec("right_calf")
    assert RegressorSpec.from_dict(spec.to_dict()) == spec


def test_constant_target_learned():
    n = 200
    coords = np.tile(np.random.default_rng(0).uniform(-1, 1, (1, 25, 2)), (n, 1, 1))
    norm = NormalizedPoseSequence(coords, np.zeros(n), np.zeros(n))
    target = ChannelSeries("left_wrist", "acc_norm", np.full(n, 1.5))
    spec = RegressorSpec("left_wrist", topology=Topology(14, 1, **SMALL), scaler="none",
                         train=TrainConfig(max_epochs=300, patience=30, batch_size=64, lr=0.01))
    model = train_regressor(spec, [(norm, target)] * 2)
    out = simulate_channel(model, norm).values
    assert np.max(np.abs(out - 1.5)) < 1e-2


def test_length_mismatch_rejected():
    norm, target = oracle_pairs(1)[0]
    with pytest.raises(ValueError):
        train_regressor(small_spec(), [(norm, target.with_values(target.values[:-1]))])


def test_single_pair_split_fallback():
    model = train_regressor(small_spec(max_epochs=2, patience=1), oracle_pairs(1, duration=6.0))
    assert len(model.history.val_loss) == 2


def test_training_deterministic_checkpoints():
    pairs = oracle_pairs(3)
    a = save_checkpoint(train_regressor(small_spec(), pairs))
    b = save_checkpoint(train_regressor(small_spec(), pairs))
    assert a == b


def test_checkpoint_roundtrip_simulates_identically():
    pairs = oracle_pairs(3)
    model = train_regressor(small_spec(), pairs)
    raw = save_checkpoint(model)
    back = load_checkpoint(raw)
    assert back.spec == model.spec and back.scaler == model.scaler
    norm = pairs[0][0]
    a = simulate_channel(model, norm).values
    b = simulate_channel(back, norm).values
    assert a.tobytes() == b.tobytes()
    assert len(a) == len(norm)
    tampered = raw.replace(b'"left_wrist"', b'"right_wrist"', 1)
    with pytest.raises(CheckpointError):
        load_checkpoint(tampered)


def test_short_sequence_rejected():
    model = train_regressor(small_spec(max_epochs=2, patience=1), oracle_pairs(2))
    norm = oracle_pairs(1)[0][0]
    short = NormalizedPoseSequence(norm.coords[:10], norm.speed[:10], norm.speed_deriv[:10])
    with pytest.raises(ValueError):
        simulate_channel(model, short)


def test_filtered_target_policy():
    spec = small_spec()
    spec.filter_cutoff = 8
    target = oracle_pairs(1)[0][1]
    out = regressor.prepare_target(spec, target)
    assert len(out) == len(target) and not np.array_equal(out.values, target.values)
