import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pose2imu import har
from pose2imu.har import (ClassifierConfig, LabeledWindows, MissingClassError, Preprocessing,
                          load_classifier, majority_label, make_classification_windows, predict,
                          predict_windows, save_classifier, stratified_split, train_classifier,
                          window_count, window_offsets)
from pose2imu.imu_dsp import ChannelSeries
from pose2imu.nn import Topology, TrainConfig

CLASSES = ["a", "b", "c"]
LAYOUT = [("left_wrist", "acc_norm"), ("right_calf", "acc_norm")]


def small_config(n_classes=3, **train):
    t = dict(max_epochs=3, patience=2, batch_size=16, loss="cross_entropy") | train
    return ClassifierConfig(n_classes, Topology(1, n_classes, widths=(8, 8), kernels=(3, 3), dilations=(1, 2)),
                            TrainConfig(**t))


def toy_windows(n_per_class=10, seed=0):
    rng = np.random.default_rng(seed)
    parts = []
    for c in range(3):
        t = np.arange(128 * n_per_class) / 50
        chans = [np.sin(2 * np.pi * (0.5 + c) * t) + 0.1 * rng.standard_normal(len(t)) for _ in LAYOUT]
        parts.append(make_classification_windows(chans, np.full(len(t), c), f"s{c}", hop=128))
    return LabeledWindows.concat(parts)


def test_window_offsets_256():
    assert window_count(256) == 3
    np.testing.assert_array_equal(window_offsets(256), [0, 64, 128])


@given(st.integers(0, 5000))
@settings(max_examples=200, deadline=None)
def test_window_count_law(n):
    expected = (n - 128) // 64 + 1 if n >= 128 else 0
    assert window_count(n) == expected
    offs = window_offsets(n)
    assert len(offs) == expected
    assert all(o + 128 <= n for o in offs)


@pytest.mark.parametrize("labels,expected", [
    ([3] * 70 + [5] * 58, 3),
    ([7] * 64 + [2] * 64, 2),
    ([4] * 128, 4),
    ([1] * 127 + [0], 1),
    ([2] * 40 + [1] * 40 + [6] * 40 + [0] * 8, 1),
])
def test_majority_label(labels, expected):
    assert majority_label(labels) == expected


@given(st.lists(st.integers(0, 9), min_size=1, max_size=128))
def test_majority_is_lowest_modal_class(labels):
    counts = np.bincount(labels)
    assert majority_label(labels) == int(np.flatnonzero(counts == counts.max())[0])


def test_window_contents_and_labels():
    x = np.arange(300.0)
    w = make_classification_windows([x, -x], np.arange(300) // 100)
    assert w.x.shape == (3, 128, 2)
    np.testing.assert_array_equal(w.x[1, :, 0], x[64:192])
    np.testing.assert_array_equal(w.majority, [0, 1, 1])


def test_stratified_share():
    labels = np.repeat([0, 1, 2], [50, 31, 7])
    val = stratified_split(labels, 0.1, np.random.default_rng(0))
    for c, n in zip(range(3), (50, 31, 7)):
        assert abs(np.sum(labels[val] == c) - 0.1 * n) <= 1


def test_validation_drawn_from_real_windows():
    w = toy_windows(20)
    w.real[:] = False
    w.real[::2] = True
    tr, va = har.split_validation(w, 0.1, np.random.default_rng(0))
    assert np.all(w.real[va]) and len(np.intersect1d(tr, va)) == 0
    assert len(tr) + len(va) == len(w)


def test_missing_class_rejected():
    w = toy_windows()
    keep = np.flatnonzero(w.majority != 2)
    with pytest.raises(MissingClassError):
        train_classifier(w.subset(keep), LAYOUT, CLASSES, small_config())


def test_constant_logits_label_everything():
    w = toy_windows(2)
    model = train_classifier(w, LAYOUT, CLASSES, small_config(max_epochs=2, patience=1))
    for name, p in model.net.params.items():
        p.data[:] = 0
    model.net.params["head.b"].data[:] = [0, 0, 5]
    labels, steps = predict_windows(model, w.x)
    assert np.all(labels == 2) and np.all(steps == 2)
    assert steps.shape == (len(w), 128)


def test_training_and_prediction_deterministic():
    w = toy_windows()
    a = train_classifier(w, LAYOUT, CLASSES, small_config(), Preprocessing(scaled=True))
    b = train_classifier(w, LAYOUT, CLASSES, small_config(), Preprocessing(scaled=True))
    assert save_classifier(a) == save_classifier(b)
    assert predict_windows(a, w.x)[1].tobytes() == predict_windows(a, w.x)[1].tobytes()


def test_checkpoint_roundtrip():
    w = toy_windows()
    model = train_classifier(w, LAYOUT, CLASSES, small_config(), Preprocessing(cutoff=12, scaled=True))
    back = load_classifier(save_classifier(model))
    assert back.layout == model.layout and back.class_names == CLASSES
    assert back.preprocessing == model.preprocessing and back.scalers == model.scalers
    assert predict_windows(back, w.x)[1].tobytes() == predict_windows(model, w.x)[1].tobytes()


def test_predict_checks_layout_and_length():
    w = toy_windows()
    model = train_classifier(w, LAYOUT, CLASSES, small_config())
    good = [ChannelSeries(p, c, np.zeros(300)) for p, c in LAYOUT]
    labels, steps = predict(model, good)
    assert len(labels) == window_count(300) and steps.shape == (len(labels), 128)
    with pytest.raises(ValueError):
        predict(model, good[::-1])
    with pytest.raises(ValueError):
        predict(model, good[:1])
    with pytest.raises(ValueError):
        predict(model, [ChannelSeries(p, c, np.zeros(100)) for p, c in LAYOUT])


def test_label_file_parsing():
    idx = {c: i for i, c in enumerate(CLASSES)}
    text = "start_sample,end_sample,class_name\n0,10,a\n10,15,c\n20,25,b\n"
    labels = har.parse_label_file(text, idx, 30)
    np.testing.assert_array_equal(labels[:10], 0)
    np.testing.assert_array_equal(labels[10:15], 2)
    np.testing.assert_array_equal(labels[15:20], -1)
    np.testing.assert_array_equal(labels[25:], -1)
    assert har.labels_to_csv(labels, CLASSES) == text
    with pytest.raises(ValueError):
        har.parse_label_file("start_sample,end_sample,class_name\n0,5,zzz\n", idx)
    with pytest.raises(ValueError):
        har.parse_label_file("from,to,name\n", idx)
