"""Activity classifier over 128-sample multi-placement windows with majority voting."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from . import imu_dsp
from .imu_dsp import ChannelSeries, ScalerParams
from .nn import TCN, History, Topology, TrainConfig, pack, train_loop, unpack
from .nn.autograd import log_softmax
from .nn.checkpoint import CheckpointError

log = logging.getLogger(__name__)

WINDOW = 128
HOP = 64
CHECKPOINT_KIND = "classifier"


class MissingClassError(ValueError):
    pass


def majority_label(labels) -> int:
    """Modal class; ties go to the lowest class index."""
    labels = np.asarray(labels, dtype=int).ravel()
    if labels.size == 0:
        raise ValueError("no labels to vote over")
    return int(np.argmax(np.bincount(labels)))


def window_count(n: int, width: int = WINDOW, hop: int = HOP) -> int:
    return 0 if n < width else (n - width) // hop + 1


def window_offsets(n: int, width: int = WINDOW, hop: int = HOP) -> np.ndarray:
    return np.arange(window_count(n, width, hop)) * hop


@dataclass
class LabeledWindows:
    """Stack of windows: x (n, 128, placements * channels), per-timestep labels y (n, 128)."""

    x: np.ndarray
    y: np.ndarray
    session: list[str] = field(default_factory=list)
    real: np.ndarray | None = None

    def __post_init__(self):
        if self.real is None:
            self.real = np.ones(len(self.x), bool)
        if not self.session:
            self.session = [""] * len(self.x)

    @property
    def majority(self) -> np.ndarray:
        return np.array([majority_label(r) for r in self.y], dtype=int)

    def __len__(self):
        return len(self.x)

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls(np.zeros((0, WINDOW, 0), np.float32), np.zeros((0, WINDOW), int), [], np.zeros(0, bool))
        return cls(np.concatenate([p.x for p in parts]), np.concatenate([p.y for p in parts]),
                   sum((p.session for p in parts), []), np.concatenate([p.real for p in parts]))

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return LabeledWindows(self.x[idx], self.y[idx], [self.session[i] for i in idx], self.real[idx])


def stack_channels(channels) -> np.ndarray:
    """(T, C) block from equal-length channel series, in the given order."""
    arrs = [c.values if isinstance(c, ChannelSeries) else np.asarray(c, dtype=float) for c in channels]
    if not arrs:
        raise ValueError("no channels")
    n = len(arrs[0])
    if any(len(a) != n for a in arrs):
        raise ValueError("channel series differ in length")
    return np.stack(arrs, axis=1)


def make_classification_windows(channels, labels=None, session: str = "", real: bool = True,
                                width: int = WINDOW, hop: int = HOP) -> LabeledWindows:
    block = stack_channels(channels)
    n = len(block)
    if labels is None:
        labels = np.zeros(n, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} samples")
    offs = window_offsets(n, width, hop)
    if not len(offs):
        log.warning("series of %d samples is shorter than the %d-sample window", n, width)
    x = np.stack([block[o:o + width] for o in offs]).astype(np.float32) if len(offs) else \
        np.zeros((0, width, block.shape[1]), np.float32)
    y = np.stack([labels[o:o + width] for o in offs]) if len(offs) else np.zeros((0, width), int)
    return LabeledWindows(x, y, [session] * len(offs), np.full(len(offs), real))


@dataclass
class Preprocessing:
    cutoff: float | None = None
    scaled: bool = False

    def label(self):
        return f"{'none' if not self.cutoff else f'{self.cutoff:g}hz'}_{'scaled' if self.scaled else 'raw'}"


def filter_channels(channels, pre: Preprocessing):
    if not pre.cutoff:
        return list(channels)
    return [imu_dsp.butterworth_lowpass(c, pre.cutoff) for c in channels]


@dataclass
class ClassifierConfig:
    n_classes: int = 10
    topology: Topology | None = None
    train: TrainConfig = field(default_factory=lambda: TrainConfig(loss="cross_entropy"))
    val_fraction: float = 0.1

    def topology_for(self, in_channels):
        if self.topology is None:
            return Topology(in_channels, self.n_classes)
        t = self.topology
        return Topology(in_channels, self.n_classes, t.widths, t.kernels, t.dilations, t.dropout, t.dropout_from)


@dataclass
class ClassifierModel:
    net: TCN
    layout: list[tuple[str, str]]
    class_names: list[str]
    scalers: list[ScalerParams] | None = None
    preprocessing: Preprocessing = field(default_factory=Preprocessing)
    history: History = field(default_factory=History)

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.scalers is None:
            return x.astype(np.float32)
        mean = np.array([s.mean for s in self.scalers])
        std = np.array([s.std for s in self.scalers])
        return ((x - mean) / std).astype(np.float32)


def stratified_split(labels, fraction: float, rng: np.random.Generator):
    """Per class, round(fraction * count) indices go to validation."""
    labels = np.asarray(labels)
    val = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        k = int(round(fraction * len(idx)))
        val.extend(rng.permutation(idx)[:k].tolist())
    return np.array(sorted(val), dtype=int)


def split_validation(windows: LabeledWindows, fraction: float, rng):
    """Stratified validation share of the real windows, or of the simulated ones if none are real."""
    pool = np.flatnonzero(windows.real) if windows.real.any() else np.arange(len(windows))
    val = pool[stratified_split(windows.majority[pool], fraction, rng)]
    train = np.setdiff1d(np.arange(len(windows)), val)
    return train, val


def train_classifier(windows: LabeledWindows, layout, class_names, config: ClassifierConfig,
                     preprocessing: Preprocessing | None = None) -> ClassifierModel:
    if not len(windows):
        raise ValueError("empty training set")
    present = set(np.unique(windows.y).tolist())
    missing = [class_names[c] for c in range(config.n_classes) if c not in present]
    if missing:
        raise MissingClassError(f"classes absent from training set: {missing}")
    preprocessing = preprocessing or Preprocessing()
    rng = np.random.default_rng(config.train.seed)
    tr, va = split_validation(windows, config.val_fraction, rng)
    if not len(va):
        # too few windows for a stratified share; fall back to one per class
        pool = np.flatnonzero(windows.real) if windows.real.any() else np.arange(len(windows))
        va = rng.choice(pool, size=1)
        tr = np.setdiff1d(np.arange(len(windows)), va)
        if not len(tr):
            raise ValueError("need at least 2 training windows")
    scalers = None
    if preprocessing.scaled:
        pool = windows.x[tr].reshape(-1, windows.x.shape[2])
        scalers = [imu_dsp.fit_scaler([pool[:, c]]) for c in range(pool.shape[1])]
    net = TCN(config.topology_for(windows.x.shape[2]), seed=config.train.seed)
    model = ClassifierModel(net, [tuple(l) for l in layout], list(class_names), scalers, preprocessing)
    xtr, xva = model.transform(windows.x[tr]), model.transform(windows.x[va])
    net, hist = train_loop(net, (xtr, windows.y[tr]), (xva, windows.y[va]), config.train)
    model.history = hist
    return model


def predict_windows(model: ClassifierModel, x: np.ndarray):
    """Per-timestep labels (n, 128) and majority-voted window labels (n,)."""
    if x.shape[2] != len(model.layout):
        raise ValueError(f"expected {len(model.layout)} stacked channels, got {x.shape[2]}")
    logits = model.net.predict(model.transform(x))
    steps = np.argmax(log_softmax(logits), axis=-1)
    return np.array([majority_label(s) for s in steps], dtype=int), steps


def predict(model: ClassifierModel, channels):
    """Window labels and per-timestep labels for an aligned channel set."""
    channels = list(channels)
    if len(channels) != len(model.layout):
        raise ValueError(f"model expects layout {model.layout}, got {len(channels)} channels")
    for c, (p, name) in zip(channels, model.layout):
        if isinstance(c, ChannelSeries) and (c.placement, c.name) != (p, name):
            raise ValueError(f"channel layout mismatch: got {(c.placement, c.name)}, expected {(p, name)}")
    channels = filter_channels(channels, model.preprocessing)
    win = make_classification_windows(channels)
    if not len(win):
        raise ValueError(f"need at least {WINDOW} samples")
    return predict_windows(model, win.x)


def save_classifier(model: ClassifierModel) -> bytes:
    header = {
        "kind": CHECKPOINT_KIND,
        "topology": model.net.topology.to_dict(),
        "layout": [list(l) for l in model.layout],
        "class_names": model.class_names,
        "scalers": None if model.scalers is None else [[s.mean, s.std] for s in model.scalers],
        "preprocessing": {"cutoff": model.preprocessing.cutoff, "scaled": model.preprocessing.scaled},
        "history": model.history.to_dict(),
    }
    return pack(header, model.net.state())


def load_classifier(raw: bytes) -> ClassifierModel:
    header, arrays = unpack(raw)
    if header.get("kind") != CHECKPOINT_KIND:
        raise CheckpointError(f"expected a {CHECKPOINT_KIND} checkpoint, got {header.get('kind')!r}")
    try:
        net = TCN(Topology.from_dict(header["topology"]))
        if list(arrays) != list(net.params):
            raise CheckpointError("parameter blocks do not match the recorded topology")
        net.load_state(arrays)
        sc = header["scalers"]
        return ClassifierModel(
            net, [tuple(l) for l in header["layout"]], header["class_names"],
            None if sc is None else [ScalerParams(m, s) for m, s in sc],
            Preprocessing(**header["preprocessing"]), History(**header["history"]))
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from exc


def parse_label_file(raw: bytes | str, class_index: dict[str, int], length: int | None = None) -> np.ndarray:
    """Interval CSV ``start_sample,end_sample,class_name`` (end exclusive) to per-sample ids.

    Samples not covered by any interval get -1.
    """
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["start_sample", "end_sample", "class_name"]:
        raise ValueError("label file header must be start_sample,end_sample,class_name")
    intervals = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"label row {i}: expected 3 fields")
        a, b, name = int(row[0]), int(row[1]), row[2].strip()
        if name not in class_index:
            raise ValueError(f"label row {i}: unknown class {name!r}")
        if b <= a:
            raise ValueError(f"label row {i}: empty interval")
        intervals.append((a, b, class_index[name]))
    n = length if length is not None else max((b for _, b, _ in intervals), default=0)
    out = np.full(n, -1, dtype=int)
    for a, b, c in intervals:
        out[a:min(b, n)] = c
    return out


def labels_to_csv(labels, class_names) -> str:
    labels = np.asarray(labels)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["start_sample", "end_sample", "class_name"])
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            if labels[start] >= 0:
                w.writerow([start, i, class_names[labels[start]]])
            start = i
    return buf.getvalue()
