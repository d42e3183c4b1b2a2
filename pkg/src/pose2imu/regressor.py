"""Per-placement, per-channel pose -> IMU regression models."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import imu_dsp
from .imu_dsp import ChannelSeries, ScalerParams
from .nn import TCN, History, Topology, TrainConfig, pack, train_loop, unpack
from .nn.checkpoint import CheckpointError
from .pose_features import (DEFAULT_JOINT_SETS, REGRESSION_WINDOW, NormalizedPoseSequence,
                            make_regression_windows)

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "regressor"


@dataclass
class RegressorSpec:
    placement: str
    channel: str = "acc_norm"
    joints: tuple[int, ...] | None = None
    topology: Topology | None = None
    scaler: str = "standard"  # none | standard
    filter_cutoff: float | None = None  # None | 8 | 12
    window: int = REGRESSION_WINDOW
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.joints is None:
            self.joints = DEFAULT_JOINT_SETS[self.placement]
        self.joints = tuple(int(j) for j in self.joints)
        n_in = 2 * (len(self.joints) + 2)
        if self.topology is None:
            self.topology = Topology(n_in, 1)
        if self.topology.in_channels != n_in or self.topology.out_channels != 1:
            raise ValueError(f"topology must map {n_in} input channels to 1 output")
        if self.scaler not in ("none", "standard"):
            raise ValueError(f"unknown scaler policy {self.scaler!r}")
        if self.filter_cutoff is not None and self.filter_cutoff not in (8, 12, 8.0, 12.0):
            log.warning("non-default filter cutoff %s Hz", self.filter_cutoff)

    def to_dict(self):
        return {
            "placement": self.placement, "channel": self.channel, "joints": list(self.joints),
            "topology": self.topology.to_dict(), "scaler": self.scaler,
            "filter_cutoff": self.filter_cutoff, "window": self.window,
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["topology"] = Topology.from_dict(d["topology"])
        d["train"] = TrainConfig(**d["train"])
        d["joints"] = tuple(d["joints"])
        return cls(**d)


@dataclass
class TrainedRegressor:
    spec: RegressorSpec
    net: TCN
    scaler: ScalerParams | None = None
    history: History = field(default_factory=History)


def flatten_windows(windows: np.ndarray) -> np.ndarray:
    """(N, W, n_j + 2, 2) -> (N, W, 2 (n_j + 2)) network input."""
    return windows.reshape(windows.shape[0], windows.shape[1], -1).astype(np.float32)


def _target_windows(values, width):
    return sliding_window_view(np.asarray(values, dtype=float), width)[..., None]


def prepare_target(spec: RegressorSpec, series: ChannelSeries) -> ChannelSeries:
    return imu_dsp.butterworth_lowpass(series, spec.filter_cutoff) if spec.filter_cutoff else series


def _pairs_to_arrays(spec, pairs, scaler):
    xs, ys = [], []
    for norm, target in pairs:
        win, _ = make_regression_windows(norm, joints=spec.joints, width=spec.window)
        if not len(win):
            continue
        v = prepare_target(spec, target).values
        if scaler is not None:
            v = imu_dsp.apply_scaler(v, scaler)
        xs.append(flatten_windows(win))
        ys.append(_target_windows(v, spec.window).astype(np.float32))
    if not xs:
        raise ValueError("no training windows: every sequence is shorter than the window")
    return np.concatenate(xs), np.concatenate(ys)


def train_regressor(spec: RegressorSpec, pairs, val_pairs=None, val_fraction: float = 0.1,
                    evaluate=None) -> TrainedRegressor:
    """Train on all step-1 windows of aligned (pose, sensor) pairs.

    Validation uses ``val_pairs`` when given, otherwise the last pair when
    there are several, otherwise the trailing ``val_fraction`` of the only pair.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no training data")
    for i, (norm, target) in enumerate(pairs + list(val_pairs or [])):
        if len(norm) != len(target):
            raise ValueError(f"pair {i}: pose length {len(norm)} != sensor length {len(target)}")
    if val_pairs is None:
        if len(pairs) >= 2:
            pairs, val_pairs = pairs[:-1], pairs[-1:]
        else:
            norm, target = pairs[0]
            cut = int(round(len(norm) * (1 - val_fraction)))
            if cut < spec.window or len(norm) - cut < spec.window:
                raise ValueError("single sequence too short to split for validation")
            pairs = [(_slice_norm(norm, 0, cut), target.with_values(target.values[:cut]))]
            val_pairs = [(_slice_norm(norm, cut, len(norm)), target.with_values(target.values[cut:]))]
    scaler = None
    if spec.scaler == "standard":
        scaler = imu_dsp.fit_scaler([prepare_target(spec, t) for _, t in pairs])
    xtr, ytr = _pairs_to_arrays(spec, pairs, scaler)
    xva, yva = _pairs_to_arrays(spec, val_pairs, scaler)
    net = TCN(spec.topology, seed=spec.train.seed)
    net, hist = train_loop(net, (xtr, ytr), (xva, yva), spec.train, evaluate)
    return TrainedRegressor(spec, net, scaler, hist)


def _slice_norm(norm, a, b):
    return NormalizedPoseSequence(norm.coords[a:b], norm.speed[a:b], norm.speed_deriv[a:b])


def stitch_windows(preds: np.ndarray, length: int) -> np.ndarray:
    """Average step-1 window predictions (N, W) into a length-``length`` series."""
    n, w = preds.shape
    if n != length - w + 1:
        raise ValueError("window count does not match length")
    total = np.zeros(length)
    count = np.zeros(length)
    for k in range(w):
        total[k:k + n] += preds[:, k]
        count[k:k + n] += 1
    return total / count


def coverage_counts(length: int, width: int = REGRESSION_WINDOW) -> np.ndarray:
    count = np.zeros(length, dtype=int)
    for s in range(length - width + 1):
        count[s:s + width] += 1
    return count


def simulate_channel(model: TrainedRegressor, norm: NormalizedPoseSequence, t0: float = 0.0) -> ChannelSeries:
    spec = model.spec
    if len(norm) < spec.window:
        raise ValueError(f"sequence of {len(norm)} samples is shorter than the {spec.window}-sample window")
    win, _ = make_regression_windows(norm, joints=spec.joints, width=spec.window)
    preds = model.net.predict(flatten_windows(win))[..., 0].astype(float)
    values = stitch_windows(preds, len(norm))
    if model.scaler is not None:
        values = imu_dsp.invert_scaler(values, model.scaler)
    return ChannelSeries(spec.placement, spec.channel, values, imu_dsp.RATE, t0)


def save_checkpoint(model: TrainedRegressor) -> bytes:
    header = {
        "kind": CHECKPOINT_KIND,
        "spec": model.spec.to_dict(),
        "scaler": None if model.scaler is None else {"mean": model.scaler.mean, "std": model.scaler.std},
        "history": model.history.to_dict(),
    }
    return pack(header, model.net.state())


def load_checkpoint(raw: bytes) -> TrainedRegressor:
    header, arrays = unpack(raw)
    if header.get("kind") != CHECKPOINT_KIND:
        raise CheckpointError(f"expected a {CHECKPOINT_KIND} checkpoint, got {header.get('kind')!r}")
    try:
        spec = RegressorSpec.from_dict(header["spec"])
        net = TCN(spec.topology)
        if list(arrays) != list(net.params):
            raise CheckpointError("parameter blocks do not match the recorded topology")
        net.load_state(arrays)
        sc = header["scaler"]
        scaler = None if sc is None else ScalerParams(sc["mean"], sc["std"])
        hist = History(**header["history"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint header: {exc}") from exc
    return TrainedRegressor(spec, net, scaler, hist)
