"""IMU ingestion and signal conditioning: resampling, norms, low-pass, scaling, sync."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

RATE = 50.0
RAW_CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz", "lax", "lay", "laz")
DERIVED_CHANNELS = {
    "acc_norm": ("ax", "ay", "az"),
    "gyr_norm": ("gx", "gy", "gz"),
    "lin_norm": ("lax", "lay", "laz"),
}
KNOWN_CHANNELS = RAW_CHANNELS + tuple(DERIVED_CHANNELS)


class ImuFormatError(ValueError):
    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class SyncError(ValueError):
    pass


@dataclass
class ImuRecording:
    placement: str
    timestamps: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    native_rate: float | None = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        n = len(self.timestamps)
        for name, v in self.channels.items():
            if len(v) != n:
                raise ValueError(f"channel {name} has {len(v)} samples, timestamps have {n}")
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.native_rate is None and n > 1:
            self.native_rate = float((n - 1) / (self.timestamps[-1] - self.timestamps[0]))

    def __len__(self):
        return len(self.timestamps)


@dataclass
class ChannelSeries:
    placement: str
    name: str
    values: np.ndarray
    rate: float = RATE
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)

    @property
    def times(self):
        return self.t0 + np.arange(len(self.values)) / self.rate

    def with_values(self, values, name=None):
        return replace(self, values=np.asarray(values, dtype=float), name=name or self.name)


@dataclass(frozen=True)
class ScalerParams:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("std must be positive")


def parse_imu_csv(raw: bytes, placement: str = "") -> ImuRecording:
    """Read ``t,<channels...>``; any subset of the known channel columns is accepted."""
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ImuFormatError(0, "empty file") from None
    if not header or header[0] != "t":
        raise ImuFormatError(1, "first column must be 't'")
    cols = header[1:]
    unknown = [c for c in cols if c not in KNOWN_CHANNELS]
    if unknown:
        raise ImuFormatError(1, f"unknown columns {unknown}")
    if len(set(cols)) != len(cols):
        raise ImuFormatError(1, "duplicate columns")
    ts, data = [], []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ImuFormatError(rowno, f"expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise ImuFormatError(rowno, "non-numeric field") from None
        if not all(math.isfinite(v) for v in vals):
            raise ImuFormatError(rowno, "non-finite value")
        if ts and vals[0] <= ts[-1]:
            raise ImuFormatError(rowno, f"timestamp {vals[0]} does not increase")
        ts.append(vals[0])
        data.append(vals[1:])
    arr = np.array(data, dtype=float).reshape(len(ts), len(cols))
    channels = {c: arr[:, i].copy() for i, c in enumerate(cols)}
    return ImuRecording(placement, np.array(ts), channels)


def recording_to_csv(rec: ImuRecording) -> str:
    names = [c for c in KNOWN_CHANNELS if c in rec.channels]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + names)
    for i, t in enumerate(rec.timestamps):
        w.writerow([repr(float(t))] + [repr(float(rec.channels[c][i])) for c in names])
    return buf.getvalue()


def series_to_recording(series: list[ChannelSeries]) -> ImuRecording:
    """Pack equal-length 50 Hz channel series of one placement into a recording."""
    first = series[0]
    for s in series[1:]:
        if len(s) != len(first) or s.t0 != first.t0 or s.rate != first.rate:
            raise ValueError("series must share grid")
    return ImuRecording(first.placement, first.times, {s.name: s.values for s in series},
                        first.rate)


def resample_linear(rec: ImuRecording, target: float = RATE) -> ImuRecording:
    """Uniform grid from the first timestamp; the last grid point stays inside the data."""
    if len(rec) < 2:
        raise ValueError("need at least two samples to resample")
    t = rec.timestamps
    n = int(math.floor((t[-1] - t[0]) * target + 1e-9)) + 1
    grid = t[0] + np.arange(n) / target
    chans = {k: np.interp(grid, t, v) for k, v in rec.channels.items()}
    return ImuRecording(rec.placement, grid, chans, target)


def channel_norm(x, y, z, name: str | None = None) -> ChannelSeries | np.ndarray:
    """Per-sample Euclidean norm; accepts ChannelSeries or plain arrays."""
    if isinstance(x, ChannelSeries):
        if not (len(x) == len(y) == len(z)):
            raise ValueError("channels differ in length")
        v = np.sqrt(x.values ** 2 + y.values ** 2 + z.values ** 2)
        return x.with_values(v, name or "norm")
    x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
    if not (x.shape == y.shape == z.shape):
        raise ValueError("channels differ in length")
    return np.sqrt(x ** 2 + y ** 2 + z ** 2)


def get_channel(rec: ImuRecording, name: str) -> ChannelSeries:
    """Fetch a raw channel or derive a norm channel from its axes."""
    rate = rec.native_rate or RATE
    t0 = float(rec.timestamps[0]) if len(rec) else 0.0
    if name in rec.channels:
        return ChannelSeries(rec.placement, name, rec.channels[name], rate, t0)
    if name in DERIVED_CHANNELS:
        axes = DERIVED_CHANNELS[name]
        missing = [a for a in axes if a not in rec.channels]
        if missing:
            raise ValueError(f"{rec.placement}: cannot derive {name}, missing {missing}")
        v = channel_norm(*(rec.channels[a] for a in axes))
        return ChannelSeries(rec.placement, name, v, rate, t0)
    raise ValueError(f"{rec.placement}: no channel {name!r}")


def butterworth_sos(cutoff: float, rate: float = RATE, order: int = 6) -> np.ndarray:
    if not 0 < cutoff < rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {rate / 2}) Hz")
    return signal.butter(order, cutoff, btype="low", fs=rate, output="sos")


def butterworth_lowpass(s: ChannelSeries | np.ndarray, cutoff: float, order: int = 6,
                        rate: float | None = None):
    """Single-pass causal Butterworth low-pass.

    Filter state starts at the steady state for the first sample, so a
    constant input passes through unchanged from the first sample on.
    """
    values = s.values if isinstance(s, ChannelSeries) else np.asarray(s, dtype=float)
    if rate is None:
        rate = s.rate if isinstance(s, ChannelSeries) else RATE
    sos = butterworth_sos(cutoff, rate, order)
    if len(values) == 0:
        out = values.copy()
    else:
        zi = signal.sosfilt_zi(sos) * values[0]
        out, _ = signal.sosfilt(sos, values, zi=zi)
    return s.with_values(out) if isinstance(s, ChannelSeries) else out


def _values(s):
    return s.values if isinstance(s, ChannelSeries) else np.asarray(s, dtype=float)


def fit_scaler(train) -> ScalerParams:
    """Mean and (population) std of the pooled training samples."""
    pool = np.concatenate([np.ravel(_values(s)) for s in train]) if train else np.zeros(0)
    if pool.size < 2:
        raise ValueError("need at least two samples to fit a scaler")
    std = float(np.std(pool))
    if not std > 0:
        raise ValueError("zero variance in scaler training pool")
    return ScalerParams(float(np.mean(pool)), std)


def apply_scaler(s, params: ScalerParams):
    out = (_values(s) - params.mean) / params.std
    return s.with_values(out) if isinstance(s, ChannelSeries) else out


def invert_scaler(s, params: ScalerParams):
    out = _values(s) * params.std + params.mean
    return s.with_values(out) if isinstance(s, ChannelSeries) else out


def _mad(v):
    return float(np.median(np.abs(v - np.median(v))))


def find_sync_peaks(acc_norm: ChannelSeries, k: int, prominence: float | None = None):
    """Times (s) of the k most prominent peaks, in temporal order, sub-sample refined."""
    v = acc_norm.values
    if prominence is None:
        prominence = 3.0 * _mad(v)
    idx, props = signal.find_peaks(v, prominence=prominence if prominence > 0 else None)
    if len(idx) < k:
        times = [float(acc_norm.t0 + i / acc_norm.rate) for i in idx]
        raise SyncError(f"found {len(idx)} peaks, need {k}; peak times {times}")
    prom = props["prominences"] if "prominences" in props else signal.peak_prominences(v, idx)[0]
    order = np.lexsort((idx, -prom))[:k]
    top = np.sort(idx[order])
    times = []
    for i in top:
        frac = 0.0
        if 0 < i < len(v) - 1:
            a, b, c = v[i - 1], v[i], v[i + 1]
            den = a - 2 * b + c
            if den != 0:
                frac = 0.5 * (a - c) / den
        times.append(acc_norm.t0 + (i + frac) / acc_norm.rate)
    return np.array(times)


def detect_sync_offset(acc_norm: ChannelSeries, video_anchor_frames, fps: float = RATE,
                       prominence: float | None = None) -> float:
    """Least-squares constant offset taking sensor time to video time.

    ``video_time = sensor_time + offset``; use :func:`align_recording` with the
    returned value to move a recording onto the video clock.
    """
    anchors = np.sort(np.asarray(video_anchor_frames, dtype=float)) / fps
    if len(anchors) < 3:
        raise SyncError("need at least 3 anchor frames")
    peaks = find_sync_peaks(acc_norm, len(anchors), prominence)
    return float(np.mean(anchors - peaks))


def align_recording(rec: ImuRecording, offset: float) -> ImuRecording:
    return replace(rec, timestamps=rec.timestamps + offset,
                   channels={k: v.copy() for k, v in rec.channels.items()})


def preprocess(s: ChannelSeries, cutoff: float | None = None, scaler: ScalerParams | None = None):
    if cutoff:
        s = butterworth_lowpass(s, cutoff)
    if scaler is not None:
        s = apply_scaler(s, scaler)
    return s
