"""Body-centred, scale-free pose representation and regression windows."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .pose_ingest import JOINT, MIDHIP, N_JOINTS, NECK, PoseSequence

log = logging.getLogger(__name__)

SCALE_HALF_WINDOW = 75  # +-1.5 s at 50 Hz
REGRESSION_WINDOW = 16

PLACEMENTS = ("left_wrist", "right_wrist", "left_calf", "right_calf")

DEFAULT_JOINT_SETS: dict[str, tuple[int, ...]] = {
    "left_wrist": (NECK, JOINT["LShoulder"], JOINT["LElbow"], JOINT["LWrist"], MIDHIP),
    "right_wrist": (NECK, JOINT["RShoulder"], JOINT["RElbow"], JOINT["RWrist"], MIDHIP),
    "left_calf": (MIDHIP, JOINT["LHip"], JOINT["LKnee"], JOINT["LAnkle"], NECK),
    "right_calf": (MIDHIP, JOINT["RHip"], JOINT["RKnee"], JOINT["RAnkle"], NECK),
}


class DegeneratePoseError(ValueError):
    pass


@dataclass
class ScaleSeries:
    scale: np.ndarray
    speed: np.ndarray
    speed_deriv: np.ndarray

    def __len__(self):
        return len(self.scale)


@dataclass
class NormalizedPoseSequence:
    coords: np.ndarray  # (T, 25, 2)
    speed: np.ndarray
    speed_deriv: np.ndarray

    def __len__(self):
        return len(self.coords)


def _forward_diff(v):
    if len(v) == 1:
        return np.zeros(1)
    d = np.empty_like(v)
    d[:-1] = v[1:] - v[:-1]
    d[-1] = d[-2]
    return d


def compute_scale_series(seq: PoseSequence, half_window: int = SCALE_HALF_WINDOW) -> ScaleSeries:
    """Running median of the Neck-MidHip pixel distance, plus its relative speed.

    The median window is truncated at the sequence edges. Speed is
    (scale[t+1] - scale[t]) / scale[t]; its derivative is a forward
    difference. The final sample of each copies its predecessor.
    """
    dist = np.hypot(*(seq.joints[:, NECK] - seq.joints[:, MIDHIP]).T)
    n = len(dist)
    scale = np.empty(n)
    for t in range(n):
        w = dist[max(0, t - half_window):t + half_window + 1]
        if not np.any(w > 0):
            raise DegeneratePoseError(f"Neck and MidHip coincide over the whole window at sample {t}")
        scale[t] = np.median(w)
    if np.any(scale <= 0):
        t = int(np.argmax(scale <= 0))
        raise DegeneratePoseError(f"non-positive scale at sample {t}")
    if n == 1:
        speed = np.zeros(1)
    else:
        speed = np.empty(n)
        speed[:-1] = (scale[1:] - scale[:-1]) / scale[:-1]
        speed[-1] = speed[-2]
    return ScaleSeries(scale, speed, _forward_diff(speed))


def normalize_joints(seq: PoseSequence, scales: ScaleSeries) -> NormalizedPoseSequence:
    if len(seq) != len(scales):
        raise ValueError(f"length mismatch: {len(seq)} poses vs {len(scales)} scales")
    if not (np.all(np.isfinite(seq.joints)) and np.all(np.isfinite(scales.scale))):
        raise ValueError("non-finite input")
    if np.any(scales.scale <= 0):
        raise DegeneratePoseError("scale must be positive")
    rel = seq.joints - seq.joints[:, MIDHIP:MIDHIP + 1]
    coords = -1.0 + rel / scales.scale[:, None, None] * 2.0
    coords[:, MIDHIP] = -1.0
    return NormalizedPoseSequence(coords, scales.speed.copy(), scales.speed_deriv.copy())


def normalize_pose_sequence(seq: PoseSequence) -> NormalizedPoseSequence:
    return normalize_joints(seq, compute_scale_series(seq))


def window_features(norm: NormalizedPoseSequence, joints) -> np.ndarray:
    """Per-sample feature block (T, n_j + 2, 2); scale features enter as (value, 0)."""
    joints = list(joints)
    t = len(norm)
    feats = np.zeros((t, len(joints) + 2, 2))
    feats[:, :len(joints)] = norm.coords[:, joints]
    feats[:, len(joints), 0] = norm.speed
    feats[:, len(joints) + 1, 0] = norm.speed_deriv
    return feats


def make_regression_windows(norm: NormalizedPoseSequence, placement: str | None = None,
                            joints=None, width: int = REGRESSION_WINDOW):
    """All step-1 windows for one placement.

    Returns ``(windows, centers)`` with windows shaped (N - width + 1, width,
    n_j + 2, 2) and the centre sample index of each window.
    """
    if joints is None:
        if placement not in DEFAULT_JOINT_SETS:
            raise ValueError(f"unknown placement {placement!r}")
        joints = DEFAULT_JOINT_SETS[placement]
    joints = list(joints)
    if len(norm) < width:
        log.warning("sequence of %d samples is shorter than the %d-sample window", len(norm), width)
        return np.zeros((0, width, len(joints) + 2, 2)), np.zeros(0, dtype=int)
    feats = window_features(norm, joints)
    windows = sliding_window_view(feats, width, axis=0)  # (N-w+1, n_j+2, 2, w)
    windows = np.ascontiguousarray(np.moveaxis(windows, -1, 1))
    centers = np.arange(len(windows)) + width // 2
    return windows, centers


def window_count(length: int, width: int = REGRESSION_WINDOW) -> int:
    return max(0, length - width + 1)


def normalized_to_csv(norm: NormalizedPoseSequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_index", "joint_id", "nx", "ny", "speed", "speed_deriv"])
    for t in range(len(norm)):
        for j in range(N_JOINTS):
            nx, ny = norm.coords[t, j]
            w.writerow([t, j, repr(float(nx)), repr(float(ny)),
                        repr(float(norm.speed[t])), repr(float(norm.speed_deriv[t]))])
    return buf.getvalue()


def normalized_from_csv(text: str) -> NormalizedPoseSequence:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty normalized pose file")
    n = max(int(r["sample_index"]) for r in rows) + 1
    coords = np.full((n, N_JOINTS, 2), np.nan)
    speed = np.full(n, np.nan)
    deriv = np.full(n, np.nan)
    for r in rows:
        t, j = int(r["sample_index"]), int(r["joint_id"])
        coords[t, j] = float(r["nx"]), float(r["ny"])
        speed[t] = float(r["speed"])
        deriv[t] = float(r["speed_deriv"])
    if np.isnan(coords).any() or np.isnan(speed).any():
        raise ValueError("normalized pose file has missing samples")
    return NormalizedPoseSequence(coords, speed, deriv)
