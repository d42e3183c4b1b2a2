"""Keypoint parsing, subject tracking and resampling onto a 50 Hz pose grid.

Keypoint documents follow the body-25 layout: a top-level ``people`` list,
each person carrying a flat ``pose_keypoints_2d`` list of 25 (x, y, conf)
triplets. A per-video file may hold one such document per line (JSON lines)
or a JSON list of documents.
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

N_JOINTS = 25
JOINT_NAMES = (
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow",
    "LWrist", "MidHip", "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
    "REye", "LEye", "REar", "LEar", "LBigToe", "LSmallToe", "LHeel",
    "RBigToe", "RSmallToe", "RHeel",
)
JOINT = {name: i for i, name in enumerate(JOINT_NAMES)}
NECK = JOINT["Neck"]
MIDHIP = JOINT["MidHip"]
DEFAULT_MIN_CONF = 0.0002
POSE_RATE = 50.0

# joint_id -> (x, y, confidence)
Person = dict[int, tuple[float, float, float]]


class KeypointParseError(ValueError):
    def __init__(self, frame_index, message):
        super().__init__(f"frame {frame_index}: {message}")
        self.frame_index = frame_index


class MissingJointError(ValueError):
    pass


@dataclass
class RawKeypointFrame:
    frame_index: int
    people: list[Person] = field(default_factory=list)


@dataclass
class RawPoseTrack:
    person_id: int
    native_fps: float
    frame_indices: list[int] = field(default_factory=list)
    joints: list[Person] = field(default_factory=list)

    def __post_init__(self):
        if self.native_fps <= 0:
            raise ValueError("native_fps must be positive")


@dataclass
class PoseSequence:
    """Pixel joint coordinates on a uniform grid, shape (T, 25, 2)."""

    joints: np.ndarray
    rate: float = POSE_RATE

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=float)
        if self.joints.ndim != 3 or self.joints.shape[1:] != (N_JOINTS, 2):
            raise ValueError(f"expected (T, {N_JOINTS}, 2) joints, got {self.joints.shape}")
        if len(self.joints) < 1:
            raise ValueError("PoseSequence needs at least one sample")
        if not np.all(np.isfinite(self.joints)):
            raise ValueError("PoseSequence contains missing or non-finite values")

    def __len__(self):
        return len(self.joints)


def _parse_person(obj, frame_index):
    if not isinstance(obj, dict) or "pose_keypoints_2d" not in obj:
        raise KeypointParseError(frame_index, "person entry lacks 'pose_keypoints_2d'")
    flat = obj["pose_keypoints_2d"]
    if not isinstance(flat, list) or len(flat) != 3 * N_JOINTS:
        n = len(flat) if isinstance(flat, list) else type(flat).__name__
        raise KeypointParseError(frame_index, f"expected {3 * N_JOINTS} keypoint values, got {n}")
    person: Person = {}
    for j in range(N_JOINTS):
        try:
            x, y, c = (float(v) for v in flat[3 * j:3 * j + 3])
        except (TypeError, ValueError):
            raise KeypointParseError(frame_index, f"non-numeric keypoint for joint {j}") from None
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(c)) or c < 0:
            raise KeypointParseError(frame_index, f"invalid keypoint for joint {j}")
        # undetected joints are written as (0, 0, 0)
        if x == 0.0 and y == 0.0 and c == 0.0:
            continue
        person[j] = (x, y, c)
    return person


def _parse_document(doc, default_index):
    if not isinstance(doc, dict) or "people" not in doc:
        raise KeypointParseError(default_index, "document lacks a 'people' list")
    frame_index = doc.get("frame_index", default_index)
    if not isinstance(frame_index, int):
        raise KeypointParseError(default_index, "frame_index must be an integer")
    people = doc["people"]
    if not isinstance(people, list):
        raise KeypointParseError(frame_index, "'people' must be a list")
    return RawKeypointFrame(frame_index, [_parse_person(p, frame_index) for p in people])


def parse_keypoint_file(raw: bytes) -> list[RawKeypointFrame]:
    """Parse a single-frame document, a JSON list of documents, or JSON lines."""
    text = raw.decode("utf-8").strip()
    if not text:
        return []
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict):
        return [_parse_document(obj, 0)]
    if isinstance(obj, list):
        return [_parse_document(doc, i) for i, doc in enumerate(obj)]
    frames = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise KeypointParseError(len(frames), f"malformed JSON ({exc.msg})") from None
        frames.append(_parse_document(doc, len(frames)))
    return frames


_FRAME_NO = re.compile(r"(\d+)(?!.*\d)")


def load_keypoint_dir(path) -> list[RawKeypointFrame]:
    """Read a directory of per-frame documents; frame index comes from the filename."""
    frames = []
    for p in sorted(Path(path).glob("*.json")):
        m = _FRAME_NO.search(p.stem)
        if m is None:
            raise KeypointParseError(-1, f"cannot read frame number from {p.name}")
        parsed = parse_keypoint_file(p.read_bytes())
        for fr in parsed:
            fr.frame_index = int(m.group(1))
        frames.extend(parsed)
    frames.sort(key=lambda f: f.frame_index)
    return frames


def dump_keypoint_frames(frames: list[RawKeypointFrame]) -> bytes:
    """Serialize frames as JSON lines, one body-25 document per frame."""
    lines = []
    for fr in frames:
        people = []
        for person in fr.people:
            flat = []
            for j in range(N_JOINTS):
                flat.extend(person.get(j, (0.0, 0.0, 0.0)))
            people.append({"pose_keypoints_2d": flat})
        lines.append(json.dumps({"frame_index": fr.frame_index, "people": people}))
    return ("\n".join(lines) + "\n").encode()


def threshold_joints(frame: RawKeypointFrame, min_conf: float = DEFAULT_MIN_CONF) -> RawKeypointFrame:
    if min_conf < 0:
        raise ValueError("min_conf must be >= 0")
    people = [{j: v for j, v in p.items() if v[2] >= min_conf} for p in frame.people]
    return RawKeypointFrame(frame.frame_index, people)


def _anchor(person: Person):
    if MIDHIP in person:
        return np.array(person[MIDHIP][:2])
    rh, lh = JOINT["RHip"], JOINT["LHip"]
    if rh in person and lh in person:
        return (np.array(person[rh][:2]) + np.array(person[lh][:2])) / 2
    if NECK in person:
        return np.array(person[NECK][:2])
    return None


def track_subjects(frames: list[RawKeypointFrame], native_fps: float = POSE_RATE,
                   gating_radius: float | None = None,
                   image_size: tuple[float, float] | None = None) -> list[RawPoseTrack]:
    """Associate people across frames by nearest last-known MidHip.

    Assignment is greedy over all (track, person) pairs in order of distance,
    so the result does not depend on the order people are listed in a frame.
    The gating radius defaults to half the image diagonal; without an image
    size the extent of all keypoints stands in for it.
    """
    if gating_radius is None:
        if image_size is None:
            pts = [v[:2] for fr in frames for p in fr.people for v in p.values()]
            image_size = tuple(np.max(pts, axis=0)) if pts else (1.0, 1.0)
        gating_radius = 0.5 * math.hypot(*image_size)

    tracks: list[RawPoseTrack] = []
    last_anchor: list[np.ndarray] = []
    for fr in frames:
        cands = []
        for person in fr.people:
            a = _anchor(person)
            if a is None:
                log.info("frame %d: person without anchor joint skipped", fr.frame_index)
                continue
            cands.append((a, person))
        # content-based order makes the assignment independent of input order
        cands.sort(key=lambda c: (c[0][0], c[0][1], sorted(c[1].items())))
        pairs = []
        for ti, la in enumerate(last_anchor):
            for ci, (a, _) in enumerate(cands):
                d = float(np.hypot(*(a - la)))
                if d <= gating_radius:
                    pairs.append((d, ti, ci))
        pairs.sort()
        used_t, used_c = set(), set()
        for d, ti, ci in pairs:
            if ti in used_t or ci in used_c:
                continue
            used_t.add(ti)
            used_c.add(ci)
            tracks[ti].frame_indices.append(fr.frame_index)
            tracks[ti].joints.append(cands[ci][1])
            last_anchor[ti] = cands[ci][0]
        for ci, (a, person) in enumerate(cands):
            if ci in used_c:
                continue
            tracks.append(RawPoseTrack(len(tracks), native_fps, [fr.frame_index], [person]))
            last_anchor.append(a)
    return tracks


def fill_and_resample(track: RawPoseTrack, target_rate: float = POSE_RATE) -> PoseSequence:
    """Linearly interpolate every joint onto a uniform grid starting at the first frame.

    Grid sample k sits at k / target_rate seconds after the first frame and the
    last sample does not pass the last frame. Leading and trailing gaps take the
    nearest observed value.
    """
    if not track.frame_indices:
        raise ValueError("empty track")
    idx = np.asarray(track.frame_indices, dtype=float)
    if np.any(np.diff(idx) <= 0):
        raise ValueError("frame indices must be strictly increasing")
    times = (idx - idx[0]) / track.native_fps
    n = int(math.floor(times[-1] * target_rate + 1e-9)) + 1
    grid = np.arange(n) / target_rate
    out = np.empty((n, N_JOINTS, 2))
    for j in range(N_JOINTS):
        obs = [(t, p[j]) for t, p in zip(times, track.joints) if j in p]
        if not obs:
            raise MissingJointError(f"joint {j} ({JOINT_NAMES[j]}) never observed in track {track.person_id}")
        t_obs = np.array([o[0] for o in obs])
        xy = np.array([o[1][:2] for o in obs])
        out[:, j, 0] = np.interp(grid, t_obs, xy[:, 0])
        out[:, j, 1] = np.interp(grid, t_obs, xy[:, 1])
    return PoseSequence(out, target_rate)


def load_pose_sequences(raw: bytes | list[RawKeypointFrame], native_fps: float,
                        min_conf: float = DEFAULT_MIN_CONF, **track_kw) -> list[PoseSequence]:
    """Parse, threshold, track and resample; one sequence per tracked subject."""
    frames = parse_keypoint_file(raw) if isinstance(raw, (bytes, bytearray)) else raw
    frames = [threshold_joints(f, min_conf) for f in frames]
    tracks = track_subjects(frames, native_fps, **track_kw)
    return [fill_and_resample(t) for t in tracks]
