"""Planar kinematic body model producing paired pixel poses and exact IMU signals.

Every joint is the MidHip position plus a chain of rigid segments whose
absolute angles are sums of sinusoids, so positions, velocities and
accelerations all have closed forms. World frame: x to the image right,
y up, metres. Angle 0 points a segment straight down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imu_dsp import ChannelSeries
from .pose_ingest import JOINT, N_JOINTS, POSE_RATE, PoseSequence, RawKeypointFrame, RawPoseTrack, fill_and_resample

G = 9.81
CLASS_NAMES = ("arm_raise", "arm_pump", "squat", "jumping_jack")
TRAJECTORIES = ("hip_x", "hip_y", "trunk", "r_upper", "r_fore", "l_upper", "l_fore",
                "r_thigh", "r_shank", "l_thigh", "l_shank")
IMU_CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz", "lax", "lay", "laz",
                "acc_norm", "gyr_norm", "lin_norm")


@dataclass
class Trajectory:
    """base + rate * t + sum(amp * sin(2 pi freq t + phase))."""

    base: float = 0.0
    rate: float = 0.0
    components: list[tuple[float, float, float]] = field(default_factory=list)

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        v = self.base + self.rate * t
        d1 = np.full_like(t, self.rate)
        d2 = np.zeros_like(t)
        for amp, freq, phase in self.components:
            w = 2 * math.pi * freq
            arg = w * t + phase
            s, c = np.sin(arg), np.cos(arg)
            v = v + amp * s
            d1 = d1 + amp * w * c
            d2 = d2 - amp * w * w * s
        return v, d1, d2


@dataclass
class Body:
    trunk: float = 0.50
    head: float = 0.22
    shoulder_half: float = 0.18
    upper_arm: float = 0.30
    forearm: float = 0.27
    hip_half: float = 0.10
    thigh: float = 0.45
    shank: float = 0.43

    def scaled(self, f):
        return Body(**{k: v * f for k, v in self.__dict__.items()})


@dataclass
class Camera:
    pixels_per_meter: float = 200.0
    offset: tuple[float, float] = (640.0, 560.0)
    zoom_rate: float = 0.0

    def __post_init__(self):
        if self.pixels_per_meter <= 0:
            raise ValueError("pixels_per_meter must be positive")


@dataclass
class KinematicScene:
    trajectories: dict[str, Trajectory]
    body: Body = field(default_factory=Body)
    camera: Camera = field(default_factory=Camera)
    duration: float = 20.0
    class_id: int = -1
    g: float = G

    def __post_init__(self):
        for name in TRAJECTORIES:
            self.trajectories.setdefault(name, Trajectory())
        for tr in self.trajectories.values():
            for _, f, _ in tr.components:
                if not 0 <= f < 8:
                    raise ValueError("component frequencies must be below 8 Hz")

    @property
    def n_samples(self):
        return int(round(self.duration * POSE_RATE))

    def times(self, rate=POSE_RATE):
        n = int(round(self.duration * rate))
        return np.arange(n) / rate


# A segment: (length attribute or metres, [(sign, trajectory), ...], constant angle offset)
_R, _L = -math.pi / 2, math.pi / 2
_UP = math.pi
_TRUNK = [(1, "trunk")]


def _chains(b: Body):
    neck = [(b.trunk, _TRUNK, _UP)]
    nose = neck + [(b.head, _TRUNK, _UP)]
    r_sh = neck + [(b.shoulder_half, _TRUNK, _R)]
    l_sh = neck + [(b.shoulder_half, _TRUNK, _L)]
    r_up = [(1, "trunk"), (-1, "r_upper")]
    l_up = [(1, "trunk"), (1, "l_upper")]
    r_el = r_sh + [(b.upper_arm, r_up, 0.0)]
    l_el = l_sh + [(b.upper_arm, l_up, 0.0)]
    r_wr = r_el + [(b.forearm, r_up + [(-1, "r_fore")], 0.0)]
    l_wr = l_el + [(b.forearm, l_up + [(1, "l_fore")], 0.0)]
    r_hip = [(b.hip_half, _TRUNK, _R)]
    l_hip = [(b.hip_half, _TRUNK, _L)]
    r_th = [(-1, "r_thigh")]
    l_th = [(1, "l_thigh")]
    r_kn = r_hip + [(b.thigh, r_th, 0.0)]
    l_kn = l_hip + [(b.thigh, l_th, 0.0)]
    r_sh_ang = r_th + [(1, "r_shank")]
    l_sh_ang = l_th + [(-1, "l_shank")]
    r_an = r_kn + [(b.shank, r_sh_ang, 0.0)]
    l_an = l_kn + [(b.shank, l_sh_ang, 0.0)]
    j = {
        "Nose": nose, "Neck": neck, "RShoulder": r_sh, "RElbow": r_el, "RWrist": r_wr,
        "LShoulder": l_sh, "LElbow": l_el, "LWrist": l_wr, "MidHip": [],
        "RHip": r_hip, "RKnee": r_kn, "RAnkle": r_an, "LHip": l_hip, "LKnee": l_kn, "LAnkle": l_an,
        "REye": nose + [(0.03, _TRUNK, _R), (0.03, _TRUNK, _UP)],
        "LEye": nose + [(0.03, _TRUNK, _L), (0.03, _TRUNK, _UP)],
        "REar": nose + [(0.07, _TRUNK, _R)],
        "LEar": nose + [(0.07, _TRUNK, _L)],
        "LBigToe": l_an + [(0.06, l_sh_ang, 0.0), (0.03, l_sh_ang, _R)],
        "LSmallToe": l_an + [(0.06, l_sh_ang, 0.0), (0.06, l_sh_ang, _L)],
        "LHeel": l_an + [(0.04, l_sh_ang, 0.0)],
        "RBigToe": r_an + [(0.06, r_sh_ang, 0.0), (0.03, r_sh_ang, _L)],
        "RSmallToe": r_an + [(0.06, r_sh_ang, 0.0), (0.06, r_sh_ang, _R)],
        "RHeel": r_an + [(0.04, r_sh_ang, 0.0)],
    }
    sensors = {
        "left_wrist": (l_wr, l_up + [(1, "l_fore")]),
        "right_wrist": (r_wr, r_up + [(-1, "r_fore")]),
        "left_calf": (l_kn + [(b.shank / 2, l_sh_ang, 0.0)], l_sh_ang),
        "right_calf": (r_kn + [(b.shank / 2, r_sh_ang, 0.0)], r_sh_ang),
    }
    return j, sensors


def _angle(scene, terms, const, t):
    v = np.full_like(t, const)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    for sign, name in terms:
        a, b, c = scene.trajectories[name].eval(t)
        v, d1, d2 = v + sign * a, d1 + sign * b, d2 + sign * c
    return v, d1, d2


def point_kinematics(scene: KinematicScene, chain, t):
    """World position, velocity and acceleration of a chain end point, each (T, 2)."""
    t = np.asarray(t, dtype=float)
    hx, hxd, hxdd = scene.trajectories["hip_x"].eval(t)
    hy, hyd, hydd = scene.trajectories["hip_y"].eval(t)
    p = np.stack([hx, hy], axis=1)
    v = np.stack([hxd, hyd], axis=1)
    a = np.stack([hxdd, hydd], axis=1)
    for length, terms, const in chain:
        th, w, al = _angle(scene, terms, const, t)
        s, c = np.sin(th), np.cos(th)
        p = p + length * np.stack([s, -c], axis=1)
        along = np.stack([c, s], axis=1)
        v = v + length * w[:, None] * along
        a = a + length * (al[:, None] * along + (w * w)[:, None] * np.stack([-s, c], axis=1))
    return p, v, a


def joint_positions(scene: KinematicScene, t) -> np.ndarray:
    """World joint positions (T, 25, 2)."""
    chains, _ = _chains(scene.body)
    t = np.asarray(t, dtype=float)
    out = np.empty((len(t), N_JOINTS, 2))
    for name, chain in chains.items():
        out[:, JOINT[name]] = point_kinematics(scene, chain, t)[0]
    return out


def sensor_kinematics(scene: KinematicScene, placement: str, t):
    _, sensors = _chains(scene.body)
    chain, terms = sensors[placement]
    p, v, a = point_kinematics(scene, chain, t)
    th, w, _ = _angle(scene, terms, 0.0, np.asarray(t, dtype=float))
    return p, a, th, w


def analytic_imu(scene: KinematicScene, placement: str, t=None) -> dict[str, ChannelSeries]:
    """Exact device-frame IMU channels for one placement.

    Accelerometer = R(theta)^T (p'' - g) with g = (0, -9.81); the device x axis
    runs along the segment. The planar gyro reads the segment's angular rate
    about the camera axis (z).
    """
    if t is None:
        t = scene.times()
    t = np.asarray(t, dtype=float)
    _, acc, th, w = sensor_kinematics(scene, placement, t)
    s, c = np.sin(th), np.cos(th)
    ex = np.stack([s, -c], axis=1)
    ey = np.stack([c, s], axis=1)
    spec = acc - np.array([0.0, -scene.g])
    zero = np.zeros_like(t)
    ch = {
        "ax": np.sum(spec * ex, axis=1), "ay": np.sum(spec * ey, axis=1), "az": zero,
        "gx": zero, "gy": zero, "gz": w,
        "lax": np.sum(acc * ex, axis=1), "lay": np.sum(acc * ey, axis=1), "laz": zero,
    }
    ch["acc_norm"] = np.hypot(ch["ax"], ch["ay"])
    ch["gyr_norm"] = np.abs(w)
    ch["lin_norm"] = np.hypot(ch["lax"], ch["lay"])
    rate = 1.0 / (t[1] - t[0]) if len(t) > 1 else POSE_RATE
    return {k: ChannelSeries(placement, k, v, rate, float(t[0]) if len(t) else 0.0) for k, v in ch.items()}


def project(scene: KinematicScene, world: np.ndarray, t) -> np.ndarray:
    cam = scene.camera
    ppm = cam.pixels_per_meter * np.exp(cam.zoom_rate * np.asarray(t, dtype=float))
    px = cam.offset[0] + ppm[:, None] * world[..., 0]
    py = cam.offset[1] - ppm[:, None] * world[..., 1]
    return np.stack([px, py], axis=-1)


@dataclass
class NoiseConfig:
    pixel_sigma: float = 0.0
    dropout: float = 0.0
    confidence: float = 0.9


def render_keypoint_frames(scene: KinematicScene, noise: NoiseConfig | None = None,
                           rng: np.random.Generator | None = None,
                           fps: float = POSE_RATE) -> list[RawKeypointFrame]:
    """Keypoint frames at ``fps`` with optional pixel noise and joint dropout."""
    noise = noise or NoiseConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    t = scene.times(fps)
    px = project(scene, joint_positions(scene, t), t)
    if noise.pixel_sigma > 0:
        px = px + rng.normal(0.0, noise.pixel_sigma, px.shape)
    keep = np.ones(px.shape[:2], bool)
    if noise.dropout > 0:
        keep = rng.random(px.shape[:2]) >= noise.dropout
        # every joint needs at least one observation
        keep[0] |= ~keep.any(axis=0)
    frames = []
    for i in range(len(t)):
        person = {j: (float(px[i, j, 0]), float(px[i, j, 1]), noise.confidence)
                  for j in range(N_JOINTS) if keep[i, j]}
        frames.append(RawKeypointFrame(i, [person]))
    return frames


def render_poses(scene: KinematicScene, noise: NoiseConfig | None = None,
                 rng: np.random.Generator | None = None) -> PoseSequence:
    noise = noise or NoiseConfig()
    if noise.dropout == 0:
        t = scene.times()
        px = project(scene, joint_positions(scene, t), t)
        if noise.pixel_sigma > 0:
            rng = rng if rng is not None else np.random.default_rng(0)
            px = px + rng.normal(0.0, noise.pixel_sigma, px.shape)
        return PoseSequence(px)
    frames = render_keypoint_frames(scene, noise, rng)
    track = RawPoseTrack(0, POSE_RATE, [f.frame_index for f in frames], [f.people[0] for f in frames])
    return fill_and_resample(track)


# Scene generation ---------------------------------------------------------

@dataclass
class Band:
    amp: tuple[float, float]
    freq: tuple[float, float]
    n: int = 1
    # cap on amp * (2 pi freq)^2, i.e. peak angular (or linear) acceleration
    max_accel: float | None = None


def class_bands(class_id: int) -> dict[str, Band]:
    """Per-class motion signatures; frequency bands are disjoint between classes."""
    small = Band((0.0, 0.04), (0.2, 0.35))
    b = {name: small for name in TRAJECTORIES}
    b["hip_x"] = Band((0.0, 0.01), (0.2, 0.35))
    b["hip_y"] = Band((0.0, 0.01), (0.2, 0.35))
    if class_id == 0:
        f = (0.40, 0.60)
        b.update(r_upper=Band((0.8, 1.1), f), l_upper=Band((0.8, 1.1), f),
                 r_fore=Band((0.1, 0.3), f), l_fore=Band((0.1, 0.3), f))
    elif class_id == 1:
        f = (1.8, 2.2)
        b.update(r_fore=Band((0.3, 0.4), f), l_fore=Band((0.3, 0.4), f),
                 r_upper=Band((0.2, 0.4), f), l_upper=Band((0.2, 0.4), f))
    elif class_id == 2:
        f = (0.7, 0.9)
        b.update(r_thigh=Band((0.3, 0.45), f), l_thigh=Band((0.3, 0.45), f),
                 r_shank=Band((0.3, 0.5), f), l_shank=Band((0.3, 0.5), f),
                 hip_y=Band((0.02, 0.04), f))
    elif class_id == 3:
        f = (1.2, 1.5)
        b.update(r_upper=Band((0.6, 0.8), f), l_upper=Band((0.6, 0.8), f),
                 r_thigh=Band((0.15, 0.25), f), l_thigh=Band((0.15, 0.25), f),
                 hip_y=Band((0.01, 0.02), f))
    else:
        raise ValueError(f"unknown class id {class_id}")
    return b


def generic_bands() -> dict[str, Band]:
    """Broad mixed motions used to train the regressors."""
    f = (0.3, 2.4)
    return {
        "hip_x": Band((0.0, 0.02), f, max_accel=1.5), "hip_y": Band((0.0, 0.03), f, max_accel=2.0),
        "trunk": Band((0.0, 0.1), f, max_accel=5.0),
        "r_upper": Band((0.0, 1.2), f, max_accel=80.0), "l_upper": Band((0.0, 1.2), f, max_accel=80.0),
        "r_fore": Band((0.0, 0.8), f, max_accel=80.0), "l_fore": Band((0.0, 0.8), f, max_accel=80.0),
        "r_thigh": Band((0.0, 0.45), f, max_accel=30.0), "l_thigh": Band((0.0, 0.45), f, max_accel=30.0),
        "r_shank": Band((0.0, 0.5), f, max_accel=30.0), "l_shank": Band((0.0, 0.5), f, max_accel=30.0),
    }


BASES = {"hip_y": 1.0, "r_upper": 0.25, "l_upper": 0.25, "r_fore": 0.1, "l_fore": 0.1,
         "r_thigh": 0.05, "l_thigh": 0.05}


@dataclass
class SceneConfig:
    class_id: int | None = None  # None: generic motion
    duration: float = 20.0
    bands: dict[str, Band] | None = None
    body: Body = field(default_factory=Body)
    camera: Camera = field(default_factory=Camera)


def generate_scene(config: SceneConfig, rng: np.random.Generator) -> KinematicScene:
    bands = config.bands
    if bands is None:
        bands = generic_bands() if config.class_id is None else class_bands(config.class_id)
    # left/right limbs of class motions share the class frequency
    shared = {}
    trajs = {}
    for name in TRAJECTORIES:
        band = bands.get(name)
        comps = []
        if band is not None:
            for k in range(band.n):
                key = (band.freq, k)
                if config.class_id is not None and key in shared:
                    freq = shared[key]
                else:
                    freq = float(rng.uniform(*band.freq))
                    shared[key] = freq
                lo, hi = band.amp
                if band.max_accel is not None:
                    hi = max(lo, min(hi, band.max_accel / (2 * math.pi * freq) ** 2))
                amp = float(rng.uniform(lo, hi))
                phase = float(rng.uniform(0, 2 * math.pi))
                comps.append((amp, freq, phase))
        trajs[name] = Trajectory(BASES.get(name, 0.0), 0.0, comps)
    return KinematicScene(trajs, config.body, config.camera, config.duration,
                          -1 if config.class_id is None else config.class_id)


@dataclass
class UserProfile:
    user_id: str
    body: Body
    camera: Camera


def random_user(user_id: str, rng: np.random.Generator, size_jitter=0.05) -> UserProfile:
    body = Body().scaled(float(rng.uniform(1 - size_jitter, 1 + size_jitter)))
    cam = Camera(float(rng.uniform(150, 300)), (float(rng.uniform(500, 780)), float(rng.uniform(480, 620))))
    return UserProfile(user_id, body, cam)


@dataclass
class SynthSample:
    scene: KinematicScene
    poses: PoseSequence
    imu: dict[str, dict[str, ChannelSeries]]  # placement -> channel -> series
    labels: np.ndarray


def make_sample(scene: KinematicScene, noise: NoiseConfig | None = None,
                rng: np.random.Generator | None = None, placements=None) -> SynthSample:
    from .pose_features import PLACEMENTS
    placements = placements or PLACEMENTS
    poses = render_poses(scene, noise, rng)
    t = np.arange(len(poses)) / POSE_RATE
    imu = {p: analytic_imu(scene, p, t) for p in placements}
    labels = np.full(len(poses), scene.class_id, dtype=int)
    return SynthSample(scene, poses, imu, labels)
