"""Desk-scale experiments on the synthetic kinematic task.

Generic-motion scenes train the pose -> IMU regressors; class scenes performed
by synthetic users stand in for the target activity dataset. "Exact" signals
are the analytic IMU channels, "simulated" ones come from the regressors.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import har, imu_dsp, synth
from .har import ClassifierConfig, LabeledWindows, Preprocessing
from .metrics import mean_f1
from .nn import Topology, TrainConfig
from .pose_features import PLACEMENTS, normalize_pose_sequence
from .pose_ingest import dump_keypoint_frames
from .regressor import RegressorSpec, TrainedRegressor, simulate_channel, train_regressor


@dataclass
class OracleConfig:
    # many short scenes generalise far better than long training: the calf
    # regressors overfit 24 scenes within a few epochs
    n_generic: int = 96
    n_generic_val: int = 3
    generic_duration: float = 8.0
    class_duration: float = 20.0
    channel: str = "acc_norm"
    regressor_widths: tuple[int, ...] = (32, 32, 32, 16)
    regressor_dropout: float = 0.1
    regressor_epochs: int = 15
    regressor_patience: int = 5
    regressor_batch: int = 128
    classifier_widths: tuple[int, ...] = (16, 16, 16, 8)
    classifier_dropout: float = 0.1
    classifier_epochs: int = 60
    classifier_patience: int = 10
    classifier_batch: int = 32
    scaled: bool = True

    def regressor_spec(self, placement, seed) -> RegressorSpec:
        n_in = 2 * (5 + 2)
        topo = Topology(n_in, 1, widths=self.regressor_widths, dropout=self.regressor_dropout)
        train = TrainConfig(max_epochs=self.regressor_epochs, patience=self.regressor_patience,
                            batch_size=self.regressor_batch, seed=seed)
        return RegressorSpec(placement, self.channel, topology=topo, train=train)

    def classifier_config(self, n_classes, seed) -> ClassifierConfig:
        topo = Topology(1, n_classes, widths=self.classifier_widths, dropout=self.classifier_dropout)
        train = TrainConfig(max_epochs=self.classifier_epochs, patience=self.classifier_patience,
                            batch_size=self.classifier_batch, seed=seed, loss="cross_entropy")
        return ClassifierConfig(n_classes, topo, train)

    @property
    def layout(self):
        return [(p, self.channel) for p in PLACEMENTS]


def make_users(rng, n, prefix="u"):
    return [synth.random_user(f"{prefix}{i:02d}", rng) for i in range(n)]


def scene(rng, user, class_id=None, duration=20.0):
    cfg = synth.SceneConfig(class_id=class_id, duration=duration, body=user.body, camera=user.camera)
    return synth.generate_scene(cfg, rng)


def generic_samples(rng, n, duration):
    return [synth.make_sample(scene(rng, synth.random_user(f"g{i}", rng), None, duration)) for i in range(n)]


def class_samples(rng, users, duration, per_class=1, n_classes=len(synth.CLASS_NAMES)):
    """One scene per (user, class, repetition), user-major order."""
    out = []
    for u in users:
        for c in range(n_classes):
            for _ in range(per_class):
                s = synth.make_sample(scene(rng, u, c, duration))
                s.user = u.user_id
                out.append(s)
    return out


def regression_pairs(samples, placement, channel):
    return [(normalize_pose_sequence(s.poses), s.imu[placement][channel]) for s in samples]


def train_regressors(cfg: OracleConfig, generic, generic_val, seed=0, placements=PLACEMENTS):
    return {p: train_regressor(cfg.regressor_spec(p, seed), regression_pairs(generic, p, cfg.channel),
                               regression_pairs(generic_val, p, cfg.channel))
            for p in placements}


def exact_channels(sample, layout):
    return [sample.imu[p][c] for p, c in layout]


def simulated_channels(regs: dict[str, TrainedRegressor], sample, layout):
    norm = normalize_pose_sequence(sample.poses)
    return [simulate_channel(regs[p], norm) for p, _ in layout]


def sample_windows(samples, layout, regs=None, real=None, session_prefix="") -> LabeledWindows:
    """Windows from exact signals, or from simulated ones when ``regs`` is given."""
    parts = []
    for i, s in enumerate(samples):
        chans = exact_channels(s, layout) if regs is None else simulated_channels(regs, s, layout)
        is_real = (regs is None) if real is None else real
        parts.append(har.make_classification_windows(chans, s.labels, f"{session_prefix}{i}", is_real))
    return LabeledWindows.concat(parts)


def train_and_score(train_w: LabeledWindows, test_w: LabeledWindows, cfg: OracleConfig, seed: int,
                    n_classes=len(synth.CLASS_NAMES)):
    model = har.train_classifier(train_w, cfg.layout, list(synth.CLASS_NAMES[:n_classes]),
                                 cfg.classifier_config(n_classes, seed), Preprocessing(scaled=cfg.scaled))
    pred, _ = har.predict_windows(model, test_w.x)
    return mean_f1(pred, test_w.majority, n_classes)[0], model


# On-disk dataset ---------------------------------------------------------------

@dataclass
class DatasetSpec:
    n_train_users: int = 6
    n_test_users: int = 3
    n_external: int = 0
    n_generic: int = 96
    n_generic_val: int = 3
    generic_duration: float = 8.0
    class_duration: float = 20.0
    imu_rate: float = 100.0
    video_fps: float = 50.0
    pixel_sigma: float = 0.0
    joint_dropout: float = 0.0


def _imu_csv(sample_scene, placement, rate):
    t = sample_scene.times(rate)
    ch = synth.analytic_imu(sample_scene, placement, t)
    rec = imu_dsp.ImuRecording(placement, t, {k: ch[k].values for k in imu_dsp.RAW_CHANNELS}, rate)
    return imu_dsp.recording_to_csv(rec)


def write_dataset(out_dir, spec: DatasetSpec | None = None, seed: int = 0) -> Path:
    """Write keypoint files, IMU CSVs, label files and a manifest; returns the manifest path."""
    spec = spec or DatasetSpec()
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    for sub in ("poses", "imu", "labels"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    noise = synth.NoiseConfig(spec.pixel_sigma, spec.joint_dropout)
    classes = list(synth.CLASS_NAMES)

    def emit(sid, sc, with_imu=True):
        frames = synth.render_keypoint_frames(sc, noise, rng, spec.video_fps)
        (out / "poses" / f"{sid}.jsonl").write_bytes(dump_keypoint_frames(frames))
        files = {}
        if with_imu:
            for p in PLACEMENTS:
                (out / "imu" / f"{sid}_{p}.csv").write_text(_imu_csv(sc, p, spec.imu_rate))
                files[p] = f"imu/{sid}_{p}.csv"
        return f"poses/{sid}.jsonl", files

    regression = []
    for i in range(spec.n_generic + spec.n_generic_val):
        sc = scene(rng, synth.random_user(f"g{i}", rng), None, spec.generic_duration)
        pose, files = emit(f"generic{i:03d}", sc)
        regression.append({"id": f"generic{i:03d}", "fps": spec.video_fps, "pose_file": pose, "imu_files": files})

    users, sessions = [], []
    train_users = make_users(rng, spec.n_train_users, "u")
    test_users = make_users(rng, spec.n_test_users, "t")
    for role, group in (("train", train_users), ("test", test_users)):
        for rank, u in enumerate(group, start=1):
            users.append({"id": u.user_id, "rank": rank} if role == "train" else {"id": u.user_id})
            for c, name in enumerate(classes):
                sid = f"{u.user_id}_{name}"
                sc = scene(rng, u, c, spec.class_duration)
                pose, files = emit(sid, sc)
                labels = np.full(sc.n_samples, c)
                (out / "labels" / f"{sid}.csv").write_text(har.labels_to_csv(labels, classes))
                sessions.append({"id": sid, "user": u.user_id, "role": role, "source": "real",
                                 "fps": spec.video_fps, "pose_file": pose, "imu_files": files,
                                 "label_file": f"labels/{sid}.csv"})
    for i in range(spec.n_external):
        u = synth.random_user(f"x{i:02d}", rng)
        c = i % len(classes)
        sid = f"ext{i:03d}_{classes[c]}"
        sc = scene(rng, u, c, spec.class_duration)
        pose, _ = emit(sid, sc, with_imu=False)
        (out / "labels" / f"{sid}.csv").write_text(har.labels_to_csv(np.full(sc.n_samples, c), classes))
        sessions.append({"id": sid, "role": "train", "source": "simulated_external", "fps": spec.video_fps,
                         "pose_file": pose, "imu_files": {}, "label_file": f"labels/{sid}.csv"})

    manifest = {"classes": classes, "users": users, "sessions": sessions, "regression_sessions": regression}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    (out / "dataset_spec.json").write_text(json.dumps({**asdict(spec), "seed": seed}, indent=1) + "\n")
    return path
