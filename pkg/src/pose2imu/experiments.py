"""Evaluation matrix: training-source mixes, user-count sweeps and preprocessing ablations."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import har, imu_dsp, plotting
from .har import ClassifierConfig, LabeledWindows, Preprocessing
from .imu_dsp import ChannelSeries
from .metrics import confusion_matrix, f1_from_confusion, mean_f1, pearson
from .nn import Topology, TrainConfig
from .pose_features import NormalizedPoseSequence, normalize_pose_sequence
from .pose_ingest import DEFAULT_MIN_CONF, PoseSequence, load_pose_sequences
from .regressor import TrainedRegressor, simulate_channel

log = logging.getLogger(__name__)

SOURCES = ("real", "simulated_local", "simulated_external")
ROLES = ("train", "test")
MIX_KINDS = ("real", "sim", "sim+real", "real+external", "sim+external", "external")


class ManifestError(ValueError):
    pass


@dataclass
class Session:
    id: str
    user: str | None
    role: str
    source: str
    fps: float
    label_file: str
    imu_files: dict[str, str]
    pose_file: str | None = None
    imu_offset: float = 0.0
    sync_anchor_frames: list[int] | None = None
    simulated_from: str | None = None


@dataclass
class RegressionSession:
    id: str
    fps: float
    pose_file: str
    imu_files: dict[str, str]
    imu_offset: float = 0.0
    sync_anchor_frames: list[int] | None = None
    user: str | None = None


@dataclass
class DatasetManifest:
    classes: list[str]
    users: dict[str, int | None]
    sessions: list[Session]
    regression_sessions: list[RegressionSession] = field(default_factory=list)
    root: Path = Path(".")

    @property
    def class_index(self):
        return {c: i for i, c in enumerate(self.classes)}

    def ranked_users(self) -> list[str]:
        ranked = [(r, u) for u, r in self.users.items() if r is not None]
        return [u for _, u in sorted(ranked)]

    def path(self, rel) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def test_sessions(self):
        tests = [s for s in self.sessions if s.role == "test" and s.source == "real"]
        if not tests:
            raise ManifestError("manifest field 'sessions' has no entry with role 'test' and source 'real'")
        return tests

    def to_dict(self):
        def clean(d):
            return {k: v for k, v in d.items() if v is not None}
        return {
            "classes": self.classes,
            "users": [clean({"id": u, "rank": r}) for u, r in self.users.items()],
            "sessions": [clean(dict(s.__dict__)) for s in self.sessions],
            "regression_sessions": [clean(dict(s.__dict__)) for s in self.regression_sessions],
        }


_SESSION_KEYS = set(Session.__dataclass_fields__)
_REG_KEYS = set(RegressionSession.__dataclass_fields__)


def load_manifest(path_or_dict, root=None) -> DatasetManifest:
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
        root = Path(root or ".")
    else:
        p = Path(path_or_dict)
        raw = json.loads(p.read_text())
        root = Path(root) if root else p.parent
    unknown = set(raw) - {"classes", "users", "sessions", "regression_sessions"}
    if unknown:
        raise ManifestError(f"unknown manifest fields {sorted(unknown)}")
    for key in ("classes", "users", "sessions"):
        if key not in raw:
            raise ManifestError(f"manifest field '{key}' is missing")
    users = {}
    for u in raw["users"]:
        if "id" not in u:
            raise ManifestError("manifest field 'users' entry lacks 'id'")
        users[u["id"]] = u.get("rank")
    sessions = []
    for i, s in enumerate(raw["sessions"]):
        extra = set(s) - _SESSION_KEYS
        if extra:
            raise ManifestError(f"manifest field 'sessions[{i}]' has unknown keys {sorted(extra)}")
        try:
            sessions.append(Session(**{"user": None, **s}))
        except TypeError as exc:
            raise ManifestError(f"manifest field 'sessions[{i}]': {exc}") from None
    reg = []
    for i, s in enumerate(raw.get("regression_sessions", [])):
        extra = set(s) - _REG_KEYS
        if extra:
            raise ManifestError(f"manifest field 'regression_sessions[{i}]' has unknown keys {sorted(extra)}")
        try:
            reg.append(RegressionSession(**s))
        except TypeError as exc:
            raise ManifestError(f"manifest field 'regression_sessions[{i}]': {exc}") from None
    m = DatasetManifest(list(raw["classes"]), users, sessions, reg, root)
    validate_manifest(m)
    return m


def validate_manifest(m: DatasetManifest):
    ids = [s.id for s in m.sessions]
    if len(set(ids)) != len(ids):
        raise ManifestError("manifest field 'sessions' has duplicate ids")
    for s in m.sessions:
        if s.role not in ROLES:
            raise ManifestError(f"manifest field 'sessions' ({s.id}): role must be one of {ROLES}")
        if s.source not in SOURCES:
            raise ManifestError(f"manifest field 'sessions' ({s.id}): source must be one of {SOURCES}")
        if s.source != "simulated_external" and s.user not in m.users:
            raise ManifestError(f"manifest field 'sessions' ({s.id}): unknown user {s.user!r}")
        if s.fps <= 0:
            raise ManifestError(f"manifest field 'sessions' ({s.id}): fps must be positive")
    train_users = {s.user for s in m.sessions if s.role == "train" and s.source != "simulated_external"}
    test_users = {s.user for s in m.sessions if s.role == "test"}
    ranks = {u: r for u, r in m.users.items() if r is not None}
    if set(ranks) != train_users:
        raise ManifestError("manifest field 'users': ranks must cover exactly the training users")
    if sorted(ranks.values()) != list(range(1, len(ranks) + 1)):
        raise ManifestError("manifest field 'users': ranks must be a permutation of 1..n")
    if train_users & test_users:
        raise ManifestError(f"manifest field 'sessions': users in both train and test roles: {sorted(train_users & test_users)}")


def save_manifest(m: DatasetManifest, path):
    Path(path).write_text(json.dumps(m.to_dict(), indent=1) + "\n")


# Plans -----------------------------------------------------------------------

@dataclass(frozen=True)
class Mix:
    kind: str
    j: int = 0

    def __post_init__(self):
        if self.kind not in MIX_KINDS:
            raise ValueError(f"unknown mix kind {self.kind!r}")

    @property
    def label(self):
        return f"{self.kind}{self.j}" if self.kind == "sim+real" else self.kind


@dataclass
class ExperimentPlan:
    channel_sets: dict[str, list[tuple[str, str]]]
    preprocessing: list[Preprocessing]
    mixes: list[Mix]
    k_values: list[int]
    seeds: list[int] = field(default_factory=lambda: [0])
    classifier: ClassifierConfig | None = None

    def cells(self):
        for (cs, pre, mix, k, seed) in itertools.product(
                sorted(self.channel_sets), self.preprocessing, self.mixes, self.k_values, self.seeds):
            yield Cell(cs, self.channel_sets[cs], pre, mix, k, seed)


@dataclass
class Cell:
    channel_set: str
    layout: list[tuple[str, str]]
    preprocessing: Preprocessing
    mix: Mix
    k: int
    seed: int

    @property
    def id(self):
        return f"{self.channel_set}__{self.preprocessing.label()}__{self.mix.label}__k{self.k}__s{self.seed}"


def cell_seed(global_seed: int, cell_id: str) -> int:
    h = hashlib.sha256(f"{global_seed}:{cell_id}".encode()).digest()
    return int.from_bytes(h[:4], "little") & 0x7FFFFFFF


def classifier_config_from_dict(d: dict | None, n_classes: int) -> ClassifierConfig:
    d = dict(d or {})
    unknown = set(d) - {"topology", "train", "val_fraction"}
    if unknown:
        raise ValueError(f"unknown classifier keys {sorted(unknown)}")
    topo = None
    if d.get("topology"):
        t = dict(d["topology"])
        topo = Topology(t.pop("in_channels", 1), n_classes, **{k: v for k, v in t.items() if k != "out_channels"})
    train = TrainConfig(**{"loss": "cross_entropy", **d.get("train", {})})
    return ClassifierConfig(n_classes, topo, train, d.get("val_fraction", 0.1))


def load_plan(path_or_dict, n_classes: int) -> ExperimentPlan:
    raw = json.loads(Path(path_or_dict).read_text()) if not isinstance(path_or_dict, dict) else path_or_dict
    unknown = set(raw) - {"channel_sets", "preprocessing", "mixes", "k", "seeds", "classifier"}
    if unknown:
        raise ValueError(f"unknown plan fields {sorted(unknown)}")
    cs = {name: [tuple(x) for x in layout] for name, layout in raw["channel_sets"].items()}
    pre = [Preprocessing(p.get("cutoff"), bool(p.get("scaled", False))) for p in raw.get("preprocessing", [{}])]
    mixes = [Mix(m["kind"], int(m.get("j", 0))) for m in raw["mixes"]]
    clf = classifier_config_from_dict(raw.get("classifier"), n_classes)
    return ExperimentPlan(cs, pre, mixes, [int(k) for k in raw["k"]], [int(s) for s in raw.get("seeds", [0])], clf)


# Data access -----------------------------------------------------------------

class SessionStore:
    """Loads and caches per-session channel series on the 50 Hz video grid."""

    def __init__(self, manifest: DatasetManifest, min_conf: float = DEFAULT_MIN_CONF, **track_kw):
        self.manifest = manifest
        self.min_conf = min_conf
        self.track_kw = track_kw
        self._labels: dict[str, np.ndarray] = {}
        self._recs: dict[tuple[str, str], imu_dsp.ImuRecording] = {}
        self._poses: dict[str, PoseSequence] = {}

    def pose(self, s) -> PoseSequence:
        """The longest tracked subject of the session's keypoint file, on the 50 Hz grid."""
        if s.id not in self._poses:
            if not s.pose_file:
                raise ManifestError(f"session {s.id} has no pose_file")
            raw = self.manifest.path(s.pose_file).read_bytes()
            seqs = load_pose_sequences(raw, s.fps, self.min_conf, **self.track_kw)
            if not seqs:
                raise ManifestError(f"session {s.id}: no subject tracked in {s.pose_file}")
            self._poses[s.id] = max(seqs, key=len)
        return self._poses[s.id]

    def labels(self, s: Session) -> np.ndarray:
        if s.id not in self._labels:
            raw = self.manifest.path(s.label_file).read_bytes()
            self._labels[s.id] = har.parse_label_file(raw, self.manifest.class_index)
        return self._labels[s.id]

    def recording(self, s, placement) -> imu_dsp.ImuRecording:
        key = (s.id, placement)
        if key not in self._recs:
            if placement not in s.imu_files:
                raise ManifestError(f"session {s.id} has no IMU file for placement {placement}")
            rec = imu_dsp.parse_imu_csv(self.manifest.path(s.imu_files[placement]).read_bytes(), placement)
            if s.imu_offset:
                rec = imu_dsp.align_recording(rec, s.imu_offset)
            self._recs[key] = rec
        return self._recs[key]

    def channels(self, s: Session, layout, n: int | None = None) -> list[ChannelSeries]:
        """Channels on the video grid k/50; length is the span covered by every recording."""
        if n is None:
            n = len(self.labels(s))
        recs = [self.recording(s, p) for p, _ in layout]
        lo = max(r.timestamps[0] for r in recs)
        hi = min(r.timestamps[-1] for r in recs)
        a = max(0, int(np.ceil(lo * imu_dsp.RATE - 1e-9)))
        b = min(n, int(np.floor(hi * imu_dsp.RATE + 1e-9)) + 1)
        if b - a < 1:
            raise ManifestError(f"session {s.id}: IMU data does not overlap the labelled span")
        grid = np.arange(a, b) / imu_dsp.RATE
        out = []
        for (p, name), rec in zip(layout, recs):
            on_grid = imu_dsp.ImuRecording(p, grid, {k: np.interp(grid, rec.timestamps, v)
                                                     for k, v in rec.channels.items()}, imu_dsp.RATE)
            ch = imu_dsp.get_channel(on_grid, name)
            out.append(ChannelSeries(p, name, ch.values, imu_dsp.RATE, float(grid[0])))
        return out

    def windows(self, s: Session, layout, pre: Preprocessing) -> LabeledWindows:
        labels = self.labels(s)
        chans = self.channels(s, layout)
        a = int(round(chans[0].t0 * imu_dsp.RATE))
        labels = labels[a:a + len(chans[0])]
        if np.any(labels < 0):
            raise ManifestError(f"session {s.id}: labels do not cover every sample")
        chans = har.filter_channels(chans, pre)
        return har.make_classification_windows(chans, labels, s.id, real=s.source == "real")


def regression_pairs(manifest: DatasetManifest, placement: str, channel: str,
                     store: SessionStore | None = None):
    """Aligned (normalized pose, sensor channel) pairs from the regression sessions."""
    store = store or SessionStore(manifest)
    pairs = []
    for rs in manifest.regression_sessions:
        norm = normalize_pose_sequence(store.pose(rs))
        ch = store.channels(rs, [(placement, channel)], n=len(norm))[0]
        a = int(round(ch.t0 * imu_dsp.RATE))
        sl = NormalizedPoseSequence(norm.coords[a:a + len(ch)], norm.speed[a:a + len(ch)],
                                    norm.speed_deriv[a:a + len(ch)])
        pairs.append((sl, ch))
    if not pairs:
        raise ManifestError("manifest field 'regression_sessions' is empty")
    return pairs


def simulate_session(store: SessionStore, s, models: dict[tuple[str, str], TrainedRegressor]):
    """Simulated channels of one session, grouped by placement."""
    norm = normalize_pose_sequence(store.pose(s))
    out: dict[str, list[ChannelSeries]] = {}
    for (p, c), model in sorted(models.items()):
        out.setdefault(p, []).append(simulate_channel(model, norm))
    return out


def select_sessions(manifest: DatasetManifest, mix: Mix, k: int) -> list[Session]:
    """Training sessions for a source mix over the top-k ranked users.

    External simulated data is taken whole, never per user.
    """
    ranked = manifest.ranked_users()
    if k > len(ranked):
        raise ValueError(f"k={k} exceeds the {len(ranked)} ranked users")
    external = [s for s in manifest.sessions if s.role == "train" and s.source == "simulated_external"]
    if k == 0 and (mix.kind not in ("real+external", "sim+external", "external") or not external):
        raise ValueError("k = 0 requires external simulated data in the mix")
    top = set(ranked[:k])
    top_j = set(ranked[:mix.j])
    train = [s for s in manifest.sessions if s.role == "train"]
    real = [s for s in train if s.source == "real" and s.user in top]
    sim = [s for s in train if s.source == "simulated_local" and s.user in top]
    if mix.kind == "real":
        out = real
    elif mix.kind == "sim":
        out = sim
    elif mix.kind == "sim+real":
        out = sim + [s for s in train if s.source == "real" and s.user in top_j]
    elif mix.kind == "real+external":
        out = real + external
    elif mix.kind == "sim+external":
        out = sim + external
    else:
        out = external
    return sorted(out, key=lambda s: s.id)


def build_training_set(manifest, mix: Mix, k: int, layout, pre: Preprocessing,
                       store: SessionStore | None = None) -> LabeledWindows:
    store = store or SessionStore(manifest)
    sessions = select_sessions(manifest, mix, k)
    if not sessions:
        raise ValueError(f"mix {mix.label} with k={k} selects no sessions")
    return LabeledWindows.concat([store.windows(s, layout, pre) for s in sessions])


def evaluate_model(model, manifest, store: SessionStore | None = None):
    """Window-level predictions over every real test session."""
    store = store or SessionStore(manifest)
    layout = model.layout
    trues, preds = [], []
    for s in manifest.test_sessions():
        w = store.windows(s, layout, model.preprocessing)
        if not len(w):
            continue
        p, _ = har.predict_windows(model, w.x)
        trues.append(w.majority)
        preds.append(p)
    if not trues:
        raise ValueError("no test windows")
    true, pred = np.concatenate(trues), np.concatenate(preds)
    n = len(manifest.classes)
    macro, per_class = mean_f1(pred, true, n)
    return {"macro_f1": macro, "per_class": per_class, "confusion": confusion_matrix(true, pred, n),
            "n_test_windows": int(len(true))}


# Sweep -----------------------------------------------------------------------

REPORT_HEADER = "# metric: macro F1 over classes present in the test ground truth"


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def run_cell(manifest: DatasetManifest, cell: Cell, config: ClassifierConfig, global_seed: int,
             store: SessionStore | None = None):
    store = store or SessionStore(manifest)
    seed = cell_seed(global_seed, cell.id)
    row = {"cell_id": cell.id, "channel_set": cell.channel_set, "preprocessing": cell.preprocessing.label(),
           "mix": cell.mix.label, "k": cell.k, "seed": cell.seed}
    t0 = time.perf_counter()
    try:
        win = build_training_set(manifest, cell.mix, cell.k, cell.layout, cell.preprocessing, store)
        test_ids = {s.id for s in manifest.test_sessions()}
        if set(win.session) & test_ids:
            raise AssertionError("test session leaked into training")
        cfg = ClassifierConfig(config.n_classes, config.topology,
                               TrainConfig(**{**config.train.to_dict(), "seed": seed}), config.val_fraction)
        model = har.train_classifier(win, cell.layout, manifest.classes, cfg, cell.preprocessing)
        res = evaluate_model(model, manifest, store)
        row.update(status="ok", macro_f1=res["macro_f1"], n_train_windows=len(win),
                   n_real_train_windows=int(win.real.sum()), n_test_windows=res["n_test_windows"],
                   best_epoch=model.history.best_epoch, error="")
        for c, name in enumerate(manifest.classes):
            row[f"f1_{name}"] = res["per_class"].get(c, 0.0)
        cm = res["confusion"]
    except Exception as exc:  # a failed cell is recorded and the sweep continues
        log.exception("cell %s failed", cell.id)
        row.update(status="failed", macro_f1="", n_train_windows="", n_real_train_windows="",
                   n_test_windows="", best_epoch="", error=f"{type(exc).__name__}: {exc}")
        for name in manifest.classes:
            row[f"f1_{name}"] = ""
        cm = None
    return row, cm, time.perf_counter() - t0


def _cell_worker(args):
    manifest, cell, config, global_seed = args
    return run_cell(manifest, cell, config, global_seed)


def report_columns(classes):
    return (["cell_id", "channel_set", "preprocessing", "mix", "k", "seed", "status", "macro_f1"]
            + [f"f1_{c}" for c in classes]
            + ["n_train_windows", "n_real_train_windows", "n_test_windows", "best_epoch", "error"])


def write_report(rows, classes, path):
    cols = report_columns(classes)
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    w = csv.DictWriter(buf, cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c, "")) for c in cols})
    Path(path).write_text(buf.getvalue())


def read_report(path):
    lines = Path(path).read_text().splitlines()
    return list(csv.DictReader([l for l in lines if not l.startswith("#")]))


def write_confusion(cm, classes, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\pred"] + list(classes))
    for name, row in zip(classes, cm):
        w.writerow([name] + [int(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_confusion(path) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    return np.array([[int(v) for v in r[1:]] for r in rows[1:]])


@dataclass
class EvalReport:
    rows: list[dict]
    confusions: dict[str, np.ndarray]
    runtimes: dict[str, float]


def run_sweep(manifest: DatasetManifest, plan: ExperimentPlan, out_dir=None, global_seed: int = 0,
              workers: int = 1, config: ClassifierConfig | None = None) -> EvalReport:
    """Train and evaluate every plan cell; completed cells found in ``out_dir`` are reused."""
    config = config or plan.classifier or ClassifierConfig(len(manifest.classes))
    manifest.test_sessions()
    cells = list(plan.cells())
    out = Path(out_dir) if out_dir else None
    done: dict[str, tuple] = {}
    if out:
        (out / "cells").mkdir(parents=True, exist_ok=True)
        (out / "confusion").mkdir(exist_ok=True)
        for c in cells:
            f = out / "cells" / f"{c.id}.json"
            if f.exists():
                d = json.loads(f.read_text())
                done[c.id] = (d["row"], None if d["confusion"] is None else np.array(d["confusion"]), d["runtime"])
    todo = [c for c in cells if c.id not in done]

    def commit(cell, result):
        done[cell.id] = result
        if out:
            row, cm, rt = result
            tmp = out / "cells" / f"{cell.id}.json.tmp"
            tmp.write_text(json.dumps({"row": row, "confusion": None if cm is None else cm.tolist(),
                                       "runtime": rt}, sort_keys=True))
            tmp.replace(out / "cells" / f"{cell.id}.json")

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            for cell, res in zip(todo, pool.map(_cell_worker, [(manifest, c, config, global_seed) for c in todo])):
                commit(cell, res)
    else:
        store = SessionStore(manifest)
        for c in todo:
            commit(c, run_cell(manifest, c, config, global_seed, store))

    rows = [done[c.id][0] for c in cells]
    confusions = {c.id: done[c.id][1] for c in cells if done[c.id][1] is not None}
    runtimes = {c.id: done[c.id][2] for c in cells}
    if out:
        write_report(rows, manifest.classes, out / "report.csv")
        for cid, cm in confusions.items():
            write_confusion(cm, manifest.classes, out / "confusion" / f"{cid}.csv")
        with open(out / "timings.csv", "w") as fh:
            fh.write("cell_id,runtime_s\n")
            for cid, rt in runtimes.items():
                fh.write(f"{cid},{rt:.3f}\n")
        plotting.f1_vs_users(rows, out / "f1_vs_users.svg")
    return EvalReport(rows, confusions, runtimes)


def check_report_consistency(rows, confusions, classes, tol=1e-9):
    """Per-class F1 recomputed from each confusion matrix must match the report."""
    for r in rows:
        if r["status"] != "ok":
            continue
        f1 = f1_from_confusion(confusions[r["cell_id"]])
        for c, name in enumerate(classes):
            if abs(float(r[f"f1_{name}"]) - f1[c]) > tol:
                return False
    return True


def rank_users(manifest: DatasetManifest, layout, config: ClassifierConfig, pre=None, global_seed=0):
    """Default ranking: train on each user's real data alone, order by test macro F1."""
    pre = pre or Preprocessing()
    store = SessionStore(manifest)
    scores = []
    users = sorted({s.user for s in manifest.sessions if s.role == "train" and s.source == "real"})
    for u in users:
        sessions = [s for s in manifest.sessions if s.role == "train" and s.source == "real" and s.user == u]
        win = LabeledWindows.concat([store.windows(s, layout, pre) for s in sessions])
        try:
            model = har.train_classifier(win, layout, manifest.classes, config, pre)
            f1 = evaluate_model(model, manifest, store)["macro_f1"]
        except har.MissingClassError:
            f1 = 0.0
        scores.append((-f1, u))
    return [u for _, u in sorted(scores)]


# Signal comparison -----------------------------------------------------------

def emit_signal_overlay(real: ChannelSeries, simulated: ChannelSeries, out_prefix) -> dict:
    """Write ``<prefix>.csv``, ``<prefix>.svg`` and ``<prefix>_summary.json``."""
    r = real.values if isinstance(real, ChannelSeries) else np.asarray(real, dtype=float)
    s = simulated.values if isinstance(simulated, ChannelSeries) else np.asarray(simulated, dtype=float)
    if len(r) != len(s):
        raise ValueError(f"length mismatch: real {len(r)} vs simulated {len(s)}")
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_index", "real", "simulated"])
    for i, (a, b) in enumerate(zip(r, s)):
        w.writerow([i, repr(float(a)), repr(float(b))])
    prefix.with_suffix(".csv").write_text(buf.getvalue())
    name = getattr(real, "name", "value")
    plotting.signal_overlay(r, s, prefix.with_suffix(".svg"), ylabel=name)
    summary = {"mse": float(np.mean((r - s) ** 2)), "pearson": pearson(r, s), "n": int(len(r))}
    Path(f"{prefix}_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary
