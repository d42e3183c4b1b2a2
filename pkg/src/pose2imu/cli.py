"""Command-line entry point: ``pose2imu <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, har, imu_dsp, oracle, plotting, regressor
from .config import ConfigError, RunConfig
from .experiments import ManifestError, Session, SessionStore
from .nn import CheckpointError, TrainingDivergedError
from .pose_features import DegeneratePoseError, normalize_pose_sequence, normalized_to_csv
from .pose_ingest import KeypointParseError, MissingJointError, load_pose_sequences

log = logging.getLogger("pose2imu")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_INVARIANT = 5
EXIT_DIVERGED = 6

EXIT_CODES_HELP = """exit codes:
  0  success
  1  unexpected internal error
  2  bad command-line usage
  3  missing input file
  4  schema violation (config, manifest, plan, keypoint/IMU/label file, checkpoint)
  5  failed invariant (degenerate pose, sync failure, missing class, empty data, ...)
  6  training diverged (non-finite loss)

On failure one JSON line {"error": {"code", "kind", "message"}} is written to stderr."""

SCHEMA_ERRORS = (ConfigError, ManifestError, imu_dsp.ImuFormatError, KeypointParseError,
                 CheckpointError, json.JSONDecodeError)


def _classify(exc):
    if isinstance(exc, FileNotFoundError):
        return EXIT_MISSING_FILE, "missing_file"
    if isinstance(exc, SCHEMA_ERRORS):
        return EXIT_SCHEMA, "schema_violation"
    if isinstance(exc, TrainingDivergedError):
        return EXIT_DIVERGED, "training_diverged"
    if isinstance(exc, (ValueError, AssertionError, DegeneratePoseError, MissingJointError)):
        return EXIT_INVARIANT, "failed_invariant"
    return EXIT_INTERNAL, "internal_error"


def _need(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input not found: {p}")
    return p


def _out(args, cfg) -> Path:
    out = Path(args.out or cfg["out_dir"] or "pose2imu_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, cfg):
    path = getattr(args, "manifest", None) or cfg["manifest"]
    if not path:
        raise ConfigError("no manifest given (use --manifest or the 'manifest' config key)")
    return experiments.load_manifest(_need(path))


def _store(cfg, manifest):
    pose = cfg["pose"]
    kw = {"gating_radius": pose["gating_radius"]} if pose["gating_radius"] else {}
    return SessionStore(manifest, pose["min_conf"], **kw)


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


# Subcommands -----------------------------------------------------------------

def cmd_ingest_poses(args, cfg, out):
    raw = _need(args.input).read_bytes()
    pose = cfg["pose"]
    kw = {"gating_radius": pose["gating_radius"]} if pose["gating_radius"] else {}
    seqs = load_pose_sequences(raw, args.fps, pose["min_conf"], **kw)
    (out / "poses").mkdir(exist_ok=True)
    written = []
    for i, seq in enumerate(seqs):
        norm = normalize_pose_sequence(seq)
        path = out / "poses" / f"{Path(args.input).stem}_s{i}.csv"
        path.write_text(normalized_to_csv(norm))
        written.append({"file": str(path), "samples": len(seq)})
    _emit({"subjects": written})


def cmd_ingest_imu(args, cfg, out):
    rec = imu_dsp.parse_imu_csv(_need(args.input).read_bytes(), args.placement)
    rec = imu_dsp.resample_linear(rec, imu_dsp.RATE)
    chans = dict(rec.channels)
    for name in imu_dsp.DERIVED_CHANNELS:
        if name not in chans:
            try:
                chans[name] = imu_dsp.get_channel(rec, name).values
            except ValueError:
                pass
    rec = replace(rec, channels=chans)
    (out / "imu").mkdir(exist_ok=True)
    path = out / "imu" / f"{Path(args.input).stem}_50hz.csv"
    path.write_text(imu_dsp.recording_to_csv(rec))
    _emit({"file": str(path), "samples": len(rec), "channels": sorted(chans)})


def _acc_norm(rec):
    s = imu_dsp.get_channel(imu_dsp.resample_linear(rec, imu_dsp.RATE), "acc_norm")
    return replace(s, t0=float(rec.timestamps[0]))


def cmd_sync(args, cfg, out):
    prominence = cfg["sync"]["prominence"]
    if args.imu:
        if not args.anchors:
            raise ConfigError("--anchors is required with --imu")
        anchors = [int(a) for a in args.anchors.split(",")]
        rec = imu_dsp.parse_imu_csv(_need(args.imu).read_bytes(), args.placement or "")
        offset = imu_dsp.detect_sync_offset(_acc_norm(rec), anchors, args.fps, prominence)
        aligned = imu_dsp.align_recording(rec, offset)
        (out / "imu").mkdir(exist_ok=True)
        path = out / "imu" / f"{Path(args.imu).stem}_aligned.csv"
        path.write_text(imu_dsp.recording_to_csv(aligned))
        _emit({"offset_s": offset, "file": str(path)})
        return
    manifest = _manifest(args, cfg)
    store = _store(cfg, manifest)
    offsets = {}
    for s in manifest.sessions + manifest.regression_sessions:
        if not s.sync_anchor_frames:
            continue
        placement = args.placement or sorted(s.imu_files)[0]
        rec = imu_dsp.parse_imu_csv(manifest.path(s.imu_files[placement]).read_bytes(), placement)
        s.imu_offset = imu_dsp.detect_sync_offset(_acc_norm(rec), s.sync_anchor_frames, s.fps, prominence)
        offsets[s.id] = s.imu_offset
    del store
    _write_manifest(manifest, out / "manifest.json")
    _emit({"offsets_s": offsets, "manifest": str(out / "manifest.json")})


def _write_manifest(manifest, path):
    """Save with file references rewritten relative to the new location."""
    path = Path(path)
    d = manifest.to_dict()
    base = path.parent.resolve()

    def rel(p):
        return os.path.relpath((manifest.path(p)).resolve(), base)
    for group in ("sessions", "regression_sessions"):
        for s in d[group]:
            for key in ("pose_file", "label_file"):
                if s.get(key):
                    s[key] = rel(s[key])
            s["imu_files"] = {k: rel(v) for k, v in s["imu_files"].items()}
    path.write_text(json.dumps(d, indent=1) + "\n")


def _model_name(placement, channel):
    return f"{placement}__{channel}.ckpt"


def cmd_train_regression(args, cfg, out):
    manifest = _manifest(args, cfg)
    store = _store(cfg, manifest)
    (out / "models").mkdir(exist_ok=True)
    placements = [args.placement] if args.placement else cfg["placements"]
    summary = {}
    for p in placements:
        for c in cfg["regressor"]["channels"]:
            pairs = experiments.regression_pairs(manifest, p, c, store)
            spec = cfg.regressor_spec(p, c)
            model = regressor.train_regressor(spec, pairs)
            path = out / "models" / _model_name(p, c)
            path.write_bytes(regressor.save_checkpoint(model))
            summary[path.name] = {"best_epoch": model.history.best_epoch,
                                  "best_val_loss": min(model.history.val_loss)}
    _emit(summary)


def _load_models(models_dir):
    models = {}
    for f in sorted(_need(models_dir).glob("*.ckpt")):
        m = regressor.load_checkpoint(f.read_bytes())
        models[(m.spec.placement, m.spec.channel)] = m
    if not models:
        raise FileNotFoundError(f"no regressor checkpoints in {models_dir}")
    return models


def cmd_simulate(args, cfg, out):
    manifest = _manifest(args, cfg)
    store = _store(cfg, manifest)
    models = _load_models(args.models or out / "models")
    sim_dir = out / "simulated"
    sim_dir.mkdir(exist_ok=True)

    def write(s, sid):
        files = {}
        for p, series in experiments.simulate_session(store, s, models).items():
            path = sim_dir / f"{sid}_{p}.csv"
            path.write_text(imu_dsp.recording_to_csv(imu_dsp.series_to_recording(series)))
            files[p] = str(path.resolve())
        return files

    new, n_local, n_ext = [], 0, 0
    for s in manifest.sessions:
        if s.source == "simulated_external" and not s.imu_files:
            s.imu_files = write(s, s.id)
            n_ext += 1
        elif s.source == "real" and s.role == "train" and s.pose_file:
            sid = f"{s.id}__sim"
            if any(x.id == sid for x in manifest.sessions):
                continue
            new.append(Session(sid, s.user, "train", "simulated_local", s.fps, s.label_file,
                               write(s, sid), s.pose_file, simulated_from=s.id))
            n_local += 1
    manifest.sessions.extend(new)
    experiments.validate_manifest(manifest)
    _write_manifest(manifest, out / "manifest.json")
    _emit({"manifest": str(out / "manifest.json"), "simulated_local": n_local, "simulated_external": n_ext})


def cmd_train_har(args, cfg, out):
    manifest = _manifest(args, cfg)
    store = _store(cfg, manifest)
    h = cfg["har"]
    mix = experiments.Mix(h["mix"]["kind"], int(h["mix"].get("j", 0)))
    k = h["k"] if h["k"] is not None else len(manifest.ranked_users())
    pre = cfg.preprocessing()
    win = experiments.build_training_set(manifest, mix, k, cfg.layout, pre, store)
    test_ids = {s.id for s in manifest.sessions if s.role == "test"}
    if set(win.session) & test_ids:
        raise AssertionError("test session leaked into training")
    model = har.train_classifier(win, cfg.layout, manifest.classes,
                                 cfg.classifier_config(len(manifest.classes)), pre)
    (out / "classifier.ckpt").write_bytes(har.save_classifier(model))
    _emit({"checkpoint": str(out / "classifier.ckpt"), "train_windows": len(win),
           "best_epoch": model.history.best_epoch})


def cmd_evaluate(args, cfg, out):
    manifest = _manifest(args, cfg)
    manifest.test_sessions()
    model = har.load_classifier(_need(args.model or out / "classifier.ckpt").read_bytes())
    res = experiments.evaluate_model(model, manifest, _store(cfg, manifest))
    ev = out / "evaluation"
    ev.mkdir(exist_ok=True)
    row = {"cell_id": "evaluate", "status": "ok", "macro_f1": res["macro_f1"],
           "n_test_windows": res["n_test_windows"], "best_epoch": model.history.best_epoch,
           "preprocessing": model.preprocessing.label(), "error": ""}
    for c, name in enumerate(manifest.classes):
        row[f"f1_{name}"] = res["per_class"].get(c, 0.0)
    experiments.write_report([row], manifest.classes, ev / "report.csv")
    experiments.write_confusion(res["confusion"], manifest.classes, ev / "confusion.csv")
    plotting.confusion(res["confusion"], manifest.classes, ev / "confusion.svg")
    _emit({"macro_f1": round(res["macro_f1"], 6), "report": str(ev / "report.csv")})


def cmd_sweep(args, cfg, out):
    manifest = _manifest(args, cfg)
    plan_path = args.plan or cfg["plan"]
    if not plan_path:
        raise ConfigError("no plan given (use --plan or the 'plan' config key)")
    try:
        plan = experiments.load_plan(_need(plan_path), len(manifest.classes))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed plan: {exc}") from None
    cells = list(plan.cells())
    if args.dry_run:
        for c in cells:
            print(c.id)
        return
    rep = experiments.run_sweep(manifest, plan, out / "sweep", cfg["seed"], cfg["workers"])
    ok = sum(r["status"] == "ok" for r in rep.rows)
    _emit({"cells": len(cells), "ok": ok, "report": str(out / "sweep" / "report.csv")})


def cmd_compare_signals(args, cfg, out):
    def load(path):
        rec = imu_dsp.parse_imu_csv(_need(path).read_bytes(), args.placement or "")
        return rec
    real, sim = load(args.real), load(args.sim)
    lo = max(real.timestamps[0], sim.timestamps[0])
    hi = min(real.timestamps[-1], sim.timestamps[-1])
    if hi <= lo:
        raise ValueError("real and simulated recordings do not overlap in time")
    grid = lo + np.arange(int(np.floor((hi - lo) * imu_dsp.RATE + 1e-9)) + 1) / imu_dsp.RATE

    def on_grid(rec):
        r = imu_dsp.ImuRecording(rec.placement, grid, {k: np.interp(grid, rec.timestamps, v)
                                                       for k, v in rec.channels.items()}, imu_dsp.RATE)
        return imu_dsp.get_channel(r, args.channel)
    name = args.name or f"{Path(args.real).stem}__{args.channel}"
    summary = experiments.emit_signal_overlay(on_grid(real), on_grid(sim), out / "compare" / name)
    _emit(summary)


def cmd_synth_gen(args, cfg, out):
    spec_kw = dict(cfg["synth"])
    unknown = set(spec_kw) - set(oracle.DatasetSpec.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys under 'synth': {sorted(unknown)}")
    path = oracle.write_dataset(out, oracle.DatasetSpec(**spec_kw), cfg["seed"])
    _emit({"manifest": str(path)})


COMMANDS = {
    "ingest-poses": (cmd_ingest_poses, "keypoint file -> normalized pose CSV per tracked subject"),
    "ingest-imu": (cmd_ingest_imu, "IMU CSV -> 50 Hz CSV with channel norms"),
    "sync": (cmd_sync, "estimate the sensor-to-video offset from sync-gesture peaks"),
    "train-regression": (cmd_train_regression, "train pose -> IMU regressors on regression_sessions"),
    "simulate": (cmd_simulate, "simulate IMU CSVs from poses and extend the manifest"),
    "train-har": (cmd_train_har, "train the activity classifier"),
    "evaluate": (cmd_evaluate, "evaluate a classifier on the manifest's test sessions"),
    "sweep": (cmd_sweep, "run an experiment plan (resumable)"),
    "compare-signals": (cmd_compare_signals, "overlay a real and a simulated channel"),
    "synth-gen": (cmd_synth_gen, "write a synthetic kinematic dataset and manifest"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--workers", type=int, help="parallel workers (default 1)")
    common.add_argument("--out", help="output directory (overrides config out_dir)")
    common.add_argument("--manifest", help="dataset manifest (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pose2imu", description="Pose-to-IMU simulation and activity recognition.",
                                     epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    subs = {}
    for name, (_, helptext) in COMMANDS.items():
        subs[name] = sub.add_parser(name, parents=[common], help=helptext, description=helptext,
                                    epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    subs["ingest-poses"].add_argument("input")
    subs["ingest-poses"].add_argument("--fps", type=float, default=50.0)
    subs["ingest-imu"].add_argument("input")
    subs["ingest-imu"].add_argument("--placement", default="")
    subs["sync"].add_argument("--imu", help="single IMU CSV (otherwise every manifest session with anchors)")
    subs["sync"].add_argument("--anchors", help="comma-separated video frame indices of the sync peaks")
    subs["sync"].add_argument("--fps", type=float, default=50.0)
    subs["sync"].add_argument("--placement")
    subs["train-regression"].add_argument("--placement")
    subs["simulate"].add_argument("--models", help="directory of regressor checkpoints (default OUT/models)")
    subs["evaluate"].add_argument("--model", help="classifier checkpoint (default OUT/classifier.ckpt)")
    subs["sweep"].add_argument("--plan")
    subs["sweep"].add_argument("--dry-run", action="store_true", help="print the resolved cell list and exit")
    subs["compare-signals"].add_argument("--real", required=True)
    subs["compare-signals"].add_argument("--sim", required=True)
    subs["compare-signals"].add_argument("--channel", default="acc_norm")
    subs["compare-signals"].add_argument("--placement")
    subs["compare-signals"].add_argument("--name")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, seed=args.seed, workers=args.workers)
        out = _out(args, cfg)
        if not (args.command == "sweep" and args.dry_run):
            cfg.write(out, f"resolved_config.{args.command}.json")
        COMMANDS[args.command][0](args, cfg, out)
    except Exception as exc:  # every failure becomes one machine-readable line
        code, kind = _classify(exc)
        if code == EXIT_INTERNAL:
            log.exception("unexpected error")
        sys.stderr.write(json.dumps({"error": {"code": code, "kind": kind, "message": str(exc)}}) + "\n")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
