"""Run configuration shared by every CLI subcommand.

The file is JSON. Unknown keys are rejected at every level, and the fully
resolved configuration is written next to each command's outputs.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .har import ClassifierConfig, Preprocessing
from .nn import Topology, TrainConfig
from .pose_features import DEFAULT_JOINT_SETS, PLACEMENTS
from .regressor import RegressorSpec


class ConfigError(ValueError):
    pass


_TOPOLOGY_KEYS = {"widths", "kernels", "dilations", "dropout", "dropout_from"}
_TRAIN_KEYS = set(TrainConfig.__dataclass_fields__) - {"loss"}

DEFAULTS = {
    "manifest": None,
    "out_dir": None,
    "seed": 0,
    "workers": 1,
    "placements": list(PLACEMENTS),
    "joint_sets": {p: list(j) for p, j in DEFAULT_JOINT_SETS.items()},
    "pose": {"min_conf": 0.0002, "gating_radius": None},
    "sync": {"prominence": None},
    "regressor": {
        "channels": ["acc_norm"],
        "topology": {},
        "train": {},
        "scaler": "standard",
        "filter_cutoff": None,
        "window": 16,
    },
    "classifier": {"topology": {}, "train": {}, "val_fraction": 0.1},
    "har": {
        "layout": [[p, "acc_norm"] for p in PLACEMENTS],
        "preprocessing": {"cutoff": None, "scaled": False},
        "mix": {"kind": "sim", "j": 0},
        "k": None,
    },
    "plan": None,
    "synth": {},
}

# sections whose contents are free-form maps, validated by their consumers
_OPEN = {"joint_sets", "synth", ("regressor", "topology"), ("regressor", "train"),
         ("classifier", "topology"), ("classifier", "train")}


def _merge(base, over, path=()):
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = ".".join(path + (k,))
        if k not in base:
            raise ConfigError(f"unknown config key '{where}'")
        sub = path + (k,)
        if isinstance(base[k], dict) and (k not in _OPEN and sub not in _OPEN):
            if not isinstance(v, dict):
                raise ConfigError(f"config key '{where}' must be an object")
            out[k] = _merge(base[k], v, sub)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(d, allowed, where):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown config keys under '{where}': {sorted(extra)}")


class RunConfig:
    """Resolved configuration; ``data`` holds the plain JSON-compatible dict."""

    def __init__(self, overrides: dict | None = None):
        self.data = _merge(DEFAULTS, overrides or {})
        self._validate()

    @classmethod
    def load(cls, path=None, **cli_overrides):
        raw = {}
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise FileNotFoundError(f"config file not found: {p}")
            try:
                raw = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
            if not isinstance(raw, dict):
                raise ConfigError("config file must hold a JSON object")
            base = p.parent
            for key in ("manifest", "plan", "out_dir"):
                if raw.get(key) and not Path(raw[key]).is_absolute():
                    raw[key] = str(base / raw[key])
        raw.update({k: v for k, v in cli_overrides.items() if v is not None})
        return cls(raw)

    def _validate(self):
        d = self.data
        for p in d["placements"]:
            if p not in PLACEMENTS:
                raise ConfigError(f"unknown placement {p!r}")
        for p, joints in d["joint_sets"].items():
            if p not in PLACEMENTS:
                raise ConfigError(f"joint_sets: unknown placement {p!r}")
            if not joints or any(not isinstance(j, int) or not 0 <= j < 25 for j in joints):
                raise ConfigError(f"joint_sets.{p}: joint ids must be integers in 0..24")
        for sec in ("regressor", "classifier"):
            _check_keys(d[sec]["topology"], _TOPOLOGY_KEYS, f"{sec}.topology")
            _check_keys(d[sec]["train"], _TRAIN_KEYS, f"{sec}.train")
        if not isinstance(d["seed"], int) or not isinstance(d["workers"], int) or d["workers"] < 1:
            raise ConfigError("seed must be an integer and workers a positive integer")
        try:
            self.classifier_config(4)
            self.regressor_spec(PLACEMENTS[0], d["regressor"]["channels"][0])
            self.preprocessing()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def __getitem__(self, key):
        return self.data[key]

    def regressor_spec(self, placement, channel, seed=None) -> RegressorSpec:
        r = self.data["regressor"]
        joints = tuple(self.data["joint_sets"].get(placement, DEFAULT_JOINT_SETS[placement]))
        topo = Topology(2 * (len(joints) + 2), 1, **{k: tuple(v) if isinstance(v, list) else v
                                                      for k, v in r["topology"].items()})
        train = TrainConfig(**{**r["train"], "seed": self.data["seed"] if seed is None else seed})
        return RegressorSpec(placement, channel, joints, topo, r["scaler"], r["filter_cutoff"], r["window"], train)

    def classifier_config(self, n_classes, seed=None) -> ClassifierConfig:
        c = self.data["classifier"]
        topo = None
        if c["topology"]:
            topo = Topology(1, n_classes, **{k: tuple(v) if isinstance(v, list) else v
                                             for k, v in c["topology"].items()})
        train = TrainConfig(**{**c["train"], "loss": "cross_entropy",
                               "seed": self.data["seed"] if seed is None else seed})
        return ClassifierConfig(n_classes, topo, train, c["val_fraction"])

    def preprocessing(self) -> Preprocessing:
        p = self.data["har"]["preprocessing"]
        _check_keys(p, {"cutoff", "scaled"}, "har.preprocessing")
        return Preprocessing(p["cutoff"], bool(p["scaled"]))

    @property
    def layout(self):
        return [tuple(x) for x in self.data["har"]["layout"]]

    def write(self, out_dir, name="resolved_config.json"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(json.dumps(self.data, indent=1, sort_keys=True) + "\n")
