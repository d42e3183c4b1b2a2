import json
from pathlib import Path

import pytest

from pose2imu import cli

TINY_CONFIG = {
    "synth": {"n_train_users": 3, "n_test_users": 1, "n_external": 2, "n_generic": 3, "n_generic_val": 1,
              "generic_duration": 4.0, "class_duration": 6.0},
    "regressor": {"topology": {"widths": [8, 8, 8, 4]}, "train": {"max_epochs": 3, "patience": 2, "batch_size": 128}},
    "classifier": {"topology": {"widths": [8, 8, 8, 4]}, "train": {"max_epochs": 3, "patience": 2, "batch_size": 16}},
    "har": {"mix": {"kind": "sim+real", "j": 1}, "preprocessing": {"cutoff": 12, "scaled": True}},
}


def run_cli(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """Tiny synth-gen -> train-regression -> simulate run shared by the integration tests."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "config.json"
    cfg.write_text(json.dumps(TINY_CONFIG))
    data, work = root / "data", root / "work"
    assert run_cli("synth-gen", "--config", cfg, "--out", data) == 0
    assert run_cli("train-regression", "--config", cfg, "--manifest", data / "manifest.json", "--out", work) == 0
    assert run_cli("simulate", "--config", cfg, "--manifest", data / "manifest.json", "--out", work) == 0
    return {"root": root, "config": cfg, "data": data, "work": work,
            "raw_manifest": data / "manifest.json", "manifest": work / "manifest.json"}


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
