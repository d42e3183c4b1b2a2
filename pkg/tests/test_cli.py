import json
import shutil

import numpy as np
import pytest

from conftest import run_cli
from pose2imu import cli, har
from pose2imu.experiments import read_report


def last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])["error"]


def impulse_csv(path, peaks, seconds=6.0, rate=100):
    t = np.arange(int(seconds * rate)) / rate
    az = np.full_like(t, 9.81)
    for p in peaks:
        az += 15 * np.exp(-0.5 * ((t - p) / 0.03) ** 2)
    rows = "\n".join(f"{float(a)!r},0.0,0.0,{float(b)!r}" for a, b in zip(t, az))
    path.write_text("t,ax,ay,az\n" + rows + "\n")
    return path


@pytest.fixture(scope="module")
def trained(pipeline):
    # a sibling of data/ so the manifest's relative references still resolve
    out = pipeline["root"] / "har"
    shutil.copytree(pipeline["work"], out)
    args = ("--config", pipeline["config"], "--manifest", out / "manifest.json", "--out", out)
    assert run_cli("train-har", *args) == 0
    assert run_cli("evaluate", *args) == 0
    return out, args


def test_pipeline_outputs(pipeline):
    work = pipeline["work"]
    assert sorted(p.name for p in (work / "models").glob("*.ckpt")) == [
        "left_calf__acc_norm.ckpt", "left_wrist__acc_norm.ckpt",
        "right_calf__acc_norm.ckpt", "right_wrist__acc_norm.ckpt"]
    m = json.loads(pipeline["manifest"].read_text())
    sims = [s for s in m["sessions"] if s["source"] == "simulated_local"]
    assert len(sims) == 12 and all(s["simulated_from"] for s in sims)
    for s in m["sessions"]:
        for f in s["imu_files"].values():
            assert (work / f).exists()
    assert (work / "resolved_config.simulate.json").exists()


def test_train_and_evaluate(trained, pipeline):
    out, _ = trained
    model = har.load_classifier((out / "classifier.ckpt").read_bytes())
    assert [list(x) for x in model.layout] == json.loads(pipeline["config"].read_text()).get(
        "har", {}).get("layout", [[p, "acc_norm"] for p in ("left_wrist", "right_wrist", "left_calf", "right_calf")])
    rows = read_report(out / "evaluation" / "report.csv")
    assert len(rows) == 1 and 0 <= float(rows[0]["macro_f1"]) <= 1
    assert (out / "evaluation" / "confusion.svg").read_text().lstrip().startswith("<?xml")


def test_rerun_is_byte_identical(trained, pipeline):
    out, args = trained
    again = pipeline["root"] / "har_again"
    shutil.copytree(out, again)
    args = tuple(again if a == out else (again / "manifest.json" if a == out / "manifest.json" else a) for a in args)
    assert run_cli("train-har", *args) == 0
    assert run_cli("evaluate", *args) == 0
    for rel in ("classifier.ckpt", "evaluation/report.csv", "evaluation/confusion.csv", "evaluation/confusion.svg"):
        assert (out / rel).read_bytes() == (again / rel).read_bytes(), rel


def test_regression_checkpoints_deterministic(pipeline, tmp_path):
    assert run_cli("train-regression", "--config", pipeline["config"], "--manifest", pipeline["raw_manifest"],
                   "--out", tmp_path, "--placement", "left_wrist") == 0
    assert ((tmp_path / "models" / "left_wrist__acc_norm.ckpt").read_bytes()
            == (pipeline["work"] / "models" / "left_wrist__acc_norm.ckpt").read_bytes())


def test_evaluate_without_test_sessions(pipeline, tmp_path, capsys):
    raw = json.loads(pipeline["manifest"].read_text())
    raw["sessions"] = [s for s in raw["sessions"] if s["role"] != "test"]
    raw["users"] = [u for u in raw["users"] if u["id"] != "t00"]
    (pipeline["work"] / "no_test.json").write_text(json.dumps(raw))
    code = run_cli("evaluate", "--manifest", pipeline["work"] / "no_test.json", "--out", tmp_path,
                   "--model", pipeline["work"] / "models" / "left_wrist__acc_norm.ckpt")
    assert code == 4
    err = last_error(capsys)
    assert err["code"] == 4 and "sessions" in err["message"]


def test_missing_file_code(tmp_path, capsys):
    assert run_cli("ingest-imu", tmp_path / "nope.csv", "--out", tmp_path) == 3
    assert last_error(capsys)["kind"] == "missing_file"


def test_schema_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,ax\n0,1\n0,2\n")
    assert run_cli("ingest-imu", bad, "--out", tmp_path) == 4
    assert last_error(capsys)["code"] == 4


def test_invariant_code(tmp_path, capsys):
    a = impulse_csv(tmp_path / "a.csv", [1.0])
    b = tmp_path / "b.csv"
    b.write_text("t,ax,ay,az\n100,0,0,1\n101,0,0,1\n")
    assert run_cli("compare-signals", "--real", a, "--sim", b, "--out", tmp_path) == 5
    assert last_error(capsys)["kind"] == "failed_invariant"


def test_usage_code_and_help(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["no-such-command"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["evaluate", "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    for code in range(7):
        assert f"{code}" in text
    assert "exit codes" in text


def test_sweep_dry_run(pipeline, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"channel_sets": {"w": [["left_wrist", "acc_norm"]]},
                                "mixes": [{"kind": "real"}, {"kind": "sim"}], "k": [1, 2]}))
    out = tmp_path / "out"
    assert run_cli("sweep", "--manifest", pipeline["manifest"], "--plan", plan, "--out", out, "--dry-run") == 0
    ids = capsys.readouterr().out.split()
    assert len(ids) == 4 and len(set(ids)) == 4
    assert not (out / "sweep").exists()


def test_sweep_runs(pipeline, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"channel_sets": {"w": [["left_wrist", "acc_norm"]]}, "mixes": [{"kind": "real"}],
                                "k": [1], "classifier": {"train": {"max_epochs": 2, "patience": 1}}}))
    assert run_cli("sweep", "--manifest", pipeline["manifest"], "--plan", plan, "--out", tmp_path) == 0
    assert len(read_report(tmp_path / "sweep" / "report.csv")) == 1
    assert (tmp_path / "sweep" / "f1_vs_users.svg").exists()


def test_sync_single_file(tmp_path, capsys):
    f = impulse_csv(tmp_path / "imu.csv", [1.0, 2.0, 3.0])
    assert run_cli("sync", "--imu", f, "--anchors", "75,125,175", "--fps", 50, "--out", tmp_path) == 0
    res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert res["offset_s"] == pytest.approx(0.5, abs=0.01)
    aligned = np.loadtxt(tmp_path / "imu" / "imu_aligned.csv", delimiter=",", skiprows=1)
    assert aligned[0, 0] == pytest.approx(0.5, abs=0.01)


def test_sync_manifest_mode(pipeline, tmp_path, capsys):
    raw = json.loads(pipeline["raw_manifest"].read_text())
    s = raw["sessions"][0]
    placement = sorted(s["imu_files"])[0]
    s["imu_files"][placement] = str(impulse_csv(tmp_path / "sync.csv", [1.0, 2.0, 3.0]))
    s["sync_anchor_frames"] = [60, 110, 160]
    for key in ("pose_file", "label_file"):
        s[key] = str(pipeline["data"] / s[key])
    for other in raw["sessions"][1:] + raw["regression_sessions"]:
        for key in ("pose_file", "label_file"):
            if other.get(key):
                other[key] = str(pipeline["data"] / other[key])
        other["imu_files"] = {p: str(pipeline["data"] / f) for p, f in other["imu_files"].items()}
    src = tmp_path / "in.json"
    src.write_text(json.dumps(raw))
    assert run_cli("sync", "--manifest", src, "--out", tmp_path / "o") == 0
    res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert res["offsets_s"] == {s["id"]: pytest.approx(0.2, abs=0.01)}
    synced = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert synced["sessions"][0]["imu_offset"] == pytest.approx(0.2, abs=0.01)


def test_ingest_poses(pipeline, tmp_path):
    src = sorted((pipeline["data"] / "poses").glob("t00_*.jsonl"))[0]
    assert run_cli("ingest-poses", src, "--fps", 50, "--out", tmp_path) == 0
    files = list((tmp_path / "poses").glob("*.csv"))
    assert len(files) == 1
    header = files[0].read_text().splitlines()[0]
    assert "scale" in header or "speed" in header


def test_ingest_imu(pipeline, tmp_path):
    src = sorted((pipeline["data"] / "imu").glob("t00_*.csv"))[0]
    assert run_cli("ingest-imu", src, "--out", tmp_path) == 0
    out = next((tmp_path / "imu").glob("*_50hz.csv"))
    header = out.read_text().splitlines()[0].split(",")
    assert {"acc_norm", "gyr_norm"} <= set(header)
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    np.testing.assert_allclose(np.diff(data[:, 0]), 0.02, atol=1e-9)


def test_compare_signals(pipeline, tmp_path):
    m = json.loads(pipeline["manifest"].read_text())
    sim = next(s for s in m["sessions"] if s["source"] == "simulated_local")
    real = next(s for s in m["sessions"] if s["id"] == sim["simulated_from"])
    p = "left_wrist"
    assert run_cli("compare-signals", "--real", pipeline["work"] / real["imu_files"][p],
                   "--sim", pipeline["work"] / sim["imu_files"][p], "--placement", p,
                   "--name", "cmp", "--out", tmp_path) == 0
    for suffix in (".csv", ".svg", "_summary.json"):
        assert (tmp_path / "compare" / f"cmp{suffix}").exists()
    summary = json.loads((tmp_path / "compare" / "cmp_summary.json").read_text())
    assert summary["mse"] >= 0 and -1 <= summary["pearson"] <= 1
