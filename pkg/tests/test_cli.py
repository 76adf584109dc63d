import csv
import json

import pytest

from occlubench.cli import main
from occlubench.config import ConfigError, build_config
from occlubench.io import read_container
from occlubench.synthetic import make_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    return make_dataset(root, n_actions=2, n_cameras=2, n_frames=250, seed=1)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_defaults_and_overrides(tmp_path):
    cfg = build_config()
    assert cfg.protocol == "p1" and cfg.exclude_joints == ("Hip",)
    assert cfg.resolved()["sigmas"] == [0.001, 0.005, 0.01, 0.03, 0.05]
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"protocol": "P2", "runs": 2, "joints": ["rwrist"]}))
    cfg = build_config(path, seed=4)
    assert (cfg.protocol, cfg.runs, cfg.joints, cfg.seed) == ("p2", 2, ("RWrist",), 4)
    assert build_config(path, seed=4, jobs=3).digest() == cfg.digest()


@pytest.mark.parametrize("bad", [{"runs": 0}, {"sigmas": [-1]}, {"slices": ["diagonal"]}, {"bogus": 1},
                                 {"joints": ["Tail"]}, {"window": [200, 260]}])
def test_config_rejects(tmp_path, bad):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        build_config(path)


def test_cli_exit_codes(tmp_path, dataset, capsys):
    data2d, _ = dataset
    assert main(["corrupt", str(data2d), "--runs", "0", "--out", str(tmp_path / "o")]) == 2
    assert main(["corrupt", str(tmp_path / "absent"), "--out", str(tmp_path / "o")]) == 1
    bad = tmp_path / "bad.poseq"
    bad.write_text("{not json\n")
    assert main(["convert", str(bad), "--mapping", "h36m-identity", "--out", str(tmp_path / "x.poseq")]) == 1
    assert main(["convert", str(bad), "--mapping", "nope", "--out", str(tmp_path / "x.poseq")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_convert(tmp_path, dataset):
    data2d, _ = dataset
    src = sorted(data2d.glob("*.poseq"))[0]
    out = tmp_path / "bm3d.poseq"
    assert main(["convert", str(src), "--mapping", "h36m-to-bm3d", "--out", str(out)]) == 0
    back = tmp_path / "h36m.poseq"
    assert main(["convert", str(out), "--mapping", "bm3d-to-h36m", "--out", str(back)]) == 0
    assert read_container(back).sequence == read_container(src).sequence


def test_corrupt_and_evaluate_p1(tmp_path, dataset):
    data2d, data3d = dataset
    out = tmp_path / "run"
    assert main(["corrupt", str(data2d), "--sigma", "0.01", "--sigma", "0.05", "--runs", "2", "--seed", "3",
                 "--jobs", "1", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["tasks"]) == 4 * (1 + 2 * 2)
    assert (out / "corrupted" / "p1" / "0.05" / "1").is_dir()
    assert main(["evaluate", "--gt", str(data3d), "--corrupted", str(out), "--model", "baseline:passthrough",
                 "--model", "baseline:gt", "--jobs", "1", "--out", str(out)]) == 0
    table = _rows(out / "reports" / "table_p1.csv")
    by = {(r["model"], r["sigma"], r["slice"]): r for r in table}
    assert float(by["baseline:gt", "0.05", "overall"]["mean_mm"]) == 0.0
    assert float(by["baseline:passthrough", "0.01", "visible"]["mean_mm"]) < 1e-3
    low = float(by["baseline:passthrough", "0.01", "occluded"]["mean_mm"])
    high = float(by["baseline:passthrough", "0.05", "occluded"]["mean_mm"])
    assert 0 < low < high
    assert by["baseline:passthrough", "0.05", "occluded"]["runs"] == "2"
    rm = json.loads((out / "reports" / "manifest.json").read_text())
    assert rm["unmatched"] == [] and "table_p1.csv" in rm["reports"]


def test_evaluate_p2(tmp_path, dataset):
    data2d, data3d = dataset
    out = tmp_path / "p2"
    assert main(["corrupt", str(data2d), "--protocol", "p2", "--runs", "2", "--joints", "LWrist",
                 "--jobs", "1", "--out", str(out)]) == 0
    assert main(["evaluate", "--gt", str(data3d), "--corrupted", str(out), "--model", "baseline:passthrough",
                 "--protocol", "p2", "--jobs", "1", "--out", str(out)]) == 0
    rows = _rows(out / "reports" / "perjoint_p2.csv")
    occ = [r for r in rows if r["sigma"] == "0.03" and r["slice"] == "occluded"]
    assert [r["joint"] for r in occ] == ["LWrist"]
    assert float(occ[0]["mean_mm"]) > 0
    vis = [r for r in rows if r["sigma"] == "0.03" and r["slice"] == "visible"]
    assert float(vis[0]["mean_mm"]) < 1e-3


def test_evaluate_reads_predictions(tmp_path, dataset):
    _, data3d = dataset
    pred_root = tmp_path / "preds" / "mymodel" / "p1" / "gt" / "0"
    pred_root.mkdir(parents=True)
    for p in data3d.glob("*.poseq"):
        (pred_root / p.name).write_bytes(p.read_bytes())
    out = tmp_path / "eval"
    assert main(["evaluate", "--gt", str(data3d), "--predictions", str(tmp_path / "preds"), "--jobs", "1",
                 "--out", str(out)]) == 0
    rows = _rows(out / "reports" / "table_p1.csv")
    assert {r["model"] for r in rows} == {"mymodel"}
    assert all(float(r["mean_mm"]) == 0 for r in rows if r["mean_mm"] != "ABSENT")


def test_analyze(tmp_path, dataset):
    data2d, data3d = dataset
    out = tmp_path / "an"
    assert main(["analyze", "occlusion-stats", str(data2d), "--out", str(out)]) == 0
    summary = _rows(out / "reports" / "occlusion_histogram.csv")
    assert sum(int(r["frames"]) for r in summary) == 4 * 250
    assert main(["analyze", "geometry", str(data2d), "--gt", str(data3d), "--model", "baseline:constpose",
                 "--out", str(out)]) == 0
    assert (out / "reports" / "heatmap_baseline_constpose.csv").exists()
    assert (out / "reports" / "heatmap_mean.csv").exists()
    assert main(["analyze", "velocity", str(data2d), "--gt", str(data3d), "--model", "baseline:constpose",
                 "--out", str(out)]) == 0
    assert (out / "reports" / "velocity_distribution.csv").exists()


def test_detector_stats(tmp_path, dataset):
    data2d, data3d = dataset
    det = tmp_path / "det" / "cocodet"
    det.mkdir(parents=True)
    for p in sorted(data2d.glob("*.poseq")):
        assert main(["convert", str(p), "--mapping", "h36m-to-coco", "--out", str(det / p.name)]) == 0
    out = tmp_path / "ds"
    assert main(["analyze", "detector-stats", str(data2d), "--detections", str(tmp_path / "det"), "--out", str(out)]) == 0
    rows = _rows(out / "reports" / "detector_stats.csv")
    assert [r["category"] for r in rows] == ["Visible", "SelfOccluded", "ExternallyOccluded"]
    assert all(float(r["cocodet_mean_px"]) == 0.0 for r in rows)

    wrong = tmp_path / "wrong" / "lifted"
    wrong.mkdir(parents=True)
    for p in sorted(data3d.glob("*.poseq")):
        (wrong / p.name).write_bytes(p.read_bytes())
    assert main(["analyze", "detector-stats", str(data2d), "--detections", str(tmp_path / "wrong"), "--out", str(out)]) == 1
