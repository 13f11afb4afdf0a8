import json

import pytest
from click.testing import CliRunner

from pyxcal.cli import cli
from pyxcal.util import content_hash


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A simulated dataset and the bundle calibrated from it."""
    root = tmp_path_factory.mktemp("cli")
    (root / "scene.json").write_text(json.dumps({"rig_count": 2, "board_count": 8, "seed": 21}))
    (root / "pipeline.json").write_text(json.dumps({"evaluation_board_count": 3}))
    runner = CliRunner()
    result = runner.invoke(cli, ["simulate", "-c", str(root / "scene.json"), "-o", str(root / "scene")])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli, ["calibrate", "-d", str(root / "scene"), "-o", str(root / "bundle.json"),
                                 "--config", str(root / "pipeline.json")])
    assert result.exit_code == 0, result.output
    return root


def test_simulate_writes_a_dataset(workspace):
    scene = workspace / "scene"
    for name in ("rigs.json", "vertices.csv", "config.json", "ground_truth.json"):
        assert (scene / name).is_file()
    assert list((scene / "ranges").glob("rig*_board*.csv"))


def test_calibrate_reports_every_rig(workspace):
    bundle = json.loads((workspace / "bundle.json").read_text())
    assert [r["id"] for r in bundle["rigs"]] == [0, 1]
    assert len(bundle["evaluation_boards"]) == 3
    assert bundle["input_hash"]


def test_calibrate_overrides(workspace, tmp_path):
    result = CliRunner().invoke(cli, ["calibrate", "-d", str(workspace / "scene"), "-o", str(tmp_path / "b.json"),
                                      "--config", str(workspace / "pipeline.json"), "--mode", "dlt-only",
                                      "--max-iters", "5", "--ransac-threshold-mm", "20"])
    assert result.exit_code == 0, result.output
    bundle = json.loads((tmp_path / "b.json").read_text())
    assert bundle["config"]["mode"] == "dlt-only"
    assert bundle["config"]["lm"]["max_iters"] == 5
    assert bundle["config"]["ransac"]["threshold_mm"] == 20.0
    assert "dlt-only" in result.output


def test_evaluate(workspace, tmp_path):
    result = CliRunner().invoke(cli, ["evaluate", "-d", str(workspace / "scene"), "-b", str(workspace / "bundle.json"),
                                      "-o", str(tmp_path / "reports"), "--pairs", "0:0,0:1"])
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "reports" / "summary.json").read_text())
    pairs = {(row["rig_i"], row["rig_j"]) for row in summary["summary"] if row["scope"] == "pair"}
    assert pairs == {(0, 0), (0, 1)}
    assert summary["config"]["pairs"] == ["0:0", "0:1"]
    assert "calibration" in result.output


def test_missing_range_file_is_named(workspace, tmp_path):
    import shutil
    scene = tmp_path / "scene"
    shutil.copytree(workspace / "scene", scene)
    victim = sorted((scene / "ranges").glob("*.csv"))[0]
    victim.unlink()
    result = CliRunner().invoke(cli, ["calibrate", "-d", str(scene), "-o", str(tmp_path / "b.json")])
    assert result.exit_code == 2
    assert victim.name in result.output


def test_bad_configuration(workspace, tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"mode": "joint", "colour": "red"}))
    result = CliRunner().invoke(cli, ["calibrate", "-d", str(workspace / "scene"), "-o", str(tmp_path / "b.json"),
                                      "--config", str(tmp_path / "bad.json")])
    assert result.exit_code == 2


def test_disconnected_network_exit_code(workspace, tmp_path):
    (tmp_path / "sparse.json").write_text(json.dumps({"evaluation_board_count": 3, "min_overlap_boards": 100}))
    result = CliRunner().invoke(cli, ["calibrate", "-d", str(workspace / "scene"), "-o", str(tmp_path / "b.json"),
                                      "--config", str(tmp_path / "sparse.json")])
    assert result.exit_code == 3
    assert "0:1" in result.output


def test_contamination_exit_code(workspace, tmp_path):
    bundle = json.loads((workspace / "bundle.json").read_text())
    (tmp_path / "leak.json").write_text(json.dumps({"evaluation_boards": bundle["fitting_boards"][:1]}))
    result = CliRunner().invoke(cli, ["evaluate", "-d", str(workspace / "scene"), "-b", str(workspace / "bundle.json"),
                                      "-o", str(tmp_path / "reports"), "--config", str(tmp_path / "leak.json")])
    assert result.exit_code == 4


def test_simulate_without_boards(tmp_path):
    (tmp_path / "empty.json").write_text(json.dumps({"rig_count": 2, "board_count": 0}))
    result = CliRunner().invoke(cli, ["simulate", "-c", str(tmp_path / "empty.json"), "-o", str(tmp_path / "scene")])
    assert result.exit_code == 2
    assert "no board" in result.output


def test_simulate_is_reproducible(workspace, tmp_path):
    runner = CliRunner()
    hashes = []
    for name, seed in (("a", "5"), ("b", "5"), ("c", "6")):
        result = runner.invoke(cli, ["simulate", "-c", str(workspace / "scene.json"), "-o", str(tmp_path / name),
                                     "--seed", seed])
        assert result.exit_code == 0, result.output
        hashes.append(content_hash(tmp_path / name))
    assert hashes[0] == hashes[1]
    assert hashes[0] != hashes[2]
