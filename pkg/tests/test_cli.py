import json
import subprocess
import sys

import pytest

from fiberlab.cli import main

CAMPAIGN = {
    "bench": {"n_fiber_modes": 128, "slm_grid": 16},
    "configurations": [[2, 4]],
    "circuits_per_config": 2,
    "de": {"segments": 4, "generations": 2, "population": 8},
    "stability": {"steps": 4, "sigma": 0.05, "every": 2},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "campaign.json"
    path.write_text(json.dumps(CAMPAIGN))
    return path


def run(*args):
    return main([str(a) for a in args])


def outputs(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("command,files", [
    (["bench", "build"], ["device.json"]),
    (["calibrate"], ["estimated_tm.json"]),
    (["synthesize"], ["measured_circuit.json"]),
    (["campaign"], ["circuits.csv", "report.json"]),
    (["stability"], ["stability.csv", "stability.json"]),
])
def test_subcommands_deterministic(tmp_path, config, command, files):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*command, "--config", config, "--seed", 7, "--out", a) == 0
    assert run(*command, "--config", config, "--seed", 7, "--out", b) == 0
    assert sorted(outputs(a)) == files
    assert outputs(a) == outputs(b)


def test_seed_changes_output(tmp_path, config):
    run("campaign", "--config", config, "--seed", 1, "--out", tmp_path / "a")
    run("campaign", "--config", config, "--seed", 2, "--out", tmp_path / "b")
    assert outputs(tmp_path / "a") != outputs(tmp_path / "b")


def test_report_subcommand(tmp_path, config):
    run("campaign", "--config", config, "--out", tmp_path)
    assert run("report", "--config", tmp_path / "report.json", "--out", tmp_path) == 0
    rows = json.loads((tmp_path / "loss_report.json").read_text())["loss_report"]
    assert rows[0]["difference_db"] == pytest.approx(0.4576, abs=1e-4)
    assert (tmp_path / "loss_report.csv").read_text().startswith("n,m,loss_db")


def test_synthesize_explicit_target(tmp_path):
    cfg = dict(CAMPAIGN, target={"rows": 1, "cols": 2, "re": [[1, 1]], "im": [[0, 0]]})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert run("synthesize", "--config", path, "--out", tmp_path) == 0
    out = json.loads((tmp_path / "measured_circuit.json").read_text())
    assert out["summary"]["fidelity_corrected"] > 0.9


def test_ground_truth_export(tmp_path, config, caplog):
    run("bench", "build", "--config", config, "--out", tmp_path / "hidden")
    assert "ground_truth" not in json.loads((tmp_path / "hidden" / "device.json").read_text())
    with caplog.at_level("WARNING"), pytest.warns(UserWarning, match="ground-truth"):
        run("bench", "build", "--config", config, "--out", tmp_path / "open", "--expose-ground-truth")
    assert "ground_truth" in json.loads((tmp_path / "open" / "device.json").read_text())
    assert any("ground-truth" in r.message or "ground truth" in r.message for r in caplog.records)


@pytest.mark.parametrize("args,code", [
    (["campaign", "--out", "x"], "usage"),
    (["campaign", "--config", "cfg", "--frobnicate"], "usage"),
    (["teleport", "--config", "cfg"], "usage"),
    (["campaign", "--config", "/nonexistent.json"], "invalid-config"),
])
def test_errors_exit_2(tmp_path, config, capsys, args, code):
    args = [str(config) if a == "cfg" else a for a in args]
    assert main(args) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == code and err["message"]


def test_invalid_config_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(dict(CAMPAIGN, configurations=[[8, 38]])))
    assert main(["campaign", "--config", str(path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "invalid-config"


def test_module_entry_point(tmp_path, config):
    proc = subprocess.run([sys.executable, "-m", "fiberlab", "calibrate", "--config", str(config),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "estimated_tm.json").exists()
