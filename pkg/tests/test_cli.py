import csv
import json
import math

import numpy as np
import pytest

from kerrssh import __version__
from kerrssh.cli import apply_overrides, run
from kerrssh.errors import ConfigError
from kerrssh.model import save_config
from kerrssh.presets import PRESETS

from conftest import chain


@pytest.fixture
def preset(tmp_path):
    def make(name, config=None):
        path = tmp_path / f"{name}.json"
        save_config(config if config is not None else PRESETS[name](), path)
        return path
    return make


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_steady_undriven(preset, tmp_path):
    cfg = preset("quiet", chain(kerr_u=-1.0))
    assert run(["steady", str(cfg), "--out", str(tmp_path / "o")]) == 0
    data = json.loads((tmp_path / "o" / "steady_state.json").read_text())
    assert data["x"] == 0.0 and data["stable"]


def test_steady_branches_differ(preset, tmp_path):
    cfg = preset("bistable")
    for branch in ("low", "high"):
        assert run(["steady", str(cfg), "--seed-branch", branch,
                    "--out", str(tmp_path / branch)]) == 0
    low = json.loads((tmp_path / "low" / "steady_state.json").read_text())
    high = json.loads((tmp_path / "high" / "steady_state.json").read_text())
    assert high["x"] > 10 * low["x"]
    roots = read_csv(tmp_path / "low" / "cubic_roots.csv")
    assert [r["tag"] for r in roots] == ["candidate-stable", "unstable", "candidate-stable"]


def test_manifest(preset, tmp_path):
    cfg = preset("monostable")
    out = tmp_path / "o"
    assert run(["steady", str(cfg), "--set", "drive_amp=0.5", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "steady"
    assert manifest["overrides"] == ["drive_amp=0.5"]
    assert manifest["resolved_config"]["drive_amp"] == [0.5, 0.5]
    assert manifest["version"] == __version__
    assert "steady_state.json" in manifest["files"]


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run(["steady", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_usage_errors(preset, tmp_path):
    cfg = str(preset("monostable"))
    assert run(["steady"]) == 2
    assert run(["steady", cfg, "--set", "nonsense"]) == 2
    assert run(["steady", cfg, "--set", "n_b=5", "--out", str(tmp_path / "o")]) == 2
    assert run(["transmission", cfg, "--dp-from", "0", "--dp-to", "1", "--dp-steps", "1",
                "--out", str(tmp_path / "t")]) == 2


def test_numerical_failure_exit_code(preset, tmp_path, capsys):
    # on the upper branch 4|U|x exceeds the detuning, so squeezing is undefined
    code = run(["topology", str(preset("bistable")), "--seed-branch", "high",
                "--out", str(tmp_path / "o")])
    assert code == 1
    assert "InstabilityBoundaryError" in capsys.readouterr().err


def test_overrides():
    data = {"omega_a": [1, 2, 3], "g": 1.0}
    out = apply_overrides(data, ["omega_a.1=5", "g=2", "g=3", "omega_a=0.5"])
    assert out == {"omega_a": 0.5, "g": 3}
    assert apply_overrides(data, ["omega_a.-1=9"])["omega_a"] == [1, 2, 9]
    with pytest.raises(ConfigError):
        apply_overrides(data, ["omega_a.7=1"])


def test_sweep_linear_branches_identical(preset, tmp_path):
    cfg = preset("linear", chain(drive_amp=0.0))
    out = tmp_path / "o"
    assert run(["sweep", str(cfg), "--from", "0", "--to", "2", "--steps", "11",
                "--out", str(out)]) == 0
    fwd = read_csv(out / "sweep_forward.csv")
    bwd = read_csv(out / "sweep_backward.csv")[::-1]
    assert [r["x"] for r in fwd] == [r["x"] for r in bwd]
    assert not any(r["jump_flag"] == "1" for r in fwd + bwd)
    summary = json.loads((out / "hysteresis.json").read_text())
    assert summary["forward_jumps"] == [] and summary["bistable_window"] is None


def test_sweep_power_hysteresis(preset, tmp_path):
    out = tmp_path / "o"
    assert run(["sweep", str(preset("topological")), "--control", "power", "--from", "0",
                "--to", "0.16", "--steps", "41", "--out", str(out)]) == 0
    fwd = read_csv(out / "sweep_forward.csv")
    bwd = read_csv(out / "sweep_backward.csv")
    jf = [i for i, r in enumerate(fwd) if r["jump_flag"] == "1"]
    jb = [i for i, r in enumerate(bwd) if r["jump_flag"] == "1"]
    assert len(jf) == 1 and len(jb) == 1 and jf != jb
    eig = read_csv(out / "eigenvalues_vs_control.csv")
    assert len(eig) == 2 * 41 * 13


def test_deterministic_outputs(preset, tmp_path):
    cfg = str(preset("monostable"))
    for tag in ("a", "b"):
        assert run(["sweep", cfg, "--from", "0.1", "--to", "1", "--steps", "7",
                    "--out", str(tmp_path / tag)]) == 0
    for name in ("sweep_forward.csv", "sweep_backward.csv", "eigenvalues_vs_control.csv",
                 "hysteresis.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_topology_r_sweep_transition(preset, tmp_path):
    out = tmp_path / "o"
    assert run(["topology", str(preset("dispersive")), "--r-from", "0.6", "--r-to", "0.8",
                "--r-steps", "20", "--force", "--out", str(out)]) == 0
    data = json.loads((out / "ssh_model.json").read_text())
    (tr,) = data["transitions"]
    grid = np.linspace(0.6, 0.8, 20)
    assert grid[tr["index"] - 1] < math.log(2) < grid[tr["index"]]
    assert (tr["nu_before"], tr["nu_after"]) == (0, 1)
    rows = read_csv(out / "spectrum.csv")
    first = [r for r in rows if float(r["r"]) == grid[0]]
    assert sum(r["source"] == "reduced" for r in first) == 13
    assert sum(r["source"] == "effective" for r in first) == 6


def test_topology_state(preset, tmp_path):
    out = tmp_path / "o"
    assert run(["topology", str(preset("topological")), "--out", str(out)]) == 0
    data = json.loads((out / "ssh_model.json").read_text())
    assert data["nu"] == 1 and len(data["zero_modes"]) == 2
    prof = read_csv(out / "edge_profile.csv")
    assert len(prof) == 13
    assert sum(float(r["psi_sq_state1"]) for r in prof) == pytest.approx(1.0)


def test_topology_trivial(preset, tmp_path):
    out = tmp_path / "o"
    assert run(["topology", str(preset("undriven")), "--force", "--out", str(out)]) == 0
    data = json.loads((out / "ssh_model.json").read_text())
    assert data["nu"] == 0 and data["zero_modes"] == []


@pytest.mark.parametrize("name, expected", [("topological", 2), ("undriven", 0)])
def test_transmission_in_gap_peaks(preset, tmp_path, name, expected):
    out = tmp_path / "o"
    assert run(["transmission", str(preset(name)), "--dp-from", "49.5", "--dp-to", "50.2",
                "--dp-steps", "4000", "--out", str(out)]) == 0
    peaks = json.loads((out / "peaks.json").read_text())
    assert sum(p["in_gap"] for p in peaks) == expected
    assert len(read_csv(out / "transmission.csv")) == 4000
