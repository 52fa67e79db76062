import subprocess
import sys

import numpy as np
import pytest
import yaml

from hinftrack.cli import (EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_VERIFY,
                           demo_config_path, main)
from hinftrack.config import load_yaml

DEMO = str(demo_config_path())


def _write(tmp_path, name, tree):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(tree))
    return str(p)


@pytest.fixture
def tree():
    return load_yaml(DEMO)


@pytest.fixture
def ref_gain(tmp_path):
    p = tmp_path / "ref.yaml"
    p.write_text("F: [[0.0003], [0.0551], [0.4660]]\n")
    return str(p)


class TestValidate:
    def test_demo(self, capsys, tmp_path):
        assert main(["validate", "--config", DEMO, "--out", str(tmp_path)]) == EXIT_OK
        assert "detectable: yes" in capsys.readouterr().out
        assert load_yaml(tmp_path / "validate.yaml")["passed"] is True

    def test_asymmetric(self, capsys, tmp_path, tree):
        tree["topology"]["adjacency"][1][2] = 2.5
        assert main(["validate", "--config", _write(tmp_path, "c.yaml", tree)]) == EXIT_VALIDATION
        assert "a[2,3]" in capsys.readouterr().out

    def test_disconnected(self, capsys, tmp_path, tree):
        adj = tree["topology"]["adjacency"]
        adj[3][0] = 0.0
        assert main(["validate", "--config", _write(tmp_path, "c.yaml", tree)]) == EXIT_VALIDATION
        assert "spanning tree: NO" in capsys.readouterr().out

    def test_missing_config(self, capsys):
        assert main(["validate"]) == EXIT_USAGE
        assert main(["validate", "--config", "/nonexistent.yaml"]) == EXIT_USAGE


class TestSpectrum:
    def test_demo(self, capsys, tmp_path):
        assert main(["spectrum", "--config", DEMO, "--out", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "lambda0 = 0.857794806" in out
        data = load_yaml(tmp_path / "spectrum.yaml")["spectrum"]
        assert data["kappa"] == pytest.approx(3.6)
        # the machine-readable section of stdout parses too
        assert yaml.safe_load(out.split("---\n", 1)[1])["spectrum"]["lambda0"] == data["lambda0"]

    def test_single_follower(self, capsys, tmp_path, tree):
        tree["topology"]["adjacency"] = [[0.0, 0.0], [1.0, 0.0]]
        tree["topology"]["h"] = 1.0
        assert main(["spectrum", "--config", _write(tmp_path, "c.yaml", tree)]) == EXIT_OK
        assert "eigenvalues = [0.5]" in capsys.readouterr().out

    def test_zero_h(self, capsys, tmp_path, tree):
        tree["topology"]["h"] = 0.0
        assert main(["spectrum", "--config", _write(tmp_path, "c.yaml", tree)]) == EXIT_USAGE
        assert "topology.h" in capsys.readouterr().err


class TestSynthesizeVerify:
    def test_round_trip(self, capsys, tmp_path):
        assert main(["synthesize", "--config", DEMO, "--out", str(tmp_path), "--eps", "0.25"]) == EXIT_OK
        cert = tmp_path / "certificate.yaml"
        data = load_yaml(cert)
        assert data["certification"]["passed"] is True
        assert data["certificate"]["eps"] == 0.25
        assert main(["verify", "--config", DEMO, "--gain", str(cert), "--out", str(tmp_path)]) == EXIT_OK
        rep = load_yaml(tmp_path / "verify.yaml")
        assert rep["decoupled"]["passed"] and rep["coupled"]["passed"]

    def test_infeasible(self, capsys, tmp_path, tree):
        tree["solver"]["max_iter"] = 200
        tree["solver"]["restarts"] = 0
        cfg = _write(tmp_path, "c.yaml", tree)
        code = main(["synthesize", "--config", cfg, "--out", str(tmp_path), "--gamma", "1e-9"])
        assert code == EXIT_INFEASIBLE

    def test_bad_eps(self, capsys, tmp_path):
        assert main(["synthesize", "--config", DEMO, "--out", str(tmp_path), "--eps", "x"]) == EXIT_USAGE

    def test_reference_gain(self, capsys, ref_gain):
        assert main(["verify", "--config", DEMO, "--gain", ref_gain]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("hinf=") == 5

    def test_zero_gain(self, capsys, tmp_path):
        p = tmp_path / "z.yaml"
        p.write_text("F: [[0.0], [0.0], [0.0]]\n")
        assert main(["verify", "--config", DEMO, "--gain", str(p)]) == EXIT_VERIFY

    def test_large_gain_reports_all_norms(self, capsys, tmp_path):
        p = tmp_path / "big.yaml"
        p.write_text("F: [[0.3], [55.1], [466.0]]\n")
        code = main(["verify", "--config", DEMO, "--gain", str(p)])
        assert code in (EXIT_OK, EXIT_VERIFY)
        assert capsys.readouterr().out.count("system ") == 5

    def test_gain_dimension_mismatch(self, capsys, tmp_path):
        p = tmp_path / "g.yaml"
        p.write_text("F: [[0.1], [0.2]]\n")
        assert main(["verify", "--config", DEMO, "--gain", str(p)]) == EXIT_USAGE


class TestSimulate:
    def test_undisturbed(self, capsys, tmp_path, ref_gain):
        code = main(["simulate", "--config", DEMO, "--gain", ref_gain, "--out", str(tmp_path),
                     "--horizon", "2000", "--disturbance", "none", "--seed", "0"])
        assert code == EXIT_OK
        assert "first_step_below_1e-6: 1569" in capsys.readouterr().out
        assert (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "trajectory_tracking_error.svg").exists()

    def test_energy(self, capsys, tmp_path, ref_gain):
        code = main(["simulate", "--config", DEMO, "--gain", ref_gain, "--out", str(tmp_path),
                     "--disturbance", "paper", "--initial", "zero"])
        assert code == EXIT_OK
        assert "energy_inequality: True" in capsys.readouterr().out
        assert (tmp_path / "trajectory_energy.svg").exists()

    def test_table_file(self, capsys, tmp_path, ref_gain):
        table = tmp_path / "w.yaml"
        table.write_text(yaml.safe_dump({"table": np.ones((11, 4)).tolist()}))
        code = main(["simulate", "--config", DEMO, "--gain", ref_gain, "--out", str(tmp_path),
                     "--horizon", "10", "--disturbance", str(table), "--initial", "zero"])
        assert code == EXIT_OK

    def test_horizon_zero(self, capsys, tmp_path, ref_gain):
        code = main(["simulate", "--config", DEMO, "--gain", ref_gain, "--out", str(tmp_path),
                     "--horizon", "0"])
        assert code == EXIT_USAGE

    def test_unverified_gain_warns(self, capsys, tmp_path):
        p = tmp_path / "z.yaml"
        p.write_text("F: [[0.0], [0.0], [0.0]]\n")
        code = main(["simulate", "--config", DEMO, "--gain", str(p), "--out", str(tmp_path),
                     "--horizon", "5"])
        assert code == EXIT_OK
        assert "warning" in capsys.readouterr().err


def test_unknown_command():
    assert main(["bogus"]) == EXIT_USAGE


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "hinftrack.cli", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "synthesize" in res.stdout
