import json

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from hinftrack.cli import demo_config_path
from hinftrack.config import (ConfigError, dump_yaml, load_config, load_yaml, parse_config,
                              read_certificate, read_gain, write_certificate)
from hinftrack.synthesis import SolverOptions, lmi_margins, solve_feasibility


@pytest.fixture
def tree():
    return load_yaml(demo_config_path())


class TestParse:
    def test_demo(self, demo_cfg):
        assert demo_cfg.h == 0.2 and demo_cfg.gamma == 1.0
        assert demo_cfg.solver.fixed_eps == 0.25
        assert demo_cfg.simulation.disturbance.kind == "paper_sine"
        assert demo_cfg.n_followers == 4
        np.testing.assert_array_equal(demo_cfg.reference_gain, [[0.0003], [0.0551], [0.4660]])

    def test_json_subset(self, tree, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(tree))
        cfg = load_config(p)
        np.testing.assert_array_equal(cfg.leader.A_hat, load_config(demo_config_path()).leader.A_hat)

    def test_blocks(self, tree):
        A = tree["leader"].pop("A_hat")
        tree["leader"]["A_hat_blocks"] = [[[[v]] for v in row] for row in A]
        np.testing.assert_array_equal(parse_config(tree).leader.A_hat, A)

    @pytest.mark.parametrize("path, value, field", [
        (("topology", "h"), 0.0, "topology.h"),
        (("topology", "h"), "abc", "topology.h"),
        (("performance", "gamma"), -1, "performance.gamma"),
        (("performance", "C"), [[1.0, 0.0]], "performance.C"),
        (("sensing", "E"), [[1.0], [1.0]], "sensing.E"),
        (("follower", "A"), [[1.0, 0.0]], "follower.A"),
        (("leader", "n"), 2, "leader.A_hat"),
        (("simulation", "horizon"), 0, "simulation.horizon"),
        (("solver", "eps"), -1.0, "solver"),
        (("reference_gain",), [[1.0]], "reference_gain"),
        (("topology", "adjacency"), [[0, 1], [1, 0], [0, 0]], "topology.adjacency"),
    ])
    def test_field_errors(self, tree, path, value, field):
        node = tree
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = value
        with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
            parse_config(tree)

    def test_missing_field(self, tree):
        del tree["sensing"]
        with pytest.raises(ConfigError, match="sensing.E: missing"):
            parse_config(tree)

    def test_unreadable(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")
        bad = tmp_path / "bad.yaml"
        bad.write_text("a: [1, 2\n")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_eps_free_and_disturbance_alias(self, tree):
        tree["solver"]["eps"] = "free"
        tree["simulation"]["disturbance"] = "paper"
        cfg = parse_config(tree)
        assert cfg.solver.fixed_eps is None
        assert cfg.simulation.disturbance.kind == "paper_sine"


class TestYaml:
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), max_size=20))
    def test_float_round_trip(self, values):
        back = yaml.safe_load(dump_yaml({"v": values}))["v"]
        assert back == values
        assert all(isinstance(b, float) for b in back)

    def test_array(self):
        A = np.array([[1.0, 2.5e-300], [3.0, -0.1]])
        np.testing.assert_array_equal(yaml.safe_load(dump_yaml({"A": A}))["A"], A)


class TestCertificateFile:
    def test_round_trip_margins(self, tmp_path, demo_aug, demo_spec):
        cert = solve_feasibility(demo_aug, 1.0, demo_spec.lambda0, SolverOptions(fixed_eps=0.25))
        path = tmp_path / "cert.yaml"
        write_certificate(cert, path)
        back = read_certificate(path, demo_aug)
        np.testing.assert_array_equal(back.variables.P, cert.variables.P)
        np.testing.assert_array_equal(back.F, cert.F)
        again = lmi_margins(back.variables, back.gamma, back.lambda0, demo_aug)
        np.testing.assert_allclose(again, cert.margins, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(read_gain(path), cert.F)

    def test_gain_forms(self, tmp_path):
        a = tmp_path / "a.yaml"
        a.write_text("F: [[1.0], [2.0]]\n")
        b = tmp_path / "b.yaml"
        b.write_text("[[1.0], [2.0]]\n")
        np.testing.assert_array_equal(read_gain(a), read_gain(b))
        c = tmp_path / "c.yaml"
        c.write_text("G: 1\n")
        with pytest.raises(ConfigError):
            read_gain(c)
