"""Project configuration files, certificates and reports.

Files are YAML; since YAML is a superset of JSON, machine-generated JSON is
accepted as is.  Matrices are nested lists written row by row.  A scalar is
accepted wherever a 1x1 matrix is expected and a flat list is read as a
column vector.

Layout::

    topology:
      h: 0.2
      adjacency: [[0, 0], [1, 0]]
    leader:
      n: 1
      m0: 1
      A_hat: [[0.5]]          # or A_hat_blocks: [[[[0.5]]]]
    follower: {A: [[0.0]], B_w: [[1.0]]}
    sensing: {E: [[1.0]]}
    performance: {C: [[1.0]], gamma: 1.0}
    solver: {eps: 0.25, margin: 1.0e-6, max_iter: 3000, restarts: 3, seed: 0}
    simulation:
      horizon: 400
      seed: 0
      initial: random          # random | zero | explicit (theta0/x0/z0 keys)
      disturbance: {kind: paper_sine, amplitude: 25, window_end: 200}
    reference_gain: [[0.1]]     # optional
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .kernel import DimensionError
from .plant import (AugmentedSystem, FollowerModel, LeaderModel, ProtocolGain, SensingModel,
                    build_augmented)
from .simulation import DisturbanceSpec, SimConfig
from .synthesis import LmiVariables, SolverOptions, SynthesisCertificate
from .topology import Adjacency

__all__ = [
    "ConfigError",
    "SimulationSettings",
    "ProjectConfig",
    "load_config",
    "parse_config",
    "dump_yaml",
    "load_yaml",
    "certificate_to_dict",
    "write_certificate",
    "read_gain",
    "read_certificate",
]


class ConfigError(ValueError):
    """A configuration value is missing or malformed; the message names the field."""


@dataclass
class SimulationSettings:
    horizon: int = 400
    seed: int = 0
    initial: str = "random"
    theta0: np.ndarray | None = None
    x0: np.ndarray | None = None
    z0: np.ndarray | None = None
    disturbance: DisturbanceSpec = field(default_factory=lambda: DisturbanceSpec("paper_sine"))

    def sim_config(self, aug: AugmentedSystem, n_followers: int, *, horizon: int | None = None,
                   seed: int | None = None, disturbance: DisturbanceSpec | None = None,
                   initial: str | None = None) -> SimConfig:
        horizon = self.horizon if horizon is None else horizon
        dist = self.disturbance if disturbance is None else disturbance
        initial = initial or self.initial
        if initial == "zero":
            return SimConfig.zero_initial(horizon, aug, n_followers, dist)
        return SimConfig(horizon, self.theta0, self.x0, self.z0, dist,
                         self.seed if seed is None else seed)


@dataclass
class ProjectConfig:
    adjacency: Adjacency
    h: float
    leader: LeaderModel
    follower: FollowerModel
    sensing: SensingModel
    C: np.ndarray
    gamma: float
    solver: SolverOptions
    simulation: SimulationSettings
    reference_gain: np.ndarray | None = None
    source: Path | None = None

    @property
    def n_followers(self) -> int:
        return self.adjacency.N - 1

    def augmented(self) -> AugmentedSystem:
        try:
            return build_augmented(self.leader, self.follower, self.sensing, self.C)
        except DimensionError as exc:
            raise ConfigError(str(exc)) from None


def _get(tree: dict, path: str, default=...):
    node = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is ...:
                raise ConfigError(f"{path}: missing")
            return default
        node = node[part]
    return node


def _matrix(value, path: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: not a numeric matrix") from None
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(-1, 1)
    elif M.ndim != 2:
        raise ConfigError(f"{path}: expected a matrix, got a {M.ndim}-D array")
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"{path}: non-finite entries")
    return M


def _float(value, path: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: not a number") from None
    if not math.isfinite(v):
        raise ConfigError(f"{path}: not finite")
    return v


def _int(value, path: str) -> int:
    v = _float(value, path)
    if v != int(v):
        raise ConfigError(f"{path}: not an integer")
    return int(v)


def _wrap(path, fn, *args):
    try:
        return fn(*args)
    except (DimensionError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def _leader(tree) -> LeaderModel:
    n = _int(_get(tree, "leader.n"), "leader.n")
    m0 = _int(_get(tree, "leader.m0"), "leader.m0")
    full = _get(tree, "leader.A_hat", None)
    blocks = _get(tree, "leader.A_hat_blocks", None)
    if (full is None) == (blocks is None):
        raise ConfigError("leader: give exactly one of A_hat or A_hat_blocks")
    if full is not None:
        A = _matrix(full, "leader.A_hat")
    else:
        if len(blocks) != n or any(len(row) != n for row in blocks):
            raise ConfigError(f"leader.A_hat_blocks: expected {n}x{n} blocks")
        A = np.block([[_matrix(b, f"leader.A_hat_blocks[{s}][{j}]") for j, b in enumerate(row)]
                      for s, row in enumerate(blocks)])
    return _wrap("leader.A_hat", LeaderModel, A, n, m0)


def _disturbance(node, path: str) -> DisturbanceSpec:
    if node is None:
        return DisturbanceSpec("none")
    if isinstance(node, str):
        node = {"kind": node}
    kind = node.get("kind", "none")
    if kind == "paper":
        kind = "paper_sine"
    table = node.get("table")
    return _wrap(path, DisturbanceSpec, kind,
                 _float(node.get("amplitude", 25.0), f"{path}.amplitude"),
                 _int(node.get("window_end", 200), f"{path}.window_end"),
                 None if table is None else np.array(table, dtype=float))


def _simulation(tree) -> SimulationSettings:
    node = _get(tree, "simulation", {}) or {}
    s = SimulationSettings(
        horizon=_int(node.get("horizon", 400), "simulation.horizon"),
        seed=_int(node.get("seed", 0), "simulation.seed"),
        initial=str(node.get("initial", "random")),
        disturbance=_disturbance(node.get("disturbance", "paper_sine"), "simulation.disturbance"),
    )
    if s.horizon < 1:
        raise ConfigError("simulation.horizon: must be >= 1")
    if s.initial not in ("random", "zero", "explicit"):
        raise ConfigError("simulation.initial: must be random, zero or explicit")
    for key in ("theta0", "x0", "z0"):
        if key in node:
            setattr(s, key, np.array(node[key], dtype=float))
    return s


def _solver(tree) -> SolverOptions:
    node = _get(tree, "solver", {}) or {}
    eps = node.get("eps", "free")
    kw = dict(
        fixed_eps=None if eps in (None, "free") else _float(eps, "solver.eps"),
        margin=_float(node.get("margin", 1e-6), "solver.margin"),
        max_iter=_int(node.get("max_iter", 3000), "solver.max_iter"),
        restarts=_int(node.get("restarts", 3), "solver.restarts"),
        seed=_int(node.get("seed", 0), "solver.seed"),
        method=str(node.get("method", "bfgs")),
    )
    return _wrap("solver", lambda: SolverOptions(**kw))


def parse_config(tree: dict, source: Path | None = None) -> ProjectConfig:
    """Build and cross-check a :class:`ProjectConfig` from a parsed tree."""
    if not isinstance(tree, dict):
        raise ConfigError("config: top level must be a mapping")
    adj = _wrap("topology.adjacency", Adjacency,
                _matrix(_get(tree, "topology.adjacency"), "topology.adjacency"))
    h = _float(_get(tree, "topology.h"), "topology.h")
    if h <= 0:
        raise ConfigError("topology.h: must be positive")
    leader = _leader(tree)
    follower = _wrap("follower", FollowerModel,
                     _matrix(_get(tree, "follower.A"), "follower.A"),
                     _matrix(_get(tree, "follower.B_w"), "follower.B_w"))
    sensing = _wrap("sensing.E", SensingModel, _matrix(_get(tree, "sensing.E"), "sensing.E"))
    C = _matrix(_get(tree, "performance.C"), "performance.C")
    gamma = _float(_get(tree, "performance.gamma"), "performance.gamma")
    if gamma <= 0:
        raise ConfigError("performance.gamma: must be positive")
    ref = _get(tree, "reference_gain", None)
    cfg = ProjectConfig(adj, h, leader, follower, sensing, C, gamma, _solver(tree),
                        _simulation(tree),
                        None if ref is None else _matrix(ref, "reference_gain"), source)
    aug = cfg.augmented()
    if cfg.reference_gain is not None and cfg.reference_gain.shape != (aug.dim, aug.m_y):
        raise ConfigError(f"reference_gain: expected {aug.dim}x{aug.m_y}, "
                          f"got {cfg.reference_gain.shape}")
    return cfg


def load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON ({exc})") from None


def load_config(path) -> ProjectConfig:
    path = Path(path)
    return parse_config(load_yaml(path), path)


class _Dumper(yaml.SafeDumper):
    pass


def _float_repr(dumper, value: float):
    if math.isnan(value):
        text = ".nan"
    elif math.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = f"{value:.17g}"
        # YAML 1.1 floats need a dot in the mantissa
        if "." not in text:
            text = text.replace("e", ".0e") if "e" in text else text + ".0"
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


def _ndarray_repr(dumper, value: np.ndarray):
    return dumper.represent_list(value.tolist())


_Dumper.add_representer(float, _float_repr)
_Dumper.add_representer(np.float64, lambda d, v: _float_repr(d, float(v)))
_Dumper.add_representer(np.ndarray, _ndarray_repr)
_Dumper.add_representer(np.bool_, lambda d, v: d.represent_bool(bool(v)))
_Dumper.add_representer(np.int64, lambda d, v: d.represent_int(int(v)))
_Dumper.add_representer(tuple, lambda d, v: d.represent_list(list(v)))


def dump_yaml(data, path=None) -> str:
    """Serialize with full float precision; nested numeric lists stay on one line each."""
    text = yaml.dump(data, Dumper=_Dumper, sort_keys=False, default_flow_style=None, width=1 << 16)
    if path is not None:
        Path(path).write_text(text)
    return text


def certificate_to_dict(cert: SynthesisCertificate) -> dict:
    v = cert.variables
    return {
        "certificate": {
            "gamma": cert.gamma,
            "lambda0": cert.lambda0,
            "eps": v.eps,
            "P": v.P,
            "V": v.V,
            "F": cert.F,
            "margins": {"lmi1": cert.margins[0], "lmi2": cert.margins[1], "P": cert.margins[2]},
            "phi": cert.phi,
            "iterations": cert.iterations,
            "restart": cert.restart,
            "method": cert.method,
        }
    }


def write_certificate(cert: SynthesisCertificate, path) -> None:
    dump_yaml(certificate_to_dict(cert), path)


def read_certificate(path, aug: AugmentedSystem) -> SynthesisCertificate:
    tree = load_yaml(path)
    node = tree.get("certificate") if isinstance(tree, dict) else None
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: no certificate section")
    v = LmiVariables(_matrix(node.get("P"), "certificate.P"),
                     _matrix(node.get("V"), "certificate.V"),
                     _float(node.get("eps"), "certificate.eps"))
    F = _matrix(node.get("F"), "certificate.F")
    gain = _wrap("certificate.F", ProtocolGain.for_system, F, aug)
    m = node.get("margins", {})
    return SynthesisCertificate(
        v, gain, _float(node.get("gamma"), "certificate.gamma"),
        _float(node.get("lambda0"), "certificate.lambda0"),
        (float(m.get("lmi1", math.nan)), float(m.get("lmi2", math.nan)), float(m.get("P", math.nan))),
        float(node.get("phi", math.nan)), int(node.get("iterations", 0)),
        int(node.get("restart", 0)), str(node.get("method", "")))


def read_gain(path) -> np.ndarray:
    """Gain matrix from a certificate file or a bare ``F:`` file."""
    tree = load_yaml(path)
    if isinstance(tree, dict) and isinstance(tree.get("certificate"), dict):
        tree = tree["certificate"]
    if isinstance(tree, dict) and "F" in tree:
        return _matrix(tree["F"], "F")
    if isinstance(tree, list):
        return _matrix(tree, "F")
    raise ConfigError(f"{path}: no gain F found")
