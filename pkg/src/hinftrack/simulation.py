"""Time-domain simulation of the leader and the followers under the protocol.

Time runs over k = 0..horizon.  The disturbance ``w(k)`` drives the step from
k to k+1, and the performance output is ``e(k) = (I (x) C) rho(k)``, so with
zero initial state ``e(0) = 0`` and ``e(k)`` depends on ``w(0..k-1)``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernel import DimensionError
from .plant import AugmentedSystem, ProtocolGain, protocol_step_batch, relative_information
from .topology import Adjacency, StochasticDecomposition

__all__ = [
    "DisturbanceSpec",
    "SimConfig",
    "Trajectories",
    "SimulationDivergence",
    "disturbance",
    "simulate",
    "tracking_error",
    "energy_curves",
    "write_csv",
    "predicted_decay_step",
    "first_step_below",
]


class SimulationDivergence(ArithmeticError):
    def __init__(self, message, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class DisturbanceSpec:
    """Disturbance applied to every follower.

    ``paper_sine`` is ``amplitude * sin(i * (k - 1))`` on ``0 <= k <= window_end``
    and zero afterwards, for follower label ``i`` (2..N), replicated over all
    disturbance channels.  ``table`` indexes ``table[k, i - 2, :]``.
    """

    kind: str = "none"
    amplitude: float = 25.0
    window_end: int = 200
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("none", "paper_sine", "table"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.window_end < 0:
            raise ValueError("window_end must be >= 0")
        if self.kind == "table":
            if self.table is None:
                raise ValueError("table disturbance needs a table")
            t = np.asarray(self.table, dtype=float)
            if t.ndim == 2:
                t = t[:, :, None]
            if t.ndim != 3:
                raise DimensionError("disturbance table must be (steps, followers[, channels])")
            object.__setattr__(self, "table", t)

    def scaled(self, c: float) -> "DisturbanceSpec":
        if self.kind == "table":
            return DisturbanceSpec("table", table=c * self.table)
        return DisturbanceSpec(self.kind, c * self.amplitude, self.window_end)


def disturbance(i: int, k: int, spec: DisturbanceSpec, m_w: int = 1) -> np.ndarray:
    """Disturbance of follower ``i`` (label 2..N) at step ``k``."""
    if i < 2:
        raise ValueError("disturbances apply to followers only (i >= 2)")
    if spec.kind == "none":
        return np.zeros(m_w)
    if spec.kind == "paper_sine":
        on = 1.0 if 0 <= k <= spec.window_end else 0.0
        return np.full(m_w, spec.amplitude * math.sin(i * (k - 1)) * on)
    t = spec.table
    if not (0 <= k < t.shape[0]) or not (0 <= i - 2 < t.shape[1]):
        raise IndexError(f"disturbance table has no entry for follower {i} at step {k}")
    row = t[k, i - 2]
    if row.shape[0] == 1 and m_w > 1:
        return np.full(m_w, row[0])
    if row.shape[0] != m_w:
        raise DimensionError(f"disturbance table has {row.shape[0]} channels, expected {m_w}")
    return row.copy()


@dataclass
class SimConfig:
    """Initial conditions, horizon and disturbance for one run.

    Any of ``theta0``/``x0`` left as ``None`` is drawn from a standard normal
    generator seeded with ``seed``; ``z0`` defaults to zero.
    """

    horizon: int
    theta0: np.ndarray | None = None
    x0: np.ndarray | None = None
    z0: np.ndarray | None = None
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    seed: int = 0

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ValueError("horizon must be >= 1")
        self.horizon = int(self.horizon)

    @classmethod
    def zero_initial(cls, horizon: int, aug: AugmentedSystem, n_followers: int,
                     disturbance: DisturbanceSpec | None = None) -> "SimConfig":
        return cls(horizon, np.zeros(aug.dim), np.zeros((n_followers, aug.m0)),
                   np.zeros((n_followers, max(aug.n - 1, 0), aug.m0)),
                   disturbance or DisturbanceSpec())

    def initial_state(self, aug: AugmentedSystem, n_followers: int):
        rng = np.random.default_rng(self.seed)
        theta0 = (rng.standard_normal(aug.dim) if self.theta0 is None
                  else np.asarray(self.theta0, dtype=float).reshape(aug.dim))
        x0 = (rng.standard_normal((n_followers, aug.m0)) if self.x0 is None
              else np.asarray(self.x0, dtype=float).reshape(n_followers, aug.m0))
        z0 = (np.zeros((n_followers, aug.n - 1, aug.m0)) if self.z0 is None
              else np.asarray(self.z0, dtype=float).reshape(n_followers, aug.n - 1, aug.m0))
        return theta0, x0, z0


@dataclass
class Trajectories:
    """Time series indexed by step k = 0..horizon (first axis)."""

    theta: np.ndarray  # (K+1, n*m0)
    zeta: np.ndarray   # (K+1, N-1, n*m0)
    e: np.ndarray      # (K+1, N-1, p)
    eps: np.ndarray    # (K+1, N-1, m_y)
    u: np.ndarray      # (K+1, N-1, m0)
    w: np.ndarray      # (K+1, N-1, m_w)
    n: int
    m0: int

    @property
    def rho(self) -> np.ndarray:
        return self.zeta - self.theta[:, None, :]

    @property
    def horizon(self) -> int:
        return self.theta.shape[0] - 1

    @property
    def zero_initial(self) -> bool:
        return not np.any(self.theta[0]) and not np.any(self.zeta[0])


def simulate(adj: Adjacency, dec: StochasticDecomposition, aug: AugmentedSystem, F,
             config: SimConfig) -> Trajectories:
    """Step the leader and every follower's controller and estimator jointly."""
    gain = F if isinstance(F, ProtocolGain) else ProtocolGain.for_system(F, aug)
    nf = adj.N - 1
    if dec.n_followers != nf:
        raise DimensionError("topology decomposition does not match the adjacency")
    n, m0, d = aug.n, aug.m0, aug.dim
    K = config.horizon
    A, Bw = aug.follower.A, aug.follower.B_w
    theta0, x0, z0 = config.initial_state(aug, nf)

    theta = np.empty((K + 1, d))
    zeta = np.empty((K + 1, nf, d))
    eps = np.empty((K + 1, nf, aug.m_y))
    u = np.empty((K + 1, nf, m0))
    w = np.empty((K + 1, nf, aug.m_w))

    th, x, z = theta0.copy(), x0.copy(), z0.copy()
    for k in range(K + 1):
        theta[k] = th
        zeta[k, :, :d - m0] = z.reshape(nf, -1)
        zeta[k, :, d - m0:] = x
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(zeta[k]))):
            raise SimulationDivergence(f"non-finite state at step {k}", k)
        eps[k] = relative_information(adj, dec, aug.sensing, x, th[d - m0:])
        for j in range(nf):
            w[k, j] = disturbance(j + 2, k, config.disturbance, aug.m_w)
        u[k], z_next = protocol_step_batch(aug, gain, x, z, eps[k])
        if k == K:
            break
        x = x @ A.T + u[k] + w[k] @ Bw.T
        z = z_next
        th = aug.A_hat @ th

    rho = zeta - theta[:, None, :]
    e = rho @ aug.C.T
    return Trajectories(theta, zeta, e, eps, u, w, n, m0)


def tracking_error(traj: Trajectories) -> np.ndarray:
    """E(k): sum over followers of the squared closed-loop tracking error."""
    r = traj.rho
    return np.einsum("kij,kij->k", r, r)


def energy_curves(traj: Trajectories, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Running sums of ||e(k)||^2 and gamma^2 ||w(k)||^2 over k = 0..T0."""
    if not traj.zero_initial:
        warnings.warn("energy comparison is only meaningful from zero initial conditions",
                      RuntimeWarning, stacklevel=2)
    ee = np.cumsum(np.einsum("kij,kij->k", traj.e, traj.e))
    ww = gamma**2 * np.cumsum(np.einsum("kij,kij->k", traj.w, traj.w))
    return ee, ww


def first_step_below(series: np.ndarray, threshold: float) -> int | None:
    """First k after which ``series`` stays below ``threshold`` for good."""
    above = np.flatnonzero(np.asarray(series) >= threshold)
    if above.size == 0:
        return 0
    k = int(above[-1]) + 1
    return k if k < len(series) else None


def predicted_decay_step(A_cl, E0: float, threshold: float = 1e-6) -> int:
    """Step count after which ``E(k) < threshold`` is guaranteed for ``rho+ = A_cl rho``.

    Uses ``||A^k|| <= cond(X) * r^k`` for a diagonalizable ``A = X L X^-1``
    with spectral radius ``r``, so ``E(k) <= cond(X)^2 r^(2k) E(0)``.
    """
    A = np.asarray(A_cl, dtype=float)
    lam, X = np.linalg.eig(A)
    r = float(np.max(np.abs(lam)))
    if r >= 1:
        raise ValueError("closed loop is not Schur stable")
    if E0 <= threshold:
        return 0
    kappa = np.linalg.cond(X)
    if not np.isfinite(kappa):
        raise np.linalg.LinAlgError("closed-loop matrix is defective; no modal bound")
    k = (math.log(threshold) - math.log(E0) - 2 * math.log(kappa)) / (2 * math.log(r))
    return max(0, math.ceil(k))


def _labels(traj: Trajectories) -> list[str]:
    n, m0 = traj.n, traj.m0
    nf = traj.zeta.shape[1]

    def blk(prefix, s, c):
        return f"{prefix}_{s}" if m0 == 1 else f"{prefix}_{s}_{c}"

    cols = ["k"]
    cols += [blk("theta", s, c) for s in range(1, n + 1) for c in range(1, m0 + 1)]
    for i in range(2, nf + 2):
        cols += [blk(f"zeta_{i}", s, c) for s in range(1, n + 1) for c in range(1, m0 + 1)]
    p = traj.e.shape[2]
    for i in range(2, nf + 2):
        cols += [f"e_{i}_{r}" for r in range(1, p + 1)]
    mw = traj.w.shape[2]
    for i in range(2, nf + 2):
        cols += [f"w_{i}_{r}" for r in range(1, mw + 1)]
    return cols + ["E", "energy_e", "energy_w"]


def write_csv(traj: Trajectories, path, gamma: float = 1.0) -> None:
    """One row per step, 17 significant digits."""
    E = tracking_error(traj)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ee, ww = energy_curves(traj, gamma)
    K = traj.horizon
    data = np.hstack([
        np.arange(K + 1)[:, None],
        traj.theta,
        traj.zeta.reshape(K + 1, -1),
        traj.e.reshape(K + 1, -1),
        traj.w.reshape(K + 1, -1),
        E[:, None], ee[:, None], ww[:, None],
    ])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(_labels(traj))
        for k, row in enumerate(data):
            wr.writerow([str(k)] + [f"{v:.17g}" for v in row[1:]])
