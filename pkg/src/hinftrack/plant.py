"""Leader, follower and protocol models, and the error-dynamics systems they induce.

Closed-loop follower state ordering is ``zeta_i = (z_i^1, ..., z_i^{n-1}, x_i)``:
the estimator blocks first, the physical state last, matching the leader's
block partition ``Theta = (theta_1, ..., theta_n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import DimensionError, as_matrix, kron
from .topology import Adjacency, FollowerSpectrum, StochasticDecomposition

__all__ = [
    "LeaderModel",
    "FollowerModel",
    "SensingModel",
    "AugmentedSystem",
    "ProtocolGain",
    "StateSpace",
    "build_augmented",
    "protocol_step",
    "protocol_step_batch",
    "relative_information",
    "decoupled_systems",
    "coupled_error_system",
]


def _frozen(M: np.ndarray) -> np.ndarray:
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class LeaderModel:
    """Leader with ``n`` blocks of size ``m0``; only the last block is sensed."""

    A_hat: np.ndarray
    n: int
    m0: int

    def __post_init__(self):
        A = as_matrix(self.A_hat, "leader.A_hat")
        n, m0 = int(self.n), int(self.m0)
        if n < 1 or m0 < 1:
            raise DimensionError("leader: n and m0 must be positive")
        if A.shape != (n * m0, n * m0):
            raise DimensionError(f"leader.A_hat: expected {n * m0}x{n * m0}, got {A.shape}")
        object.__setattr__(self, "A_hat", _frozen(A))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m0", m0)

    @property
    def dim(self) -> int:
        return self.n * self.m0

    @property
    def C_hat(self) -> np.ndarray:
        C = np.zeros((self.m0, self.dim))
        C[:, -self.m0:] = np.eye(self.m0)
        return C

    def block(self, s: int, j: int) -> np.ndarray:
        """Block (s, j) of ``A_hat``, 1-based."""
        m = self.m0
        return self.A_hat[(s - 1) * m:s * m, (j - 1) * m:j * m]


@dataclass(frozen=True)
class FollowerModel:
    A: np.ndarray
    B_w: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "follower.A")
        B = as_matrix(self.B_w, "follower.B_w")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"follower.A: must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"follower.B_w: expected {A.shape[0]} rows, got {B.shape[0]}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B_w", _frozen(B))

    @property
    def m_w(self) -> int:
        return self.B_w.shape[1]


@dataclass(frozen=True)
class SensingModel:
    E: np.ndarray

    def __post_init__(self):
        E = as_matrix(self.E, "sensing.E")
        if E.shape[0] > E.shape[1]:
            raise DimensionError(f"sensing.E: needs m_y <= m0, got {E.shape}")
        object.__setattr__(self, "E", _frozen(E))

    @property
    def m_y(self) -> int:
        return self.E.shape[0]


@dataclass(frozen=True)
class AugmentedSystem:
    """Leader, follower and sensing data plus the derived block matrices."""

    leader: LeaderModel
    follower: FollowerModel
    sensing: SensingModel
    C: np.ndarray
    C_tilde: np.ndarray
    B_w_hat: np.ndarray
    A_check: np.ndarray

    @property
    def A_hat(self) -> np.ndarray:
        return self.leader.A_hat

    @property
    def n(self) -> int:
        return self.leader.n

    @property
    def m0(self) -> int:
        return self.leader.m0

    @property
    def dim(self) -> int:
        return self.leader.dim

    @property
    def m_y(self) -> int:
        return self.sensing.m_y

    @property
    def m_w(self) -> int:
        return self.follower.m_w


def build_augmented(leader: LeaderModel, follower: FollowerModel,
                    sensing: SensingModel, C) -> AugmentedSystem:
    m0, n = leader.m0, leader.n
    if follower.A.shape[0] != m0:
        raise DimensionError(f"follower.A: expected {m0}x{m0} to match leader block size, "
                             f"got {follower.A.shape}")
    if sensing.E.shape[1] != m0:
        raise DimensionError(f"sensing.E: expected {m0} columns, got {sensing.E.shape[1]}")
    C = as_matrix(C, "performance.C")
    if C.shape[1] != n * m0:
        raise DimensionError(f"performance.C: expected {n * m0} columns, got {C.shape[1]}")
    C_tilde = np.zeros((sensing.m_y, n * m0))
    C_tilde[:, -m0:] = sensing.E
    B_w_hat = np.zeros((n * m0, follower.m_w))
    B_w_hat[-m0:] = follower.B_w
    A_check = leader.block(n, n) - follower.A
    return AugmentedSystem(leader, follower, sensing, _frozen(C), _frozen(C_tilde),
                           _frozen(B_w_hat), _frozen(A_check))


@dataclass(frozen=True)
class ProtocolGain:
    """Stacked observer/controller gain F = (F_1; ...; F_n)."""

    F: np.ndarray
    n: int
    m0: int

    def __post_init__(self):
        F = as_matrix(self.F, "gain.F")
        if F.shape[0] != self.n * self.m0:
            raise DimensionError(f"gain.F: expected {self.n * self.m0} rows, got {F.shape[0]}")
        object.__setattr__(self, "F", _frozen(F))

    @classmethod
    def for_system(cls, F, aug: AugmentedSystem) -> "ProtocolGain":
        gain = cls(F, aug.n, aug.m0)
        if gain.F.shape[1] != aug.m_y:
            raise DimensionError(f"gain.F: expected {aug.m_y} columns, got {gain.F.shape[1]}")
        return gain

    def block(self, s: int) -> np.ndarray:
        """F_s, 1-based."""
        return self.F[(s - 1) * self.m0:s * self.m0]


@dataclass(frozen=True)
class StateSpace:
    """Discrete-time system ``x+ = A x + B w``, ``e = C x``.

    ``output_advance`` marks systems whose output is defined one step ahead,
    ``e(k+1) = C x(k+1)``.  The transfer matrix then carries an extra factor
    ``z``, which has unit modulus on the unit circle, so frequency-domain
    analysis ignores the flag.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    output_advance: bool = True

    def __post_init__(self):
        A, B, C = (as_matrix(M, name) for M, name in ((self.A, "A"), (self.B, "B"), (self.C, "C")))
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0] or C.shape[1] != A.shape[0]:
            raise DimensionError(f"state space: nonconformable A{A.shape} B{B.shape} C{C.shape}")
        for name, M in (("A", A), ("B", B), ("C", C)):
            object.__setattr__(self, name, _frozen(M))

    @property
    def nstates(self) -> int:
        return self.A.shape[0]


def _gain(aug: AugmentedSystem, F) -> ProtocolGain:
    return F if isinstance(F, ProtocolGain) else ProtocolGain.for_system(F, aug)


def protocol_step(aug: AugmentedSystem, F, x_i, z_i, eps_i):
    """One step of a follower's local controller and distributed estimator.

    Parameters
    ----------
    x_i : array (m0,)
        Follower state.
    z_i : array (n-1, m0)
        Estimator blocks ``z_i^1 .. z_i^{n-1}``.
    eps_i : array (m_y,)
        Relative output information.

    Returns
    -------
    u_i : array (m0,)
    z_next : array (n-1, m0)
    """
    n, m0 = aug.n, aug.m0
    u, z_next = protocol_step_batch(
        aug, F,
        np.asarray(x_i, dtype=float).reshape(1, m0),
        np.asarray(z_i, dtype=float).reshape(1, n - 1, m0),
        np.asarray(eps_i, dtype=float).reshape(1, aug.m_y))
    return u[0], z_next[0]


def protocol_step_batch(aug: AugmentedSystem, F, x, z, eps):
    """:func:`protocol_step` for many followers at once (leading axis)."""
    gain = _gain(aug, F)
    L = aug.leader
    n = L.n
    u = x @ aug.A_check.T - eps @ gain.block(n).T
    for j in range(1, n):
        u = u + z[:, j - 1] @ L.block(n, j).T
    z_next = np.empty_like(z)
    for s in range(1, n):
        acc = x @ L.block(s, n).T - eps @ gain.block(s).T
        for j in range(1, n):
            acc = acc + z[:, j - 1] @ L.block(s, j).T
        z_next[:, s - 1] = acc
    return u, z_next


def relative_information(adj: Adjacency, dec: StochasticDecomposition,
                         sensing: SensingModel, x, theta_n) -> np.ndarray:
    """Scaled relative outputs for every follower.

    ``x`` has one row per follower (agents 2..N); the result has one row of
    length ``m_y`` per follower.
    """
    a = adj.a
    x = np.asarray(x, dtype=float)
    theta_n = np.asarray(theta_n, dtype=float).ravel()
    nf = adj.N - 1
    if x.ndim == 1:
        x = x.reshape(nf, -1)
    if x.shape[0] != nf:
        raise DimensionError(f"relative_information: expected {nf} follower states, got {x.shape[0]}")
    af = a[1:, 1:]
    c = a[1:, 0]
    # sum_j a_ij (x_i - x_j) + c_i (x_i - theta_n)
    diff = (af.sum(axis=1) + c)[:, None] * x - af @ x - c[:, None] * theta_n[None, :]
    return diff @ sensing.E.T / dec.kappa


def decoupled_systems(aug: AugmentedSystem, F, spec: FollowerSpectrum) -> list[StateSpace]:
    gain = _gain(aug, F)
    FC = gain.F @ aug.C_tilde
    return [StateSpace(aug.A_hat - (1.0 - lam) * FC, aug.B_w_hat, aug.C)
            for lam in spec.eigenvalues]


def coupled_error_system(aug: AugmentedSystem, F, dec: StochasticDecomposition) -> StateSpace:
    gain = _gain(aug, F)
    nf = dec.n_followers
    I = np.eye(nf)
    A = kron(I, aug.A_hat) - kron(I - dec.D_breve, gain.F @ aug.C_tilde)
    return StateSpace(A, kron(I, aug.B_w_hat), kron(I, aug.C))
