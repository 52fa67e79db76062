"""Communication graph checks and the scaled row-stochastic topology matrix.

Agents are numbered 1..N with agent 1 the leader; in code agent ``i`` lives at
row/column ``i - 1``.  Edge ``j -> i`` exists iff ``a[i, j] > 0`` (agent ``i``
receives information from ``j``).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .kernel import TOL, DimensionError, Tolerances, as_matrix, eig_sym

__all__ = [
    "Adjacency",
    "ValidationReport",
    "StochasticDecomposition",
    "FollowerSpectrum",
    "validate",
    "has_leader_spanning_tree",
    "build_stochastic",
    "follower_spectrum",
]


@dataclass(frozen=True)
class Adjacency:
    """Weighted adjacency matrix; row/column 0 is the leader."""

    a: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "adjacency")
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency: must be square, got {a.shape}")
        if a.shape[0] < 2:
            raise DimensionError("adjacency: need a leader and at least one follower")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def N(self) -> int:
        return self.a.shape[0]

    @property
    def leader_weights(self) -> np.ndarray:
        """Pinning gains c_i = a_{i1} for followers 2..N."""
        return self.a[1:, 0]


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    # 1-based agent index pairs, as in the adjacency notation
    asymmetric_pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(adj: Adjacency, tol: Tolerances = TOL) -> ValidationReport:
    """Check the structural assumptions on the graph.

    Violations are collected, not raised.  Checked: nonnegative weights, no
    self-loops, a leader with no in-neighbours, and symmetric weights between
    followers.
    """
    a = adj.a
    rep = ValidationReport()
    neg = np.argwhere(a < 0)
    for i, j in neg:
        rep.violations.append(f"negative weight a[{i + 1},{j + 1}] = {a[i, j]:g}")
    for i in np.flatnonzero(np.diag(a) != 0):
        rep.violations.append(f"self-loop a[{i + 1},{i + 1}] = {a[i, i]:g}")
    for j in np.flatnonzero(a[0] != 0):
        rep.violations.append(f"leader has neighbour: a[1,{j + 1}] = {a[0, j]:g}")
    f = a[1:, 1:]
    n = f.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if abs(f[i, j] - f[j, i]) > tol.weight_symmetry:
                pair = (i + 2, j + 2)
                rep.asymmetric_pairs.append(pair)
                rep.violations.append(
                    f"asymmetric follower weights a[{pair[0]},{pair[1]}] = {f[i, j]:g}"
                    f" != a[{pair[1]},{pair[0]}] = {f[j, i]:g}"
                )
    return rep


def has_leader_spanning_tree(adj: Adjacency) -> bool:
    """True iff every follower is reachable from the leader."""
    a = adj.a
    seen = {0}
    queue = deque([0])
    while queue:
        j = queue.popleft()
        # j -> i whenever a[i, j] > 0
        for i in np.flatnonzero(a[:, j] > 0):
            if i not in seen:
                seen.add(int(i))
                queue.append(int(i))
    return len(seen) == adj.N


@dataclass(frozen=True)
class StochasticDecomposition:
    """The row-stochastic matrix D = [[1, 0], [d, Dbreve]] and its ingredients."""

    h: float
    kappa0: float
    kappa: float
    delta: np.ndarray
    D: np.ndarray
    D_breve: np.ndarray
    d_breve: np.ndarray

    @property
    def n_followers(self) -> int:
        return self.D_breve.shape[0]


def build_stochastic(adj: Adjacency, h: float) -> StochasticDecomposition:
    """Scale the adjacency into the row-stochastic topology matrix.

    ``kappa0`` is the largest full row sum over followers (leader column
    included), ``kappa = kappa0 + h``, and each follower's slack
    ``delta_i = kappa0 - row_sum_i`` is put back on the diagonal so every row
    of ``D`` sums to one.
    """
    h = float(h)
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    a = adj.a
    row_sums = a[1:].sum(axis=1)
    kappa0 = float(row_sums.max())
    kappa = kappa0 + h
    delta = kappa0 - row_sums
    D_breve = a[1:, 1:] / kappa
    D_breve[np.diag_indices_from(D_breve)] = (h + delta) / kappa
    d_breve = a[1:, 0] / kappa
    N = adj.N
    D = np.zeros((N, N))
    D[0, 0] = 1.0
    D[1:, 0] = d_breve
    D[1:, 1:] = D_breve
    for arr in (delta, D, D_breve, d_breve):
        arr.setflags(write=False)
    return StochasticDecomposition(h, kappa0, kappa, delta, D, D_breve, d_breve)


@dataclass(frozen=True)
class FollowerSpectrum:
    eigenvalues: np.ndarray
    lambda0: float

    def __len__(self) -> int:
        return len(self.eigenvalues)


def follower_spectrum(dec: StochasticDecomposition, tol: Tolerances = TOL) -> FollowerSpectrum:
    Db = dec.D_breve
    if np.abs(Db - Db.T).max() > tol.symmetry:
        raise ValueError("follower block of D is not symmetric; follower links must be undirected")
    lam = eig_sym(Db, tol).eigenvalues
    return FollowerSpectrum(lam, float(np.max(np.abs(lam))))
