"""Stability, H-infinity norms, detectability and tracking-condition checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .kernel import TOL, ConvergenceError, Tolerances, as_matrix, eig_general, spectral_radius
from .plant import AugmentedSystem, StateSpace, coupled_error_system, decoupled_systems
from .topology import FollowerSpectrum, StochasticDecomposition

__all__ = [
    "UnstableSystemError",
    "HinfResult",
    "SystemCheck",
    "VerificationReport",
    "is_schur",
    "frequency_response_peak",
    "hinf_norm",
    "verify_theorem1",
    "verify_definition1",
    "pbh_detectable",
]

DEFAULT_GRID = 4096


class UnstableSystemError(ValueError):
    """The H-infinity norm was requested for a system that is not Schur stable."""


def is_schur(M, margin: float = TOL.schur_margin) -> tuple[bool, float]:
    r = spectral_radius(M)
    return r < 1.0 - margin, r


@dataclass(frozen=True)
class HinfResult:
    """Outcome of a norm computation.

    ``norm`` is the largest singular value actually attained at
    ``peak_frequency``; ``certified_bounds[1]`` is a level at which the
    unit-circle test proved there is no crossing.
    """

    norm: float
    peak_frequency: float
    method: str
    certified_bounds: tuple[float, float]

    @property
    def lower(self) -> float:
        return self.certified_bounds[0]

    @property
    def upper(self) -> float:
        return self.certified_bounds[1]


def _sigma(ss: StateSpace, thetas: np.ndarray, max_condition: float) -> np.ndarray:
    """Largest singular value of C (zI - A)^-1 B at z = exp(j*theta).

    The resolvent's condition number is checked at the few frequencies with
    the largest response, which is where near-unit-circle poles show up.
    """
    n = ss.nstates
    thetas = np.asarray(thetas, dtype=float)
    z = np.exp(1j * thetas)
    M = z[:, None, None] * np.eye(n) - ss.A[None, :, :]
    X = np.linalg.solve(M, np.broadcast_to(ss.B.astype(complex), (len(z),) + ss.B.shape))
    G = ss.C[None, :, :] @ X
    s = np.linalg.svd(G, compute_uv=False)[:, 0]
    top = np.argsort(s)[-8:] if np.all(np.isfinite(s)) else np.arange(len(s))
    cond = np.linalg.cond(M[top])
    bad = ~np.isfinite(cond) | (cond > max_condition)
    if np.any(bad):
        k = top[np.flatnonzero(bad)[0]]
        raise np.linalg.LinAlgError(
            f"resolvent ill-conditioned (cond {np.linalg.cond(M[k]):.3e}) "
            f"at frequency {thetas[k]:.6g} rad")
    return s


def frequency_response_peak(ss: StateSpace, n_grid: int = DEFAULT_GRID,
                            tol: Tolerances = TOL) -> tuple[float, float]:
    """Peak of the largest singular value over an evenly spaced grid on [0, pi].

    This is a lower bound on the H-infinity norm.
    """
    thetas = np.linspace(0.0, np.pi, n_grid)
    s = _sigma(ss, thetas, tol.max_condition)
    k = int(np.argmax(s))
    return float(s[k]), float(thetas[k])


def _crossing_angles(ss: StateSpace, gamma: float, circle_tol: float = 1e-6) -> np.ndarray:
    """Angles in [0, pi] where sigma_max(G) may equal ``gamma``.

    These are the unit-circle eigenvalues of the pencil
    ``[[A, B B^T / gamma^2], [0, I]] - z [[I, 0], [C^T C, A^T]]``.
    """
    A, B, C = ss.A, ss.B, ss.C
    n = A.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    L = np.block([[A, B @ B.T / gamma**2], [Z, I]])
    M = np.block([[I, Z], [C.T @ C, A.T]])
    w = sla.eigvals(L, M, check_finite=False)
    w = w[np.isfinite(w)]
    on = np.abs(np.abs(w) - 1.0) < circle_tol
    return np.unique(np.abs(np.angle(w[on])))


def hinf_norm(ss: StateSpace, tol: float = TOL.hinf, n_grid: int = DEFAULT_GRID,
              tolerances: Tolerances = TOL) -> HinfResult:
    """H-infinity norm of a stable discrete-time system.

    A dense frequency grid locates the peak and gives a lower bound.  The
    bound is then bracketed and bisected using the unit-circle eigenvalue
    test on the symplectic pencil; crossings reported by the test are
    confirmed by evaluating the frequency response at the crossing angles
    (and midpoints between them), which also raises the lower bound.
    Bisection stops once ``upper - lower <= tol * max(1, lower)``.

    Raises
    ------
    UnstableSystemError
        If the state matrix is not Schur stable.
    numpy.linalg.LinAlgError
        If the resolvent is numerically singular somewhere on the grid.
    """
    stable, r = is_schur(ss.A, tolerances.schur_margin)
    if not stable:
        raise UnstableSystemError(f"state matrix is not Schur stable (spectral radius {r:.12g})")
    if not np.any(ss.B) or not np.any(ss.C):
        return HinfResult(0.0, 0.0, "grid", (0.0, 0.0))

    lo, w_lo = frequency_response_peak(ss, n_grid, tolerances)

    def gap(lo_, hi_):
        return hi_ - lo_ <= tol * max(1.0, lo_)

    def probe(level):
        """Return the best confirmed (sigma, angle) above ``level``, or None."""
        angles = _crossing_angles(ss, level)
        if angles.size == 0:
            return None
        pts = np.concatenate([angles, 0.5 * (angles[1:] + angles[:-1])])
        s = _sigma(ss, pts, tolerances.max_condition)
        k = int(np.argmax(s))
        # sigma at a crossing angle is accurate to rounding, so a tight slack
        # keeps near-tangent false crossings from stalling the bracket
        if s[k] >= level * (1.0 - 1e-12):
            return float(s[k]), float(pts[k])
        return None

    hi = 2.0 * lo + 1.0
    for _ in range(200):
        hit = probe(hi)
        if hit is None:
            break
        lo, w_lo = max((lo, w_lo), hit)
        hi = 2.0 * hi
    else:
        raise np.linalg.LinAlgError("could not bracket the H-infinity norm")

    method = "grid"
    for it in range(200):
        if gap(lo, hi):
            break
        method = "bisection"
        # alternate plain halving with a probe just above the attained peak,
        # which usually closes the bracket at once
        if it % 2 == 0:
            mid = min(0.5 * (lo + hi), lo + 0.5 * tol * max(1.0, lo))
        else:
            mid = 0.5 * (lo + hi)
        hit = probe(mid)
        if hit is None:
            hi = mid
        else:
            lo, w_lo = max((lo, w_lo), hit)
    if not gap(lo, hi):
        raise ConvergenceError(f"H-infinity bisection stalled with bracket [{lo!r}, {hi!r}]")
    return HinfResult(lo, w_lo, method, (lo, hi))


@dataclass
class SystemCheck:
    index: int
    spectral_radius: float
    schur: bool
    hinf: HinfResult | None = None
    eigenvalue: float | None = None

    @property
    def norm(self) -> float:
        return self.hinf.norm if self.hinf is not None else math.inf

    @property
    def norm_upper(self) -> float:
        return self.hinf.upper if self.hinf is not None else math.inf


@dataclass
class VerificationReport:
    """Per-system stability and norm data for one tracking check.

    ``passed`` requires every system to be Schur stable with a certified
    upper norm bound below ``gamma``.  ``margin`` is ``gamma`` minus the
    largest upper bound.
    """

    kind: str
    gamma: float
    systems: list[SystemCheck] = field(default_factory=list)
    decoupled_max_norm: float | None = None
    crosscheck_rel_diff: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def max_norm(self) -> float:
        return max((s.norm for s in self.systems), default=0.0)

    @property
    def margin(self) -> float:
        return self.gamma - max((s.norm_upper for s in self.systems), default=0.0)

    @property
    def passed(self) -> bool:
        return all(s.schur for s in self.systems) and self.margin > 0

    @property
    def consistent(self) -> bool:
        return self.crosscheck_rel_diff is None or self.crosscheck_rel_diff <= 1e-6

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "gamma": self.gamma,
            "passed": self.passed,
            "margin": self.margin,
            "max_norm": self.max_norm,
            "systems": [
                {
                    "index": s.index,
                    **({"eigenvalue": s.eigenvalue} if s.eigenvalue is not None else {}),
                    "spectral_radius": s.spectral_radius,
                    "schur": s.schur,
                    "hinf_norm": s.norm if s.hinf is not None else None,
                    "hinf_bounds": list(s.hinf.certified_bounds) if s.hinf is not None else None,
                    "peak_frequency": s.hinf.peak_frequency if s.hinf is not None else None,
                }
                for s in self.systems
            ],
            **({"decoupled_max_norm": self.decoupled_max_norm}
               if self.decoupled_max_norm is not None else {}),
            **({"crosscheck_rel_diff": self.crosscheck_rel_diff}
               if self.crosscheck_rel_diff is not None else {}),
            "notes": list(self.notes),
        }


def _check(ss: StateSpace, index: int, tol: float, eigenvalue=None) -> SystemCheck:
    schur, r = is_schur(ss.A)
    hinf = hinf_norm(ss, tol) if schur else None
    return SystemCheck(index, r, schur, hinf, eigenvalue)


def verify_theorem1(aug: AugmentedSystem, F, spec: FollowerSpectrum, gamma: float,
                    tol: float = TOL.hinf) -> VerificationReport:
    """Check every per-eigenvalue decoupled system for stability and norm < gamma."""
    rep = VerificationReport("decoupled", float(gamma))
    for i, (lam, ss) in enumerate(zip(spec.eigenvalues, decoupled_systems(aug, F, spec))):
        rep.systems.append(_check(ss, i + 1, tol, float(lam)))
    return rep


def verify_definition1(aug: AugmentedSystem, F, dec: StochasticDecomposition, gamma: float,
                       tol: float = TOL.hinf,
                       spec: FollowerSpectrum | None = None) -> VerificationReport:
    """Check the coupled error dynamics directly.

    Consensus of the undisturbed network is checked as Schur stability of the
    coupled error matrix.  When the follower spectrum is supplied, the
    coupled norm is compared against the largest decoupled norm.
    """
    rep = VerificationReport("coupled", float(gamma))
    rep.systems.append(_check(coupled_error_system(aug, F, dec), 1, tol))
    if spec is not None:
        dec_rep = verify_theorem1(aug, F, spec, gamma, tol)
        if all(s.schur for s in dec_rep.systems) and rep.systems[0].schur:
            m = dec_rep.max_norm
            c = rep.systems[0].norm
            rep.decoupled_max_norm = m
            rep.crosscheck_rel_diff = abs(c - m) / (1.0 + c)
            if not rep.consistent:
                rep.notes.append("coupled norm disagrees with the largest decoupled norm")
        elif all(s.schur for s in dec_rep.systems) != rep.systems[0].schur:
            rep.crosscheck_rel_diff = math.inf
            rep.notes.append("coupled and decoupled stability verdicts disagree")
    return rep


def pbh_detectable(A_hat, C_tilde, tol: Tolerances = TOL, unit_tol: float = 1e-6) -> bool:
    """PBH test: every eigenvalue of modulus >= 1 must be observable.

    Eigenvalues within ``unit_tol`` of the unit circle are treated as
    marginal, since repeated eigenvalues on the circle are computed with
    O(sqrt(eps)) error.
    """
    A = as_matrix(A_hat, "A_hat")
    C = as_matrix(C_tilde, "C_tilde")
    n = A.shape[0]
    for lam in eig_general(A).eigenvalues:
        if abs(lam) < 1.0 - unit_tol:
            continue
        s = sla.svdvals(np.vstack([lam * np.eye(n) - A, C.astype(complex)]))
        if s[-1] < tol.pbh_rank * s[0] or s[0] == 0:
            return False
    return True
