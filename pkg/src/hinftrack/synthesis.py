"""LMI-based synthesis of the protocol gain.

The two matrix inequalities are affine in the decision variables (P, V, eps).
Feasibility is sought by minimizing the nonsmooth merit function

    phi = max(lambda_max(LMI_1), -lambda_min(LMI_2), mu - lambda_min(P), mu - eps)

whose subgradients come from extremal eigenvectors pushed through the affine
operator.  ``phi < -mu`` means every inequality holds with margin ``mu``.
A failed search is reported as :class:`SynthesisInfeasible`, which means "not
found", never "proved infeasible".
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .analysis import VerificationReport, pbh_detectable, verify_definition1, verify_theorem1
from .kernel import TOL, DimensionError, as_matrix, solve_linear
from .plant import AugmentedSystem, ProtocolGain
from .topology import FollowerSpectrum, StochasticDecomposition

__all__ = [
    "LmiVariables",
    "SolverOptions",
    "SynthesisCertificate",
    "SynthesisInfeasible",
    "SynthesisBreakdown",
    "CertificationReport",
    "assemble_lmi12",
    "assemble_lmi13",
    "lmi_margins",
    "solve_feasibility",
    "compute_gain",
    "certify",
    "bisect_gamma",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LmiVariables:
    P: np.ndarray
    V: np.ndarray
    eps: float

    def __post_init__(self):
        P = as_matrix(self.P, "P")
        object.__setattr__(self, "P", 0.5 * (P + P.T))
        object.__setattr__(self, "V", as_matrix(self.V, "V"))
        object.__setattr__(self, "eps", float(self.eps))


@dataclass
class SolverOptions:
    """Knobs for :func:`solve_feasibility`.

    ``margin`` is the strictness margin mu.  The search keeps going until
    ``phi <= -aim`` (a comfortably interior point) or the iteration budget
    runs out; it succeeds if ``phi < -margin`` at that point.
    """

    max_iter: int = 3000
    margin: float = TOL.lmi_margin
    aim: float = 1e-3
    method: str = "bfgs"
    restarts: int = 3
    seed: int = 0
    fixed_eps: float | None = None
    perturbation: float = 0.5
    stall_window: int = 300
    polyak_overshoot: float = 1e-2

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.method not in ("bfgs", "polyak"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.fixed_eps is not None and self.fixed_eps <= 0:
            raise ValueError("fixed eps must be positive")


@dataclass(frozen=True)
class SynthesisCertificate:
    variables: LmiVariables
    gain: ProtocolGain
    gamma: float
    lambda0: float
    margins: tuple[float, float, float]
    phi: float
    iterations: int
    restart: int
    method: str

    @property
    def F(self) -> np.ndarray:
        return self.gain.F


class SynthesisInfeasible(RuntimeError):
    def __init__(self, message, best_phi: float, best: LmiVariables | None = None):
        super().__init__(message)
        self.best_phi = best_phi
        self.best = best


class SynthesisBreakdown(ArithmeticError):
    def __init__(self, message, best_phi: float):
        super().__init__(message)
        self.best_phi = best_phi


def _check_dims(P, V, aug: AugmentedSystem):
    d = aug.dim
    if P.shape != (d, d):
        raise DimensionError(f"P: expected {d}x{d}, got {P.shape}")
    if V.shape != (d, aug.m_y):
        raise DimensionError(f"V: expected {d}x{aug.m_y}, got {V.shape}")


def _lmi12_constant(gamma: float, aug: AugmentedSystem) -> np.ndarray:
    d, mw, my = aug.dim, aug.m_w, aug.m_y
    M = np.zeros((2 * d + mw + my,) * 2)
    M[d:2 * d, d:2 * d] = (aug.C.T @ aug.C) / gamma**2
    M[2 * d:2 * d + mw, 2 * d:2 * d + mw] = -np.eye(mw)
    return M


def _lmi12_linear(vars: LmiVariables, lambda0: float, aug: AugmentedSystem) -> np.ndarray:
    P, V, eps = vars.P, vars.V, vars.eps
    _check_dims(P, V, aug)
    A, Ct, Bw = aug.A_hat, aug.C_tilde, aug.B_w_hat
    d, mw, my = aug.dim, aug.m_w, aug.m_y
    M = np.zeros((2 * d + mw + my,) * 2)
    i1, i2, i3 = d, 2 * d, 2 * d + mw
    M[:i1, :i1] = -P
    M[:i1, i1:i2] = P @ A - V @ Ct
    M[:i1, i2:i3] = P @ Bw
    M[:i1, i3:] = V
    M[i1:i2, i1:i2] = -P + eps * lambda0**2 * (Ct.T @ Ct)
    M[i3:, i3:] = -eps * np.eye(my)
    upper = np.triu(M, 1)
    return np.diag(np.diag(M)) + upper + upper.T


def assemble_lmi12(vars: LmiVariables, gamma: float, lambda0: float,
                   aug: AugmentedSystem) -> np.ndarray:
    """The first (negative-definite) matrix inequality, fully assembled.

    Block layout, with d = n*m0::

        [ -P        P A - V Ct   P Bw   V     ]
        [  *        Q            0      0     ]
        [  *        *           -I      0     ]
        [  *        *            *     -eps I ]

    where ``Q = -P + C^T C / gamma^2 + eps * lambda0^2 * Ct^T Ct``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return _lmi12_linear(vars, lambda0, aug) + _lmi12_constant(gamma, aug)


def _lmi13_constant(aug: AugmentedSystem) -> np.ndarray:
    p, d = aug.C.shape
    M = np.zeros((p + d, p + d))
    M[:p, :p] = np.eye(p)
    M[:p, p:] = aug.C
    M[p:, :p] = aug.C.T
    return M


def _lmi13_linear(vars: LmiVariables, gamma: float, aug: AugmentedSystem) -> np.ndarray:
    P = vars.P
    if P.shape != (aug.dim, aug.dim):
        raise DimensionError(f"P: expected {aug.dim}x{aug.dim}, got {P.shape}")
    p = aug.C.shape[0]
    M = np.zeros((p + aug.dim,) * 2)
    M[p:, p:] = gamma**2 * P
    return M


def assemble_lmi13(vars: LmiVariables, gamma: float, aug: AugmentedSystem) -> np.ndarray:
    """``[[I, C], [C^T, gamma^2 P]]``, required positive definite."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return _lmi13_constant(aug) + _lmi13_linear(vars, gamma, aug)


def lmi_margins(vars: LmiVariables, gamma: float, lambda0: float,
                aug: AugmentedSystem) -> tuple[float, float, float]:
    """(min eig of -LMI_1, min eig of LMI_2, min eig of P); all > 0 means feasible."""
    m12 = -np.linalg.eigvalsh(assemble_lmi12(vars, gamma, lambda0, aug))[-1]
    m13 = np.linalg.eigvalsh(assemble_lmi13(vars, gamma, aug))[0]
    mP = np.linalg.eigvalsh(vars.P)[0]
    return float(m12), float(m13), float(mP)


class _MeritFunction:
    """phi and one subgradient over a flat decision vector.

    The vector holds the upper triangle of P (row-major), then V row-major,
    then eps unless it is fixed.
    """

    def __init__(self, aug: AugmentedSystem, gamma: float, lambda0: float,
                 mu: float, fixed_eps: float | None):
        self.aug, self.gamma, self.lambda0, self.mu = aug, gamma, lambda0, mu
        self.fixed_eps = fixed_eps
        d, my = aug.dim, aug.m_y
        self.iu = np.triu_indices(d)
        self.nP = len(self.iu[0])
        self.nV = d * my
        self.size = self.nP + self.nV + (0 if fixed_eps is not None else 1)

        # a fixed eps belongs to the constant term, not the basis
        fixed = LmiVariables(np.zeros((d, d)), np.zeros((d, my)), fixed_eps or 0.0)
        self.M12_0 = _lmi12_constant(gamma, aug) + _lmi12_linear(fixed, lambda0, aug)
        self.M13_0 = _lmi13_constant(aug)
        basis12, basis13, basisP = [], [], []
        for k in range(self.size):
            e = np.zeros(self.size)
            e[k] = 1.0
            v = self.unpack(e)
            if fixed_eps is not None:
                v = LmiVariables(v.P, v.V, 0.0)
            basis12.append(_lmi12_linear(v, lambda0, aug))
            basis13.append(_lmi13_linear(v, gamma, aug))
            basisP.append(v.P)
        self.B12 = np.array(basis12)
        self.B13 = np.array(basis13)
        self.BP = np.array(basisP)

    def unpack(self, x: np.ndarray) -> LmiVariables:
        d, my = self.aug.dim, self.aug.m_y
        P = np.zeros((d, d))
        P[self.iu] = x[:self.nP]
        P = P + np.triu(P, 1).T
        V = x[self.nP:self.nP + self.nV].reshape(d, my)
        eps = self.fixed_eps if self.fixed_eps is not None else x[-1]
        return LmiVariables(P, V, eps)

    def pack(self, vars: LmiVariables) -> np.ndarray:
        parts = [vars.P[self.iu], vars.V.ravel()]
        if self.fixed_eps is None:
            parts.append([vars.eps])
        return np.concatenate(parts)

    @staticmethod
    def _extreme(M0, B, x, largest: bool):
        M = M0 + np.tensordot(x, B, axes=1)
        w, Q = np.linalg.eigh(0.5 * (M + M.T))
        k = -1 if largest else 0
        q = Q[:, k]
        return w[k], np.einsum("kij,i,j->k", B, q, q)

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        terms = []
        f, g = self._extreme(self.M12_0, self.B12, x, True)
        terms.append((f, g))
        f, g = self._extreme(self.M13_0, self.B13, x, False)
        terms.append((-f, -g))
        f, g = self._extreme(np.zeros_like(self.BP[0]), self.BP, x, False)
        terms.append((self.mu - f, -g))
        if self.fixed_eps is None:
            g = np.zeros(self.size)
            g[-1] = -1.0
            terms.append((self.mu - x[-1], g))
        f, g = max(terms, key=lambda t: t[0])
        return float(f), g


class _Stall:
    """Counts iterations since the best value last improved by a relative 1e-6."""

    def __init__(self, f0: float, window: int):
        self.ref = f0
        self.count = 0

    def update(self, best_f: float) -> int:
        if best_f < self.ref - 1e-6 * max(1.0, abs(self.ref)):
            self.ref, self.count = best_f, 0
        else:
            self.count += 1
        return self.count


def _polyak(phi, x, opts: SolverOptions):
    fx, g = phi(x)
    best_f, best_x, since = fx, x.copy(), 0
    stall = _Stall(best_f, opts.stall_window)
    it = 0
    for it in range(1, opts.max_iter + 1):
        if best_f <= -opts.aim or since > opts.stall_window:
            break
        gg = g @ g
        if not np.isfinite(fx) or gg == 0:
            break
        target = min(best_f, 0.0) - opts.polyak_overshoot
        x = x - (fx - target) / gg * g
        fx, g = phi(x)
        if fx < best_f:
            best_f, best_x = fx, x.copy()
        since = stall.update(best_f)
    return best_f, best_x, it


def _bfgs(phi, x, opts: SolverOptions):
    """Quasi-Newton descent on a nonsmooth function with a weak Wolfe line search."""
    n = len(x)
    H = np.eye(n)
    fx, g = phi(x)
    best_f, best_x, since = fx, x.copy(), 0
    stall = _Stall(best_f, opts.stall_window)
    it = 0
    for it in range(1, opts.max_iter + 1):
        if best_f <= -opts.aim or since > opts.stall_window or not np.isfinite(fx):
            break
        d = -H @ g
        slope = g @ d
        if slope >= 0:
            H = np.eye(n)
            d, slope = -g, -(g @ g)
        if slope == 0:
            break
        lo, hi, t = 0.0, np.inf, 1.0
        accepted = False
        for _ in range(60):
            xn = x + t * d
            fn, gn = phi(xn)
            if not np.isfinite(fn) or fn > fx + 1e-4 * t * slope:
                hi = t
            elif gn @ d < 0.9 * slope:
                lo = t
            else:
                accepted = True
                break
            t = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * lo
        if not accepted and not (np.isfinite(fn) and fn < fx):
            # line search failed to make progress; restart the metric
            H = np.eye(n)
            since = stall.update(best_f)
            if lo == 0.0:
                break
            continue
        s, y = xn - x, gn - g
        x, fx, g = xn, fn, gn
        if fx < best_f:
            best_f, best_x = fx, x.copy()
        since = stall.update(best_f)
        sy = s @ y
        if sy > 1e-16 * np.linalg.norm(s) * np.linalg.norm(y):
            r = 1.0 / sy
            Hy = H @ y
            H = H - r * (np.outer(s, Hy) + np.outer(Hy, s)) + (r * r * (y @ Hy) + r) * np.outer(s, s)
    return best_f, best_x, it


def solve_feasibility(aug: AugmentedSystem, gamma: float, lambda0: float,
                      opts: SolverOptions | None = None) -> SynthesisCertificate:
    """Search for (P, V, eps) satisfying both inequalities with margin ``opts.margin``.

    Restart 0 starts from P = I, V = 0, eps = 1 (or the fixed eps); later
    restarts perturb that point with a generator seeded by ``opts.seed``.
    Restarts run in order and the first success is returned.

    Raises
    ------
    SynthesisInfeasible
        No feasible point found within the budget.
    SynthesisBreakdown
        The merit function became non-finite on every restart.
    """
    opts = opts or SolverOptions()
    if gamma <= 0 or lambda0 <= 0:
        raise ValueError("gamma and lambda0 must be positive")
    if not pbh_detectable(aug.A_hat, aug.C_tilde):
        warnings.warn("(C_tilde, A_hat) is not detectable; the inequalities cannot be feasible",
                      RuntimeWarning, stacklevel=2)
    mu = opts.margin
    phi = _MeritFunction(aug, gamma, lambda0, mu, opts.fixed_eps)
    rng = np.random.default_rng(opts.seed)
    x0 = phi.pack(LmiVariables(np.eye(aug.dim), np.zeros((aug.dim, aug.m_y)),
                               opts.fixed_eps if opts.fixed_eps is not None else 1.0))
    method = _bfgs if opts.method == "bfgs" else _polyak

    best_f, best_x, finite_seen = np.inf, None, False
    for r in range(opts.restarts + 1):
        if r == 0:
            x = x0.copy()
        else:
            S = rng.standard_normal((aug.dim, aug.dim))
            P = np.eye(aug.dim) + opts.perturbation * 0.5 * (S + S.T)
            V = opts.perturbation * rng.standard_normal((aug.dim, aug.m_y))
            eps = opts.fixed_eps if opts.fixed_eps is not None else float(
                np.exp(opts.perturbation * rng.standard_normal()))
            x = phi.pack(LmiVariables(P, V, eps))
        f, xb, iters = method(phi, x, opts)
        log.debug("restart %d: phi=%.3e after %d iterations", r, f, iters)
        if np.isfinite(f):
            finite_seen = True
        if f < best_f:
            best_f, best_x = f, xb
        if f < -mu:
            vars = phi.unpack(xb)
            margins = lmi_margins(vars, gamma, lambda0, aug)
            if min(margins) >= mu and vars.eps >= mu:
                gain = compute_gain(vars, aug)
                return SynthesisCertificate(vars, gain, float(gamma), float(lambda0), margins,
                                            float(f), iters, r, opts.method)
    if not finite_seen:
        raise SynthesisBreakdown("merit function is not finite", float(best_f))
    best = phi.unpack(best_x) if best_x is not None else None
    raise SynthesisInfeasible(
        f"no feasible point found at gamma={gamma:g} (best phi {best_f:.3e})", float(best_f), best)


def compute_gain(vars: LmiVariables, aug: AugmentedSystem | None = None) -> ProtocolGain:
    """F = P^-1 V, partitioned into the leader's blocks."""
    w = np.linalg.eigvalsh(vars.P)
    if w[0] <= 0:
        raise ValueError(f"P is not positive definite (min eigenvalue {w[0]:.3e})")
    F = solve_linear(vars.P, vars.V)
    if aug is None:
        return ProtocolGain(F, 1, F.shape[0])
    return ProtocolGain.for_system(F, aug)


@dataclass
class CertificationReport:
    margins: tuple[float, float, float]
    eps: float
    decoupled: VerificationReport
    coupled: VerificationReport | None
    notes: list[str] = field(default_factory=list)

    @property
    def margins_ok(self) -> bool:
        return min(self.margins) > 0 and self.eps > 0

    @property
    def passed(self) -> bool:
        ok = self.margins_ok and self.decoupled.passed
        if self.coupled is not None:
            ok = ok and self.coupled.passed and self.coupled.consistent
        return ok

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "margins": {"lmi1": self.margins[0], "lmi2": self.margins[1], "P": self.margins[2]},
            "eps": self.eps,
            "decoupled": self.decoupled.to_dict(),
            "coupled": self.coupled.to_dict() if self.coupled is not None else None,
            "notes": list(self.notes),
        }


def certify(cert: SynthesisCertificate, aug: AugmentedSystem, spec: FollowerSpectrum,
            gamma: float | None = None,
            dec: StochasticDecomposition | None = None) -> CertificationReport:
    """Independently re-check a certificate.

    Both inequalities are re-assembled at the returned variables, then the
    gain is run through the decoupled check and, when ``dec`` is given, the
    coupled check.
    """
    gamma = cert.gamma if gamma is None else float(gamma)
    v = cert.variables
    margins = lmi_margins(v, gamma, spec.lambda0, aug)
    notes = []
    try:
        F = compute_gain(v, aug).F
    except (ValueError, np.linalg.LinAlgError) as exc:
        notes.append(f"gain recomputation failed: {exc}")
        F = cert.gain.F
    else:
        if not np.allclose(F, cert.gain.F, rtol=1e-8, atol=1e-12):
            notes.append("stored gain differs from P^-1 V")
    dec_rep = verify_theorem1(aug, F, spec, gamma)
    coup_rep = verify_definition1(aug, F, dec, gamma, spec=spec) if dec is not None else None
    return CertificationReport(margins, v.eps, dec_rep, coup_rep, notes)


def bisect_gamma(aug: AugmentedSystem, lambda0: float, opts: SolverOptions | None = None,
                 gamma_hi: float = 1.0, tol: float = 1e-3, max_expand: int = 20):
    """Smallest gamma (to ``tol``) for which the search finds a certificate.

    Returns ``(certificate, bracket_log)``; each log entry is
    ``(gamma, feasible)``.  Feasibility at a level is only "found / not
    found", so the result is an upper estimate of the true optimum.
    """
    opts = opts or SolverOptions()
    history = []

    def attempt(g):
        try:
            c = solve_feasibility(aug, g, lambda0, opts)
        except SynthesisInfeasible:
            history.append((g, False))
            log.info("gamma=%.6g: not found", g)
            return None
        history.append((g, True))
        log.info("gamma=%.6g: feasible", g)
        return c

    hi = float(gamma_hi)
    best = attempt(hi)
    for _ in range(max_expand):
        if best is not None:
            break
        hi *= 2.0
        best = attempt(hi)
    if best is None:
        raise SynthesisInfeasible(f"no feasible gamma up to {hi:g}", np.inf)
    lo = 0.0
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        c = attempt(mid)
        if c is None:
            lo = mid
        else:
            hi, best = mid, c
    return best, history
