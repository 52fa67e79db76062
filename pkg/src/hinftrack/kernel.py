"""Dense matrix numerics shared by the rest of the package.

Everything here is a thin, checked layer over LAPACK (through numpy and
scipy).  The checks matter more than the wrappers: inputs are validated for
shape and finiteness, eigen-decompositions are verified against their
residuals, and linear solves refuse to return garbage for nearly singular
systems.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Tolerances",
    "TOL",
    "Spectrum",
    "DimensionError",
    "IllConditionedError",
    "ConvergenceError",
    "as_matrix",
    "eig_sym",
    "eig_general",
    "spectral_radius",
    "sv_max",
    "kron",
    "solve_linear",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used across the package."""

    symmetry: float = 1e-10
    eig_sym_residual: float = 1e-9
    eig_general_residual: float = 1e-7
    max_condition: float = 1e12
    solve_residual: float = 1e-9
    row_sum: float = 1e-12
    weight_symmetry: float = 1e-12
    schur_margin: float = 1e-9
    pbh_rank: float = 1e-9
    hinf: float = 1e-6
    lmi_margin: float = 1e-6


TOL = Tolerances()


class DimensionError(ValueError):
    """Operands have incompatible or invalid shapes."""


class IllConditionedError(np.linalg.LinAlgError):
    """A linear system is singular to working precision."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(np.linalg.LinAlgError):
    """An iterative eigen-solver failed to converge."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix.

    For symmetric sources the values are real and sorted ascending.  General
    spectra are complex and sorted by (real, imag) for reproducibility.
    """

    eigenvalues: np.ndarray
    is_real_symmetric_source: bool = False

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def as_matrix(M, name: str = "matrix", *, allow_complex: bool = False) -> np.ndarray:
    """Coerce *M* to a finite 2-D float (or complex) array."""
    dtype = complex if allow_complex else float
    try:
        A = np.array(M, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"{name}: not a numeric matrix ({exc})") from None
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1)
    elif A.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D array, got {A.ndim}-D")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name}: contains non-finite entries")
    return A


def _square(M, name: str, allow_complex: bool = False) -> np.ndarray:
    A = as_matrix(M, name, allow_complex=allow_complex)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name}: must be square, got {A.shape[0]}x{A.shape[1]}")
    return A


def eig_sym(M, tol: Tolerances = TOL) -> Spectrum:
    """Eigenvalues of a real symmetric matrix, sorted ascending.

    The input is symmetrized by averaging with its transpose, which absorbs
    rounding from block assembly.  Inputs further than ``tol.symmetry``
    (relative) from symmetric are rejected.
    """
    A = _square(M, "eig_sym input")
    scale = max(1.0, np.abs(A).max(initial=0.0))
    if np.abs(A - A.T).max(initial=0.0) > tol.symmetry * scale:
        raise ValueError("eig_sym input is not symmetric")
    A = 0.5 * (A + A.T)
    w, Q = np.linalg.eigh(A)
    norm = np.linalg.norm(A, 2) if A.size else 0.0
    if A.size and np.linalg.norm(A @ Q - Q * w, 2) > tol.eig_sym_residual * max(norm, 1e-300):
        raise ConvergenceError("symmetric eigen-decomposition residual too large")
    return Spectrum(w, True)


def eig_general(M, tol: Tolerances = TOL) -> Spectrum:
    """Complex eigenvalues of a general square matrix."""
    A = _square(M, "eig_general input", allow_complex=True)
    try:
        w = sla.eigvals(A, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration did not converge: {exc}") from None
    if not np.all(np.isfinite(w)):
        raise ConvergenceError("QR iteration produced non-finite eigenvalues")
    order = np.lexsort((w.imag, w.real))
    return Spectrum(w[order], False)


def spectral_radius(M, tol: Tolerances = TOL) -> float:
    A = _square(M, "spectral_radius input", allow_complex=True)
    if A.size == 0:
        return 0.0
    return float(np.max(eig_general(A, tol).moduli))


def sv_max(M) -> float:
    """Largest singular value; complex input is allowed."""
    A = as_matrix(M, "sv_max input", allow_complex=True)
    if A.size == 0:
        return 0.0
    return float(sla.svdvals(A, check_finite=False)[0])


def kron(A, B) -> np.ndarray:
    return np.kron(np.asarray(A), np.asarray(B))


def solve_linear(A, B, tol: Tolerances = TOL) -> np.ndarray:
    """Solve ``A X = B`` for square, well-conditioned ``A``.

    Raises
    ------
    IllConditionedError
        If the 1-norm condition estimate of ``A`` exceeds
        ``tol.max_condition``.  The estimate is attached to the exception.
    """
    Am = _square(A, "solve_linear A", allow_complex=np.iscomplexobj(A))
    vector_rhs = np.ndim(B) == 1
    Bm = as_matrix(B, "solve_linear B", allow_complex=np.iscomplexobj(B))
    if Bm.shape[0] != Am.shape[0]:
        raise DimensionError(
            f"solve_linear: A is {Am.shape[0]}x{Am.shape[1]} but B has {Bm.shape[0]} rows"
        )
    try:
        with warnings.catch_warnings():
            # exact singularity is reported below as IllConditionedError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(Am, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        raise IllConditionedError("solve_linear: matrix is singular", np.inf) from None
    if np.any(np.diag(lu) == 0):
        raise IllConditionedError("solve_linear: matrix is singular", np.inf)
    cond = np.linalg.cond(Am, 1)
    if not np.isfinite(cond) or cond > tol.max_condition:
        raise IllConditionedError(
            f"solve_linear: condition estimate {cond:.3e} exceeds {tol.max_condition:.1e}", cond
        )
    X = sla.lu_solve((lu, piv), Bm, check_finite=False)
    return X.ravel() if vector_rhs else X
