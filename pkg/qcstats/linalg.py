"""Dense complex linear-algebra kernel.

Everything here is a pure function of its inputs. Matrices are plain
``numpy.ndarray`` objects with ``complex128`` entries; vectorization elsewhere
in the package stacks columns, so ``vec(A @ B @ C) == kron(C.T, A) @ vec(B)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import expm_multiply

from .core import DefectiveMatrixError, NumericOverflowError, SingularSystemError

__all__ = [
    "ComplexMatrix",
    "SpectralDecomposition",
    "as_matrix",
    "kron",
    "eig",
    "solve_linear",
    "solve_sylvester",
    "solve_lyapunov",
    "expm_action",
    "expm_action_grid",
    "unit_phase",
]

ComplexMatrix = np.ndarray

DEFECTIVE_CONDITION = 1e8
# below this size a dense Pade exponential is cheaper than Krylov-style action
_DENSE_EXPM_LIMIT = 64


def as_matrix(m, *, name: str = "matrix") -> ComplexMatrix:
    """Coerce ``m`` to a finite 2-D complex array."""

    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or 0 in arr.shape:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues with biorthonormal right columns and left rows.

    ``right[:, j]`` is |x_j>> and ``left[j, :]`` is <<y_j| with
    ``left @ right == I``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def __len__(self) -> int:
        return int(self.eigenvalues.shape[0])

    def projector(self, j: int) -> ComplexMatrix:
        return np.outer(self.right[:, j], self.left[j, :])

    def reconstruct(self) -> ComplexMatrix:
        return (self.right * self.eigenvalues) @ self.left

    def biorthonormality_error(self) -> float:
        n = len(self)
        return float(np.max(np.abs(self.left @ self.right - np.eye(n))))

    def completeness_error(self) -> float:
        n = len(self)
        return float(np.max(np.abs(self.right @ self.left - np.eye(n))))


def kron(a, b) -> ComplexMatrix:
    """Kronecker product with block structure ``a[i, j] * b``."""

    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _sort_order(w: np.ndarray) -> np.ndarray:
    # descending real part, ties (to a relative tolerance) by descending imaginary part
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    tol = 1e-9 * scale
    real_key = np.round(w.real / tol)
    imag_key = np.round(w.imag / tol)
    return np.lexsort((-imag_key, -real_key))


def eig(m, *, condition_limit: float = DEFECTIVE_CONDITION) -> SpectralDecomposition:
    """Eigendecomposition of a square matrix with biorthonormal left vectors.

    Raises :class:`DefectiveMatrixError` when the eigenvector matrix is too
    ill-conditioned to be trusted (non-diagonalizable to tolerance).
    """

    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eig needs a square matrix, got {a.shape}")
    w, vr = la.eig(a)
    cond = np.linalg.cond(vr)
    if not np.isfinite(cond) or cond > condition_limit:
        raise DefectiveMatrixError(
            f"eigenvector matrix condition number {cond:.3g} exceeds {condition_limit:.1g}; "
            "matrix is not diagonalizable to tolerance"
        )
    order = _sort_order(w)
    w = w[order]
    vr = vr[:, order]
    vl = la.solve(vr, np.eye(a.shape[0], dtype=complex))
    return SpectralDecomposition(eigenvalues=w, right=vr, left=vl)


def solve_linear(a, b, *, rcond: float | None = None):
    """Solve ``a x = b``.

    Square systems use LU with conditioning checks; overdetermined systems are
    solved in the least-squares sense and must have full column rank.
    """

    a = as_matrix(a)
    b = np.asarray(b, dtype=complex)
    rows, cols = a.shape
    if rows == cols:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", la.LinAlgWarning)
                return la.solve(a, b)
        except (la.LinAlgError, la.LinAlgWarning) as exc:
            raise SingularSystemError(f"singular {rows}x{cols} system: {exc}") from exc
    if rows < cols:
        raise SingularSystemError(f"underdetermined system {rows}x{cols} is rank deficient")
    cutoff = rcond if rcond is not None else max(rows, cols) * np.finfo(float).eps
    x, _, rank, _ = la.lstsq(a, b, cond=cutoff, lapack_driver="gelsy")
    if rank < cols:
        raise SingularSystemError(f"least-squares system has rank {rank} < {cols} columns")
    return x


def _spectral_gap(a: ComplexMatrix, b: ComplexMatrix) -> float:
    wa = np.linalg.eigvals(a)
    wb = np.linalg.eigvals(b)
    return float(np.min(np.abs(wa[:, None] + wb[None, :])))


def solve_sylvester(a, b, c) -> ComplexMatrix:
    """Solve ``a X + X b = c`` (Bartels-Stewart).

    Raises :class:`SingularSystemError` when spectra of ``a`` and ``-b`` overlap.
    """

    a = as_matrix(a, name="a")
    b = as_matrix(b, name="b")
    c = as_matrix(c, name="c")
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    gap = _spectral_gap(a, b)
    if gap <= 1e-12 * scale:
        raise SingularSystemError(f"Sylvester equation is singular (spectral gap {gap:.3g})")
    return la.solve_sylvester(a, b, c)


def solve_lyapunov(a, c) -> ComplexMatrix:
    """Solve ``a X + X a^dagger = c``."""

    a = as_matrix(a, name="a")
    return solve_sylvester(a, a.conj().T, c)


def expm_action(a, v, t: float = 1.0) -> np.ndarray:
    """Return ``exp(a t) v`` for finite ``t >= 0``."""

    if not np.isfinite(t) or t < 0:
        raise ValueError(f"t must be finite and non-negative, got {t}")
    v = np.asarray(v, dtype=complex)
    if t == 0:
        return v.copy()
    a = np.asarray(a, dtype=complex)
    if a.shape[0] <= _DENSE_EXPM_LIMIT:
        out = la.expm(a * t) @ v
    else:
        out = expm_multiply(a * t, v)
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError(f"matrix exponential overflowed at t={t}")
    return out


def expm_action_grid(a, v, times: Sequence[float]) -> np.ndarray:
    """``exp(a t) v`` for every ``t`` in a non-negative grid (any order).

    Rows of the result follow the order of ``times``. The grid is marched in
    ascending order so each step only propagates the increment.
    """

    t = np.asarray(times, dtype=float)
    if t.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("times must be finite and non-negative")
    v = np.asarray(v, dtype=complex)
    out = np.empty((t.size,) + v.shape, dtype=complex)
    order = np.argsort(t, kind="stable")
    current = v.copy()
    last = 0.0
    for idx in order:
        step = t[idx] - last
        if step > 0:
            current = expm_action(a, current, step)
            last = t[idx]
        out[idx] = current
    return out


def unit_phase(phi: float) -> complex:
    """``exp(i phi)`` with multiples of pi/2 mapped exactly onto the axes."""

    quarter = 2.0 * float(phi) / np.pi
    k = round(quarter)
    if abs(quarter - k) < 1e-12:
        return (1.0 + 0j, 1j, -1.0 + 0j, -1j)[k % 4]
    return complex(np.exp(1j * phi))
