"""Dense complex matrix helpers and structure predicates.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  The
predicates below use max-norm defects scaled by the size of the input, so
that the default tolerance means "relative to the entries".
"""
from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-10

__all__ = [
    "DEFAULT_TOL",
    "DualityForm",
    "as_matrix",
    "max_norm",
    "is_selfadjoint",
    "is_positive_definite",
    "is_unitary",
    "is_selfdual",
    "selfdual_defect",
    "unitary_eigenphases",
    "duality_form",
]


def as_matrix(a, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Return ``a`` as a finite 2-d complex array, checking the shape."""
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def max_norm(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    return m


def _scaled(tol: float, a) -> float:
    return tol * max(1.0, max_norm(a))


def is_selfadjoint(a, tol: float = DEFAULT_TOL) -> bool:
    m = _square(a)
    return max_norm(m - m.conj().T) <= _scaled(tol, m)


def is_positive_definite(t, tol: float = DEFAULT_TOL) -> bool:
    """Selfadjoint with smallest eigenvalue above ``tol * ||t||``."""
    m = _square(t)
    if not is_selfadjoint(m, tol):
        return False
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return bool(w[0] > tol * max(abs(w[-1]), abs(w[0])))


def is_unitary(u, tol: float = DEFAULT_TOL) -> bool:
    m = _square(u)
    return max_norm(m.conj().T @ m - np.eye(len(m))) <= _scaled(tol, m)


@dataclass(frozen=True)
class DualityForm:
    """The real matrix I = [[0, -1], [1, 0]] with blocks of size L/2."""

    L: int
    I: np.ndarray = dc_field(repr=False, compare=False)

    def dual(self, a: np.ndarray) -> np.ndarray:
        """Return I* a^t I."""
        return self.I.T @ np.swapaxes(a, -1, -2) @ self.I

    def conj_dual(self, a: np.ndarray) -> np.ndarray:
        """Return I* conj(a) I (equal to dual(a) on selfadjoint input)."""
        return self.I.T @ np.conj(a) @ self.I


def duality_form(L: int) -> DualityForm:
    if L <= 0 or L % 2:
        raise ValueError(f"duality form needs an even positive size, got {L}")
    h = L // 2
    eye = np.eye(h)
    z = np.zeros((h, h))
    return DualityForm(L, np.block([[z, -eye], [eye, z]]).astype(complex))


def selfdual_defect(a, form: DualityForm | None = None) -> float:
    """Max-norm of I* a^t I - a."""
    m = _square(a)
    if form is None:
        form = duality_form(len(m))
    if len(m) != form.L:
        raise ValueError(f"size {len(m)} does not match duality form of size {form.L}")
    return max_norm(form.dual(m) - m)


def is_selfdual(a, form: DualityForm | None = None, tol: float = DEFAULT_TOL) -> bool:
    m = _square(a)
    if len(m) % 2:
        raise ValueError("self-duality needs an even dimension")
    return selfdual_defect(m, form) <= _scaled(tol, m)


def unitary_eigenphases(u, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases in [0, 2pi), ascending, with orthonormal eigenvectors.

    A complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are an orthonormal eigenbasis even for repeated phases.
    """
    m = _square(u)
    if not is_unitary(m, tol):
        raise ValueError("matrix is not unitary")
    t, z = scipy.linalg.schur(m, output="complex")
    phases = np.mod(np.angle(np.diag(t)), 2 * np.pi)
    phases[phases >= 2 * np.pi] = 0.0
    order = np.argsort(phases, kind="stable")
    return phases[order], z[:, order]
