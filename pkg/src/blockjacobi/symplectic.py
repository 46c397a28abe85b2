"""Symplectic forms, the Cayley transform, Moebius action and Lagrangian frames.

Block conventions (all blocks L x L)::

    J = [[0, -1], [1, 0]]      symplectic form
    G = [[1, 0], [0, -1]]      Lorentz form
    C = [[1, -i], [1, i]]/sqrt(2)   Cayley transform
    K = [[0, -I], [I, 0]]      quaternion form, I the duality form

A Lagrangian plane is stored as a 2L x L frame ``phi = (a; b)`` with
``phi^* J phi = 0``.  Its stereographic image is ``(a - ib)(a + ib)^{-1}``,
a unitary matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field
from functools import lru_cache

import numpy as np

from .matrices import DEFAULT_TOL, as_matrix, duality_form, max_norm

FIELDS = ("complex", "real", "quaternion")

__all__ = [
    "FIELDS",
    "CanonicalForms",
    "canonical_forms",
    "check_field",
    "LagrangianFrame",
    "MoebiusSingularity",
    "NotInvertibleChart",
    "StepTooCoarse",
    "split_blocks",
    "is_symplectic",
    "is_lorentz",
    "symplectic_defect",
    "lorentz_defect",
    "cayley",
    "moebius",
    "stereo_pi",
    "stereo_Pi",
    "inverse_Pi",
    "wronskian",
    "wronskian_intersection",
    "rn_cocycle_ratio",
    "rn_cocycle_sides",
    "winding_increment",
    "phase_velocity",
    "rotation_path",
    "shear",
    "orthonormalize",
]


class MoebiusSingularity(ArithmeticError):
    """C Z + D is (numerically) singular."""

    def __init__(self, smallest_singular_value: float):
        self.smallest_singular_value = smallest_singular_value
        super().__init__(
            f"Moebius singularity: smallest singular value of CZ+D is {smallest_singular_value:.3e}")


class NotInvertibleChart(ArithmeticError):
    """Lower block of a frame is singular, so the affine chart does not apply."""


class StepTooCoarse(ArithmeticError):
    """A phase increment is too close to pi to be resolved on the principal branch."""


def check_field(field_tag: str, L: int) -> str:
    if field_tag not in FIELDS:
        raise ValueError(f"unknown symmetry class {field_tag!r}, expected one of {FIELDS}")
    if field_tag == "quaternion" and L % 2:
        raise ValueError(f"quaternion class needs even L, got L={L}")
    return field_tag


@dataclass(frozen=True)
class CanonicalForms:
    L: int
    J: np.ndarray = dc_field(repr=False, compare=False)
    G: np.ndarray = dc_field(repr=False, compare=False)
    C: np.ndarray = dc_field(repr=False, compare=False)
    K: np.ndarray | None = dc_field(repr=False, compare=False)


@lru_cache(maxsize=None)
def canonical_forms(L: int) -> CanonicalForms:
    eye = np.eye(L)
    z = np.zeros((L, L))
    J = np.block([[z, -eye], [eye, z]]).astype(complex)
    G = np.block([[eye, z], [z, -eye]]).astype(complex)
    C = np.block([[eye, -1j * eye], [eye, 1j * eye]]) / np.sqrt(2)
    K = None
    if L % 2 == 0:
        I = duality_form(L).I
        K = np.block([[z, -I], [I, z]]).astype(complex)
    for m in (J, G, C) + ((K,) if K is not None else ()):
        m.setflags(write=False)
    return CanonicalForms(L, J, G, C, K)


def _half(t) -> int:
    n = np.shape(t)[-1]
    if n % 2:
        raise ValueError(f"expected an even dimension, got {n}")
    return n // 2


def split_blocks(t: np.ndarray):
    """Return the four L x L blocks (A, B, C, D) of a 2L x 2L matrix."""
    L = _half(t)
    return t[..., :L, :L], t[..., :L, L:], t[..., L:, :L], t[..., L:, L:]


def _relative(defect: float, t) -> float:
    return defect / max(1.0, max_norm(t) ** 2)


def symplectic_defect(t, field_tag: str = "complex", forms: CanonicalForms | None = None) -> float:
    t = as_matrix(t)
    L = _half(t)
    check_field(field_tag, L)
    f = forms or canonical_forms(L)
    d = max_norm(t.conj().T @ f.J @ t - f.J)
    if field_tag == "real":
        d = max(d, max_norm(t.T @ f.J @ t - f.J))
    elif field_tag == "quaternion":
        d = max(d, max_norm(t.T @ f.K @ t - f.K))
    return _relative(d, t)


def is_symplectic(t, field_tag: str = "complex", tol: float = DEFAULT_TOL,
                  forms: CanonicalForms | None = None) -> bool:
    return symplectic_defect(t, field_tag, forms) <= tol


def lorentz_defect(t, field_tag: str = "complex", forms: CanonicalForms | None = None) -> float:
    t = as_matrix(t)
    L = _half(t)
    check_field(field_tag, L)
    f = forms or canonical_forms(L)
    d = max_norm(t.conj().T @ f.G @ t - f.G)
    A, B, C, D = split_blocks(t)
    if field_tag == "real":
        d = max(d, max_norm(C - B.conj()), max_norm(D - A.conj()))
    elif field_tag == "quaternion":
        I = duality_form(L).I
        d = max(d, max_norm(C - I.T @ B.conj() @ I), max_norm(D - I.T @ A.conj() @ I))
    return _relative(d, t)


def is_lorentz(t, field_tag: str = "complex", tol: float = DEFAULT_TOL,
               forms: CanonicalForms | None = None) -> bool:
    return lorentz_defect(t, field_tag, forms) <= tol


def cayley(t: np.ndarray) -> np.ndarray:
    """C t C^*, mapping the symplectic group onto the Lorentz group."""
    C = canonical_forms(_half(t)).C
    return C @ t @ C.conj().T


def moebius(t, z, tol: float = 1e-13) -> np.ndarray:
    """(A z + B)(C z + D)^{-1}."""
    t = as_matrix(t)
    L = _half(t)
    z = as_matrix(z, L, L)
    A, B, C, D = split_blocks(t)
    den = C @ z + D
    s = np.linalg.svd(den, compute_uv=False)
    if s[-1] <= tol * max(1.0, s[0]):
        raise MoebiusSingularity(float(s[-1]))
    return np.linalg.solve(den.T, (A @ z + B).T).T


@dataclass(frozen=True)
class LagrangianFrame:
    """A 2L x L full-rank frame with phi^* J phi = 0."""

    phi: np.ndarray
    field: str = "complex"
    tol: float = 1e-8

    def __post_init__(self):
        phi = as_matrix(self.phi)
        if phi.shape[0] != 2 * phi.shape[1]:
            raise ValueError(f"frame must be 2L x L, got {phi.shape}")
        L = phi.shape[1]
        check_field(self.field, L)
        s = np.linalg.svd(phi, compute_uv=False)
        if s[-1] <= self.tol * s[0]:
            raise ValueError("frame is rank deficient")
        f = canonical_forms(L)
        scale = s[0] ** 2
        if max_norm(phi.conj().T @ f.J @ phi) > self.tol * scale:
            raise ValueError("frame is not Lagrangian")
        if self.field == "real" and max_norm(phi.T @ f.J @ phi) > self.tol * scale:
            raise ValueError("frame violates the real-class condition")
        if self.field == "quaternion" and max_norm(phi.T @ f.K @ phi) > self.tol * scale:
            raise ValueError("frame violates the quaternion-class condition")
        object.__setattr__(self, "phi", phi)

    @property
    def L(self) -> int:
        return self.phi.shape[1]

    @property
    def upper(self) -> np.ndarray:
        return self.phi[: self.L]

    @property
    def lower(self) -> np.ndarray:
        return self.phi[self.L:]


def _frame_array(frame) -> np.ndarray:
    if isinstance(frame, LagrangianFrame):
        return frame.phi
    return as_matrix(frame)


def stereo_pi(frame, tol: float = 1e-13) -> np.ndarray:
    """a b^{-1} for a frame (a; b)."""
    phi = _frame_array(frame)
    L = phi.shape[1]
    a, b = phi[:L], phi[L:]
    s = np.linalg.svd(b, compute_uv=False)
    if s[-1] <= tol * max(1.0, s[0]):
        raise NotInvertibleChart("lower block is singular")
    return np.linalg.solve(b.T, a.T).T


def stereo_Pi(frame) -> np.ndarray:
    """(a - ib)(a + ib)^{-1}, the unitary attached to the plane of (a; b)."""
    phi = _frame_array(frame)
    L = phi.shape[1]
    a, b = phi[:L], phi[L:]
    return np.linalg.solve((a + 1j * b).T, (a - 1j * b).T).T


def inverse_Pi(u, field_tag: str = "complex") -> LagrangianFrame:
    u = as_matrix(u)
    L = u.shape[0]
    eye = np.eye(L)
    return LagrangianFrame(np.vstack([(u + eye) / 2, 1j * (u - eye) / 2]), field_tag)


def wronskian(phi, psi) -> np.ndarray:
    phi = _frame_array(phi)
    psi = _frame_array(psi)
    J = canonical_forms(phi.shape[1]).J
    return phi.conj().T @ J @ psi


def wronskian_intersection(phi, psi, tol: float = 1e-8) -> int:
    """Dimension of the intersection of two Lagrangian planes.

    Singular values of the Wronskian below ``tol`` times the larger of its
    norm and the product of the frame norms count as zero.
    """
    a = _frame_array(phi)
    b = _frame_array(psi)
    if a.shape != b.shape:
        raise ValueError("frames have different shapes")
    s = np.linalg.svd(wronskian(a, b), compute_uv=False)
    scale = max(s[0], np.linalg.norm(a, 2) * np.linalg.norm(b, 2))
    return int(np.sum(s <= tol * scale))


def rn_cocycle_sides(t, frame) -> tuple[float, float]:
    """Both sides of the determinant identity for the frame norm growth.

    Left: det((t phi)^*(t phi)) / det(phi^* phi).  Right: the same ratio
    expressed through the affine charts pi(phi) and t.pi(phi).
    """
    t = as_matrix(t)
    phi = _frame_array(frame)
    L = phi.shape[1]
    tphi = t @ phi
    lhs = (np.linalg.det(tphi.conj().T @ tphi) / np.linalg.det(phi.conj().T @ phi)).real
    z = stereo_pi(phi)
    tz = stereo_pi(tphi)
    _, _, C, D = split_blocks(t)
    eye = np.eye(L)
    rhs = (np.linalg.det(tz.conj().T @ tz + eye) / np.linalg.det(z.conj().T @ z + eye)).real
    rhs *= abs(np.linalg.det(C @ z + D)) ** 2
    return float(lhs), float(rhs)


def rn_cocycle_ratio(t, frame, rtol: float = 1e-10) -> float:
    lhs, rhs = rn_cocycle_sides(t, frame)
    if abs(lhs - rhs) > rtol * max(abs(lhs), abs(rhs)):
        raise ArithmeticError(f"cocycle sides disagree: {lhs!r} vs {rhs!r}")
    return lhs


def winding_increment(u_prev, u_next, margin: float = 1e-3) -> float:
    """Principal value of arg det(u_next u_prev^*)."""
    w = np.angle(np.linalg.det(np.asarray(u_next) @ np.asarray(u_prev).conj().T))
    if abs(w) >= np.pi - margin:
        raise StepTooCoarse(f"winding increment {w:.6f} too close to pi")
    return float(w)


def phase_velocity(frame, dframe) -> float:
    """2 Tr((phi^* phi)^{-1} phi^* J dphi): the E-derivative of arg det Pi(phi)."""
    phi = _frame_array(frame)
    dphi = np.asarray(dframe, dtype=complex)
    if dphi.shape != phi.shape:
        raise ValueError("derivative has the wrong shape")
    J = canonical_forms(phi.shape[1]).J
    g = phi.conj().T @ phi
    return float(2 * np.trace(np.linalg.solve(g, phi.conj().T @ J @ dphi)).real)


def rotation_path(eta: float, L: int) -> np.ndarray:
    """[[cos eta, sin eta], [-sin eta, cos eta]] with scalar L x L blocks."""
    c, s = np.cos(eta), np.sin(eta)
    eye = np.eye(L)
    return np.block([[c * eye, s * eye], [-s * eye, c * eye]]).astype(complex)


def shear(s) -> np.ndarray:
    """[[1, s], [0, 1]]; symplectic when s is selfadjoint."""
    s = as_matrix(s)
    L = s.shape[0]
    eye = np.eye(L)
    return np.block([[eye, s], [np.zeros((L, L)), eye]]).astype(complex)


def orthonormalize(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR step; returns (q, r) with phi = q r, q having orthonormal columns."""
    q, r = np.linalg.qr(phi)
    return q, r
