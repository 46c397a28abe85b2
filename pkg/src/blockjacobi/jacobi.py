"""Finite block Jacobi matrices, their transfer matrices and resolvent recursions.

The operator acts on sequences of L-vectors by

    (H psi)_n = T_{n+1} psi_{n+1} + V_n psi_n + T_n psi_{n-1}

with T_1 = T_{N+1} = 1.  The boundary matrices enter the dense matrix as
V_1 - zeta and V_N - xi.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np

from .matrices import (DEFAULT_TOL, as_matrix, duality_form, is_positive_definite,
                       is_selfadjoint, max_norm, selfdual_defect)
from .symplectic import check_field

__all__ = [
    "ModelError",
    "JacobiModel",
    "free_model",
    "random_model",
    "assemble_dense",
    "direct_spectrum",
    "cluster_eigenvalues",
    "transfer_matrix",
    "transfer_parts",
    "initial_frame",
    "end_frame",
    "propagate_frame",
    "riccati_flow",
    "green_corner",
    "green_dense",
    "dean_martin_check",
    "charpoly_check",
    "interlacing_check",
    "gershgorin_bounds",
    "spectral_radius",
    "load_model",
    "save_model",
    "model_from_dict",
    "model_to_dict",
    "encode_matrix",
    "decode_matrix",
]


class ModelError(ValueError):
    """Model data violates a structural requirement."""


def _class_defect(m: np.ndarray, field_tag: str) -> float:
    if field_tag == "real":
        return max_norm(m.imag)
    if field_tag == "quaternion":
        return selfdual_defect(m, duality_form(len(m)))
    return 0.0


@dataclass(frozen=True)
class JacobiModel:
    """Blocks of a selfadjoint block tridiagonal matrix.

    ``V`` has shape (N, L, L); ``T`` has shape (N - 1, L, L) and holds
    T_2 ... T_N.  ``zeta`` and ``xi`` default to zero.
    """

    V: np.ndarray
    T: np.ndarray | None = None
    zeta: np.ndarray | None = None
    xi: np.ndarray | None = None
    field: str = "complex"
    tol: float = dc_field(default=DEFAULT_TOL, compare=False)

    def __post_init__(self):
        V = np.array(self.V, dtype=complex)
        if V.ndim == 2:
            V = V[None]
        if V.ndim != 3 or V.shape[1] != V.shape[2] or V.shape[0] < 1:
            raise ModelError(f"V must have shape (N, L, L), got {V.shape}")
        N, L = V.shape[0], V.shape[1]
        check_field(self.field, L)
        if self.T is None:
            T = np.broadcast_to(np.eye(L, dtype=complex), (N - 1, L, L)).copy()
        else:
            T = np.array(self.T, dtype=complex).reshape(-1, L, L) if N > 1 else np.zeros((0, L, L), complex)
            if T.shape[0] != N - 1:
                raise ModelError(f"expected {N - 1} hopping blocks, got {T.shape[0]}")
        zeta = np.zeros((L, L), complex) if self.zeta is None else as_matrix(self.zeta, L, L)
        xi = np.zeros((L, L), complex) if self.xi is None else as_matrix(self.xi, L, L)
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(T))):
            raise ModelError("model has non-finite entries")
        for n, v in enumerate(V, start=1):
            if not is_selfadjoint(v, self.tol):
                raise ModelError(f"V_{n} is not selfadjoint")
            if _class_defect(v, self.field) > self.tol * max(1.0, max_norm(v)):
                raise ModelError(f"V_{n} violates the {self.field} symmetry class")
        for n, t in enumerate(T, start=2):
            if not is_positive_definite(t, self.tol):
                raise ModelError(f"T_{n} not positive definite")
            if _class_defect(t, self.field) > self.tol * max(1.0, max_norm(t)):
                raise ModelError(f"T_{n} violates the {self.field} symmetry class")
        for name, b in (("zeta", zeta), ("xi", xi)):
            if not is_selfadjoint(b, self.tol):
                raise ModelError(f"{name} is not selfadjoint")
            if _class_defect(b, self.field) > self.tol * max(1.0, max_norm(b)):
                raise ModelError(f"{name} violates the {self.field} symmetry class")
        for a in (V, T, zeta, xi):
            a.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "xi", xi)

    @property
    def N(self) -> int:
        return self.V.shape[0]

    @property
    def L(self) -> int:
        return self.V.shape[1]

    def hopping(self, n: int) -> np.ndarray:
        """T_n for 1 <= n <= N + 1, with identity at both ends."""
        if n == 1 or n == self.N + 1:
            return np.eye(self.L, dtype=complex)
        return self.T[n - 2]

    def truncate(self, n: int) -> "JacobiModel":
        """First n sites, same left boundary, Dirichlet right boundary."""
        if not 1 <= n <= self.N:
            raise ValueError(f"cannot truncate to {n} sites")
        return replace(self, V=self.V[:n], T=self.T[: n - 1], xi=None)

    def with_xi(self, xi) -> "JacobiModel":
        return replace(self, xi=xi)

    def shifted(self, c: float) -> "JacobiModel":
        return replace(self, V=self.V + c * np.eye(self.L))


def free_model(N: int, L: int = 1, v: float = 0.0, field_tag: str = "real") -> JacobiModel:
    V = np.broadcast_to(v * np.eye(L), (N, L, L))
    return JacobiModel(V, field=field_tag)


def _random_selfadjoint(rng, L: int, field_tag: str) -> np.ndarray:
    x = rng.standard_normal((L, L))
    if field_tag != "real":
        x = x + 1j * rng.standard_normal((L, L))
    h = (x + x.conj().T) / 2
    if field_tag == "quaternion":
        h = (h + duality_form(L).dual(h)) / 2
    return h


def random_model(rng, N: int, L: int, field_tag: str = "complex", hop_spread: float = 0.5,
                 boundary: bool = False) -> JacobiModel:
    """Random model with O(1) blocks; hopping blocks have spectrum in [1/2, 2]-ish."""
    V = np.array([_random_selfadjoint(rng, L, field_tag) for _ in range(N)])
    T = []
    for _ in range(N - 1):
        h = _random_selfadjoint(rng, L, field_tag)
        w, q = np.linalg.eigh(h)
        t = (q * np.exp(hop_spread * np.tanh(w))) @ q.conj().T
        if field_tag == "quaternion":
            t = (t + duality_form(L).dual(t)) / 2
        T.append((t + t.conj().T) / 2)
    zeta = xi = None
    if boundary:
        zeta = 0.5 * _random_selfadjoint(rng, L, field_tag)
        xi = 0.5 * _random_selfadjoint(rng, L, field_tag)
    if field_tag == "real":
        V = V.real
        T = [t.real for t in T]
    return JacobiModel(V, np.array(T).reshape(N - 1, L, L), zeta, xi, field_tag)


def assemble_dense(model: JacobiModel) -> np.ndarray:
    N, L = model.N, model.L
    H = np.zeros((N * L, N * L), dtype=complex)
    for n in range(N):
        H[n * L:(n + 1) * L, n * L:(n + 1) * L] = model.V[n]
    H[:L, :L] -= model.zeta
    H[(N - 1) * L:, (N - 1) * L:] -= model.xi
    for n in range(N - 1):
        t = model.T[n]
        H[n * L:(n + 1) * L, (n + 1) * L:(n + 2) * L] = t
        H[(n + 1) * L:(n + 2) * L, n * L:(n + 1) * L] = t.conj().T
    return H


def cluster_eigenvalues(energies, tol: float) -> list[tuple[float, int]]:
    """Group sorted energies closer than ``tol`` into (mean, multiplicity)."""
    out: list[tuple[float, int]] = []
    group: list[float] = []
    for e in np.sort(np.asarray(energies, dtype=float)):
        if group and e - group[-1] > tol:
            out.append((float(np.mean(group)), len(group)))
            group = []
        group.append(float(e))
    if group:
        out.append((float(np.mean(group)), len(group)))
    return out


def direct_spectrum(model: JacobiModel, multiplicities: bool = False, cluster_tol: float | None = None):
    """Dense Hermitian eigenvalues, ascending.

    With ``multiplicities=True`` a list of (energy, multiplicity) is returned,
    grouping eigenvalues closer than ``cluster_tol`` (default 1e-9 times the
    spectral scale).
    """
    w = np.linalg.eigvalsh(assemble_dense(model))
    if not multiplicities:
        return w
    if cluster_tol is None:
        cluster_tol = 1e-9 * max(1.0, float(np.max(np.abs(w))))
    return cluster_eigenvalues(w, cluster_tol)


def transfer_parts(model: JacobiModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(P, Q) with transfer_matrix(model, n, E) = E P + Q."""
    L = model.L
    t = model.hopping(n)
    tinv = np.linalg.inv(t)
    z = np.zeros((L, L), dtype=complex)
    P = np.block([[tinv, z], [z, z]])
    Q = np.block([[-model.V[n - 1] @ tinv, -t], [tinv, z]])
    return P, Q


def transfer_matrix(model: JacobiModel, n: int, E: complex) -> np.ndarray:
    if not 1 <= n <= model.N:
        raise ValueError(f"site {n} outside 1..{model.N}")
    P, Q = transfer_parts(model, n)
    return E * P + Q


def initial_frame(model: JacobiModel) -> np.ndarray:
    """Frame (1; -zeta) encoding the left boundary condition."""
    return np.vstack([np.eye(model.L), -model.zeta]).astype(complex)


def end_frame(model: JacobiModel, xi=None) -> np.ndarray:
    """Frame (-xi; 1) of the right boundary condition."""
    xi = model.xi if xi is None else as_matrix(xi, model.L, model.L)
    return np.vstack([-xi, np.eye(model.L)]).astype(complex)


def propagate_frame(model: JacobiModel, E: complex, frame=None, normalize: bool = True):
    """Apply all transfer matrices to a frame.

    Returns (frame, log_scale) where log_scale accumulates log|det r| of the
    QR re-orthonormalizations, so that det(phi^* phi) of the unnormalized
    product is exp(2 log_scale) det(frame^* frame).
    """
    phi = initial_frame(model) if frame is None else np.array(frame, dtype=complex)
    log_scale = 0.0
    for n in range(1, model.N + 1):
        phi = transfer_matrix(model, n, E) @ phi
        if normalize:
            q, r = np.linalg.qr(phi)
            log_scale += float(np.sum(np.log(np.abs(np.diag(r)))))
            phi = q
    return phi, log_scale


def _check_imag(E: complex, floor: float = 1e-8):
    if not np.imag(E) >= floor:
        raise ValueError(f"need Im E >= {floor}, got E={E}")


def riccati_flow(model: JacobiModel, E: complex, floor: float = 1e-8) -> list[np.ndarray]:
    """Z_1 ... Z_N with Z_1 = E - V_1 + zeta and Z_n = E - V_n - T_n Z_{n-1}^{-1} T_n."""
    _check_imag(E, floor)
    L = model.L
    eye = np.eye(L)
    z = E * eye - model.V[0] + model.zeta
    out = [z]
    for n in range(2, model.N + 1):
        t = model.hopping(n)
        z = E * eye - model.V[n - 1] - t @ np.linalg.solve(z, t)
        out.append(z)
    return out


def upper_margin(z: np.ndarray) -> float:
    """Smallest eigenvalue of (Z - Z^*)/(2i)."""
    return float(np.linalg.eigvalsh((z - z.conj().T) / 2j)[0])


def green_corner(model: JacobiModel, E: complex) -> np.ndarray:
    """N,N block of (H - E)^{-1}, i.e. -(Z_N + xi)^{-1}."""
    z = riccati_flow(model, E)[-1]
    return -np.linalg.inv(z + model.xi)


def green_dense(model: JacobiModel, E: complex) -> np.ndarray:
    H = assemble_dense(model)
    L = model.L
    G = np.linalg.inv(H - E * np.eye(len(H)))
    return G[-L:, -L:]


def _logdet(m: np.ndarray) -> complex:
    sign, logabs = np.linalg.slogdet(m)
    return complex(logabs) + 1j * np.angle(sign)


def dean_martin_check(model: JacobiModel, E: complex) -> tuple[complex, complex, float]:
    """det Z_N against det(E - H^N) / det(E - H^{N-1}), right boundary Dirichlet."""
    if model.N < 2:
        raise ValueError("need N >= 2")
    m = model.with_xi(None)
    lhs = complex(np.linalg.det(riccati_flow(m, E)[-1]))
    big = E * np.eye(m.N * m.L) - assemble_dense(m)
    small = E * np.eye((m.N - 1) * m.L) - assemble_dense(m.truncate(m.N - 1))
    rhs = complex(np.exp(_logdet(big) - _logdet(small)))
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


def charpoly_check(model: JacobiModel, E: complex) -> tuple[complex, complex, float]:
    """log det(E - H^N) against log det((1 0) Phi_N) + sum_n log det T_n.

    Right boundary Dirichlet; the frame is propagated with QR rescaling and
    the discarded factors are accumulated as log-determinants.
    """
    m = model.with_xi(None)
    L = m.L
    lhs = _logdet(E * np.eye(m.N * L) - assemble_dense(m))
    phi = initial_frame(m)
    rhs = 0j
    for n in range(1, m.N + 1):
        q, r = np.linalg.qr(transfer_matrix(m, n, E) @ phi)
        rhs += _logdet(r)
        phi = q
    rhs += _logdet(phi[:L])
    for n in range(2, m.N + 1):
        rhs += _logdet(m.hopping(n))
    d = lhs - rhs
    d = complex(d.real, (d.imag + np.pi) % (2 * np.pi) - np.pi)
    return lhs, rhs, abs(d)


def interlacing_check(model: JacobiModel, tol: float = 1e-10) -> tuple[bool, float]:
    """E^N_j <= E^{N-1}_j <= E^N_{j+L}; returns (ok, worst violation)."""
    m = model.with_xi(None)
    if m.N < 2:
        return True, 0.0
    big = direct_spectrum(m)
    small = direct_spectrum(m.truncate(m.N - 1))
    L = m.L
    k = len(small)
    worst = max(float(np.max(big[:k] - small)), float(np.max(small - big[L:L + k])))
    return worst <= tol, worst


def gershgorin_bounds(model: JacobiModel) -> tuple[float, float]:
    """Cheap enclosure [E_min, E_max] of the spectrum with unit margin."""
    lo, hi = np.inf, -np.inf
    for n in range(1, model.N + 1):
        v = model.V[n - 1].copy()
        if n == 1:
            v = v - model.zeta
        if n == model.N:
            v = v - model.xi
        w = np.linalg.eigvalsh((v + v.conj().T) / 2)
        r = np.linalg.norm(model.hopping(n), 2) + np.linalg.norm(model.hopping(n + 1), 2)
        lo = min(lo, w[0] - r - 1)
        hi = max(hi, w[-1] + r + 1)
    return float(lo), float(hi)


def spectral_radius(model: JacobiModel) -> float:
    w = direct_spectrum(model)
    return float(max(abs(w[0]), abs(w[-1])))


# ---- file format -----------------------------------------------------------

def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def decode_matrix(obj, L: int) -> np.ndarray:
    """Accept nested rows of [re, im] pairs, a flat row-major list of pairs, or plain reals."""
    a = np.array(obj, dtype=float)
    if a.ndim == 3 and a.shape[-1] == 2:
        m = a[..., 0] + 1j * a[..., 1]
    elif a.ndim == 2 and a.shape == (L * L, 2):
        m = (a[:, 0] + 1j * a[:, 1]).reshape(L, L)
    elif a.ndim == 2 and a.shape == (L, L):
        m = a.astype(complex)
    elif a.ndim == 1 and a.size == L * L:
        m = a.reshape(L, L).astype(complex)
    elif a.ndim == 0 and L == 1:
        m = a.reshape(1, 1).astype(complex)
    else:
        raise ModelError(f"cannot read a {L}x{L} matrix from array of shape {a.shape}")
    if m.shape != (L, L):
        raise ModelError(f"expected a {L}x{L} matrix, got {m.shape}")
    return m


def model_from_dict(d: dict) -> JacobiModel:
    try:
        L = int(d["L"])
        N = int(d["N"])
        field_tag = d.get("class", "complex")
        V = np.array([decode_matrix(v, L) for v in d["V"]]).reshape(-1, L, L)
        if len(V) != N:
            raise ModelError(f"N={N} but {len(V)} diagonal blocks given")
        T = None
        if d.get("T") is not None:
            T = np.array([decode_matrix(t, L) for t in d["T"]]).reshape(-1, L, L)
        zeta = decode_matrix(d["zeta"], L) if d.get("zeta") is not None else None
        xi = decode_matrix(d["xi"], L) if d.get("xi") is not None else None
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model description: {exc!r}") from exc
    return JacobiModel(V, T, zeta, xi, field_tag)


def model_to_dict(model: JacobiModel) -> dict:
    return {
        "L": model.L,
        "N": model.N,
        "class": model.field,
        "V": [encode_matrix(v) for v in model.V],
        "T": [encode_matrix(t) for t in model.T],
        "zeta": encode_matrix(model.zeta),
        "xi": encode_matrix(model.xi),
    }


def load_model(path) -> JacobiModel:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: JacobiModel, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(model_to_dict(model), fh)
