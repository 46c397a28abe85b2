"""Self-generating invariant suite behind ``blockjacobi verify``.

Every property draws its own random inputs from one seed, measures a
nonnegative defect per sample and passes when the largest defect stays below
a fixed threshold.  The ``poison`` switch replaces the symplectic form by a
matrix with one block of the wrong sign; the symplectic families must then
fail, which shows the checks are able to fail at all.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .jacobi import (charpoly_check, dean_martin_check, direct_spectrum, green_corner,
                     green_dense, interlacing_check, random_model, spectral_radius,
                     transfer_matrix)
from .matrices import duality_form, max_norm, selfdual_defect
from .rotation import (BoundaryAmbiguity, count_below, model_table, path_winding, pruefer_flow,
                       rotation_loop, states_and_velocity, telescoped_rotation)
from .symplectic import (canonical_forms, inverse_Pi, lorentz_defect, moebius, rn_cocycle_sides,
                         split_blocks, stereo_Pi, symplectic_defect, wronskian_intersection)

__all__ = ["PropertyResult", "PROPERTIES", "run_suite"]

CLASSES = ("complex", "real", "quaternion")


@dataclass(frozen=True)
class PropertyResult:
    name: str
    samples: int
    max_defect: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_defect) and self.max_defect <= self.threshold)

    def to_dict(self) -> dict:
        return {"property": self.name, "samples": self.samples, "max_defect": self.max_defect,
                "threshold": self.threshold, "pass": self.passed}


def _forms(L: int, poison: bool):
    f = canonical_forms(L)
    if not poison:
        return f
    J = f.J.copy()
    J[L:, :L] *= -1
    return replace(f, J=J)


def _hermitian(rng, L: int, field_tag: str = "complex") -> np.ndarray:
    x = rng.standard_normal((L, L))
    if field_tag != "real":
        x = x + 1j * rng.standard_normal((L, L))
    h = (x + x.conj().T) / 2
    if field_tag == "quaternion":
        h = (h + duality_form(L).dual(h)) / 2
    return h


def _group_element(rng, L: int, forms, field_tag: str = "complex", scale: float = 0.5) -> np.ndarray:
    """exp(J H) with H selfadjoint (real symmetric for the real class)."""
    H = _hermitian(rng, 2 * L, "real" if field_tag == "real" else "complex")
    return scipy.linalg.expm(scale * forms.J @ H)


def _unitary(rng, L: int) -> np.ndarray:
    z = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _sizes(rng, count: int, top: int = 4):
    return [int(rng.integers(1, top + 1)) for _ in range(count)]


# ---- symplectic families ----------------------------------------------------

def cayley_identities(rng, poison):
    worst, n = 0.0, 0
    for L in (1, 2, 3, 4):
        f = _forms(L, poison)
        C, J, G = f.C, f.J, f.G
        Cs = C.conj().T
        worst = max(worst, max_norm(C @ J @ Cs - G / 1j), max_norm(C.conj() @ J @ Cs - J / 1j))
        if f.K is not None:
            worst = max(worst, max_norm(C.conj() @ f.K @ Cs - f.K / 1j))
        worst = max(worst, max_norm(Cs @ C - np.eye(2 * L)), max_norm(J @ J + np.eye(2 * L)))
        n += 1
    return n, worst, 1e-14


def group_closure(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 20):
        f = _forms(L, poison)
        tag = "real" if n % 2 else "complex"
        a = _group_element(rng, L, f, tag)
        b = _group_element(rng, L, f, tag)
        worst = max(worst, symplectic_defect(a, tag, f), symplectic_defect(a @ b, tag, f))
        n += 1
    return n, worst, 1e-10


def cayley_conjugation(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 100):
        f = _forms(L, poison)
        t = _group_element(rng, L, f)
        c = f.C @ t @ f.C.conj().T
        worst = max(worst, symplectic_defect(t, "complex", f), lorentz_defect(c, "complex", f))
        n += 1
    return n, worst, 1e-10


def moebius_composition(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 30):
        f = _forms(L, poison)
        a = f.C @ _group_element(rng, L, f) @ f.C.conj().T
        b = f.C @ _group_element(rng, L, f) @ f.C.conj().T
        u = 0.9 * _unitary(rng, L)
        lhs = moebius(a @ b, u)
        rhs = moebius(a, moebius(b, u))
        worst = max(worst, max_norm(lhs - rhs) / max(1.0, max_norm(lhs)))
        n += 1
    return n, worst, 1e-10


def moebius_structure(rng, poison):
    """Cayley-conjugated transfer matrices keep symmetric and self-dual unitaries."""
    worst, n = 0.0, 0
    for k in range(12):
        tag = "quaternion" if k % 2 else "real"
        L = 2 * int(rng.integers(1, 3)) if tag == "quaternion" else int(rng.integers(1, 4))
        m = random_model(rng, 3, L, tag)
        f = _forms(L, poison)
        t = transfer_matrix(m, 2, rng.uniform(-2, 2))
        c = f.C @ t @ f.C.conj().T
        w = _unitary(rng, L)
        u0 = w @ w.T if tag == "real" else w @ duality_form(L).dual(w)
        u = moebius(c, u0)
        d = max_norm(u - u.T) if tag == "real" else selfdual_defect(u)
        worst = max(worst, lorentz_defect(c, tag, f), max_norm(u.conj().T @ u - np.eye(L)), d)
        n += 1
    return n, worst, 1e-9


def contraction_identity(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 50):
        f = _forms(L, poison)
        c = f.C @ _group_element(rng, L, f) @ f.C.conj().T
        A, B, C, D = split_blocks(c)
        z = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
        u = z / np.linalg.norm(z, 2) * rng.uniform(0, 1)
        x, y = C @ u + D, A @ u + B
        d = x.conj().T @ x - y.conj().T @ y - (np.eye(L) - u.conj().T @ u)
        worst = max(worst, max_norm(d) / max(1.0, max_norm(c) ** 2))
        n += 1
    return n, worst, 1e-12


def pi_round_trip(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 50):
        u = _unitary(rng, L)
        frame = inverse_Pi(u)
        worst = max(worst, max_norm(stereo_Pi(frame) - u))
        g = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
        back = inverse_Pi(stereo_Pi(frame.phi @ g)).phi
        worst = max(worst, float(L - wronskian_intersection(frame.phi, back)))
        n += 1
    return n, worst, 1e-10


def rn_cocycle(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 50):
        f = _forms(L, poison)
        t = _group_element(rng, L, f)
        frame = inverse_Pi(_unitary(rng, L)).phi
        lhs, rhs = rn_cocycle_sides(t, frame)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
        n += 1
    return n, worst, 1e-9


# ---- Jacobi families ----------------------------------------------------------

def _models(rng, count: int, top_N: int = 12):
    for k in range(count):
        tag = CLASSES[k % 3]
        L = 2 * int(rng.integers(1, 3)) if tag == "quaternion" else int(rng.integers(1, 4))
        N = int(rng.integers(2, top_N + 1))
        yield random_model(rng, N, L, tag, boundary=bool(k % 2))


def _complex_energy(rng, model):
    R = max(1.0, spectral_radius(model))
    return complex(rng.uniform(-R, R), rng.uniform(0.05, 1.0) * R)


def dean_martin(rng, poison):
    worst, n = 0.0, 0
    for m in _models(rng, 30):
        worst = max(worst, dean_martin_check(m, _complex_energy(rng, m))[2])
        n += 1
    return n, worst, 1e-8


def green_corner_check(rng, poison):
    worst, n = 0.0, 0
    for m in _models(rng, 30):
        E = _complex_energy(rng, m)
        a, b = green_corner(m, E), green_dense(m, E)
        worst = max(worst, max_norm(a - b) / max_norm(b))
        n += 1
    return n, worst, 1e-8


def charpoly(rng, poison):
    worst, n = 0.0, 0
    for m in _models(rng, 30):
        worst = max(worst, charpoly_check(m, _complex_energy(rng, m))[2])
        n += 1
    return n, worst, 1e-8


def interlacing(rng, poison):
    worst, n = 0.0, 0
    for m in _models(rng, 30):
        _, w = interlacing_check(m)
        worst = max(worst, w / max(1.0, spectral_radius(m)))
        n += 1
    return n, max(worst, 0.0), 1e-10


def symmetry_preservation(rng, poison):
    worst, n = 0.0, 0
    for m in _models(rng, 24, top_N=40):
        if m.field == "complex":
            continue
        E = rng.uniform(-1, 1) * max(1.0, spectral_radius(m))
        for st in pruefer_flow(m, E):
            u = st.U
            d = max_norm(u - u.T) if m.field == "real" else selfdual_defect(u)
            worst = max(worst, d, max_norm(u.conj().T @ u - np.eye(m.L)))
        n += 1
    return n, worst, 1e-10


def monotonicity(rng, poison):
    """Smallest eigenvalue of the phase velocity must be positive; defect = max(0, -min)."""
    worst, n = 0.0, 0
    for m in _models(rng, 20):
        R = max(1.0, spectral_radius(m))
        table = model_table(m)
        _, S = states_and_velocity(m, rng.uniform(-1.2 * R, 1.2 * R, 8), table)
        w = np.linalg.eigvalsh(S)
        worst = max(worst, float(np.max(-w[:, 0])))
        n += 1
    return n, worst, 0.0


def theta_limits(rng, poison):
    """|E| Theta(E) tends to 2L below the spectrum and 2 pi N L - Theta does the same above."""
    worst, n = 0.0, 0
    for m in _models(rng, 20):
        s = 1e6 * max(1.0, spectral_radius(m))
        th, _ = telescoped_rotation(m, [-s, s])
        top = 2 * np.pi * m.N * m.L
        worst = max(worst, abs(th[0] * s / (2 * m.L) - 1), abs((top - th[1]) * s / (2 * m.L) - 1))
        n += 1
    return n, worst, 1e-3


def oscillation_count(rng, poison):
    worst, n = 0.0, 0
    for m in _models(rng, 12, top_N=8):
        ev = direct_spectrum(m)
        E = float(rng.uniform(ev[0] - 0.5, ev[-1] + 0.5))
        if np.min(np.abs(ev - E)) < 1e-6:
            continue
        try:
            c = count_below(m, E)
        except BoundaryAmbiguity:
            continue
        worst = max(worst, float(abs(c - int(np.sum(ev <= E)))))
        n += 1
    return n, worst, 0.0


def winding_integer(rng, poison):
    worst, n = 0.0, 0
    for L in _sizes(rng, 8):
        frame = inverse_Pi(_unitary(rng, L)).phi
        tracks, fn = rotation_loop(frame)
        w = path_winding(tracks, fn)
        worst = max(worst, abs(w - round(w)), abs(w - L))
        n += 1
    return n, worst, 1e-8


PROPERTIES = {
    "cayley_identities": cayley_identities,
    "group_closure": group_closure,
    "cayley_conjugation": cayley_conjugation,
    "moebius_composition": moebius_composition,
    "moebius_structure": moebius_structure,
    "contraction_identity": contraction_identity,
    "pi_round_trip": pi_round_trip,
    "rn_cocycle": rn_cocycle,
    "dean_martin": dean_martin,
    "green_corner": green_corner_check,
    "charpoly": charpoly,
    "interlacing": interlacing,
    "symmetry_preservation": symmetry_preservation,
    "monotonicity": monotonicity,
    "theta_limits": theta_limits,
    "oscillation_count": oscillation_count,
    "winding_integer": winding_integer,
}


def run_suite(seed: int = 0, only: list[str] | None = None, poison: bool = False) -> list[PropertyResult]:
    """Run the selected properties in a fixed order, each from its own seeded stream."""
    names = list(PROPERTIES) if not only else list(only)
    unknown = [x for x in names if x not in PROPERTIES]
    if unknown:
        raise KeyError(f"unknown properties: {', '.join(unknown)}")
    out = []
    for i, name in enumerate(PROPERTIES):
        if name not in names:
            continue
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        try:
            samples, defect, thr = PROPERTIES[name](rng, poison)
        except (ArithmeticError, np.linalg.LinAlgError, ValueError):
            samples, defect, thr = 0, float("inf"), 0.0
        out.append(PropertyResult(name, int(samples), float(defect), float(thr)))
    return out
