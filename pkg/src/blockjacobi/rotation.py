"""Matrix Pruefer phases: flows, eigenphase tracking, counting and localization.

For a model and an energy E the frame (1; -zeta) is pushed through all
transfer matrices and mapped to a unitary U_N(E).  Its eigenphases increase
with E, start at 0 below the spectrum and reach 2 pi N in total above it;
every upward passage of a phase through pi is an eigenvalue.
A symplectic gauge ``[[1, xi], [0, 1]]`` moves the right boundary condition
to the Dirichlet one, so that pi-crossings always mark eigenvalues of the
model as given.
"""
from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from ._pyflow import imtrlog
from .jacobi import (JacobiModel, end_frame, gershgorin_bounds, initial_frame,
                     propagate_frame, transfer_matrix, transfer_parts)
from .symplectic import (canonical_forms, rotation_path, shear, split_blocks, stereo_Pi,
                         winding_increment, wronskian)

TWO_PI = 2 * np.pi
EXACT_ASSIGNMENT_MAX_L = 8

__all__ = [
    "SiteTable",
    "PrueferState",
    "PhaseTracks",
    "Crossing",
    "SpectralEntry",
    "BoundaryAmbiguity",
    "model_gauge",
    "model_table",
    "pruefer_flow",
    "final_states",
    "telescoped_rotation",
    "track_path",
    "sweep",
    "count_below",
    "spectrum_by_rotation",
    "velocity_matrix",
    "intersection_index",
    "wrap_below",
    "states_and_velocity",
    "wronskian_multiplicity",
    "cut_wronskians",
    "count_from_rotation",
    "frame_unitary",
    "path_winding",
    "rotation_loop",
    "transfer_loop",
    "default_range",
]


class BoundaryAmbiguity(ArithmeticError):
    """An eigenvalue sits within the energy tolerance of the query energy."""

    def __init__(self, energy: float, candidates: tuple[int, int]):
        self.energy = energy
        self.candidates = candidates
        super().__init__(f"eigenvalue within tolerance of E={energy!r}; count is one of {candidates}")


def wrap_below(theta, phi: float):
    """Representative of theta in [phi - 2pi, phi)."""
    base = phi - TWO_PI
    return np.mod(np.asarray(theta) - base, TWO_PI) + base


def _boundary_shift(phi: float) -> float:
    # cot(phi/2), exactly zero at the Dirichlet phase
    return 0.0 if phi == np.pi else float(1.0 / np.tan(phi / 2))


def model_gauge(model: JacobiModel, phi: float = np.pi) -> np.ndarray:
    """Shear that moves the boundary xi + cot(phi/2) onto the Dirichlet plane."""
    return shear(model.xi + _boundary_shift(phi) * np.eye(model.L))


class SiteTable:
    """Cayley-conjugated affine parts of transfer matrices for a set of site types.

    ``P`` and ``Q`` are (S, 2L, 2L) with transfer matrix E P + Q; in the gauge
    ``g`` the Lorentz matrix of type s at energy E is E Pc[s] + Qc[s] with
    Pc = C g P g^{-1} C^*.
    """

    def __init__(self, P: np.ndarray, Q: np.ndarray, gauge: np.ndarray | None = None):
        P = np.asarray(P, dtype=complex)
        Q = np.asarray(Q, dtype=complex)
        L = P.shape[-1] // 2
        self.L = L
        C = canonical_forms(L).C
        g = np.eye(2 * L) if gauge is None else np.asarray(gauge, dtype=complex)
        left = C @ g
        right = np.linalg.inv(g) @ C.conj().T
        self.gauge = g
        self.Pc = left @ P @ right
        self.Qc = left @ Q @ right
        self._branch_ready = False

    @property
    def size(self) -> int:
        return self.Pc.shape[0]

    def lorentz(self, energies) -> np.ndarray:
        E = np.asarray(energies, dtype=complex).reshape(-1, 1, 1, 1)
        return E * self.Pc[None] + self.Qc[None]

    def _prepare_branch(self):
        if self._branch_ready:
            return
        L = self.L
        A1, B1, C1, D1 = split_blocks(self.Pc)
        A0, _, _, D0 = split_blocks(self.Qc)
        for m in (A1, D1):
            s = np.linalg.svd(m, compute_uv=False)
            if np.any(s[..., -1] <= 1e-12 * s[..., 0]):
                raise ValueError("gauge makes the leading block singular; "
                                 "telescoped phases need an invertible leading block")
        self.roots_a = np.linalg.eigvals(-np.linalg.solve(A1, A0))
        self.roots_d = np.linalg.eigvals(-np.linalg.solve(D1, D0))
        self.yb_inf = np.linalg.solve(A1, B1)
        self.yc_inf = np.linalg.solve(D1, C1)
        self._branch_ready = True
        self.g_inf_identity = self.g_inf(np.arange(self.size), np.eye(L))

    @staticmethod
    def branch(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        A, B, C, D = split_blocks(M)
        return np.linalg.solve(A, B), np.linalg.solve(D, C)

    def site_phase(self, energies) -> np.ndarray:
        """Continuous arg det(A) - arg det(D), zero at E = -infinity; shape (K, S)."""
        self._prepare_branch()
        E = np.asarray(energies, dtype=float).reshape(-1, 1, 1)

        def part(roots):
            return np.sum(np.angle(E - roots[None]) + np.pi * np.sign(roots.imag)[None], axis=-1)

        return part(self.roots_a) - part(self.roots_d)

    def g_inf(self, types, U) -> np.ndarray:
        """Trace-log phase of the given site types at E = -infinity with incoming state U."""
        self._prepare_branch()
        Uh = np.conj(np.swapaxes(np.asarray(U, dtype=complex), -1, -2))
        return imtrlog(self.yb_inf[types] @ Uh) - imtrlog(self.yc_inf[types] @ U)


def model_table(model: JacobiModel, gauge: np.ndarray | None = None) -> SiteTable:
    parts = [transfer_parts(model, n) for n in range(1, model.N + 1)]
    P = np.array([p for p, _ in parts])
    Q = np.array([q for _, q in parts])
    return SiteTable(P, Q, gauge)


def initial_state(model: JacobiModel, gauge: np.ndarray | None = None) -> np.ndarray:
    phi = initial_frame(model)
    if gauge is not None:
        phi = gauge @ phi
    return stereo_Pi(phi)


@dataclass
class PrueferState:
    U: np.ndarray
    n: int
    E: float
    field: str = "complex"
    gauge: np.ndarray | None = None


def pruefer_flow(model: JacobiModel, E: float, gauge: np.ndarray | None = None) -> list[PrueferState]:
    """U_0 ... U_N at a real energy, one Moebius step per site."""
    table = model_table(model, gauge)
    M = table.lorentz([E])[0]
    u = initial_state(model, gauge)
    out = [PrueferState(u, 0, E, model.field, gauge)]
    for n in range(model.N):
        A, B, C, D = split_blocks(M[n])
        u = np.linalg.solve((C @ u + D).T, (A @ u + B).T).T
        out.append(PrueferState(u, n + 1, E, model.field, gauge))
    return out


def frame_unitary(model: JacobiModel, E: float, gauge: np.ndarray | None = None) -> np.ndarray:
    """U_N from direct frame propagation, independent of the Moebius flow."""
    phi, _ = propagate_frame(model, E)
    if gauge is not None:
        phi = gauge @ phi
    return stereo_Pi(phi)


def final_states(model: JacobiModel, energies, gauge: np.ndarray | None = None,
                 table: SiteTable | None = None) -> np.ndarray:
    """U_N at every energy, shape (K, L, L)."""
    table = table or model_table(model, gauge)
    E = np.asarray(energies, dtype=float)
    M = table.lorentz(E)
    U0 = initial_state(model, table.gauge)
    idx = np.arange(model.N)[None]
    U, _, _ = kernels.propagate(M, None, None, idx, U0)
    return U[:, 0]


def states_and_velocity(model: JacobiModel, energies, table: SiteTable) -> tuple[np.ndarray, np.ndarray]:
    """U_N(E) together with its phase velocity (1/i) U^* dU/dE, differentiated exactly.

    The derivative is carried through every Moebius step alongside U, so the
    velocity needs no finite-difference step.
    """
    E = np.asarray(energies, dtype=float)
    L = table.L
    M = table.lorentz(E)
    dA, dB, dC, dD = split_blocks(table.Pc)
    U = np.broadcast_to(initial_state(model, table.gauge), (len(E), L, L)).copy()
    dU = np.zeros_like(U)
    for n in range(model.N):
        A, B, C, D = split_blocks(M[:, n])
        X = C @ U + D
        Y = A @ U + B
        dX = dC[n] @ U + C @ dU + dD[n]
        dY = dA[n] @ U + A @ dU + dB[n]
        Xt = np.swapaxes(X, 1, 2)
        U = np.swapaxes(np.linalg.solve(Xt, np.swapaxes(Y, 1, 2)), 1, 2)
        dU = np.swapaxes(np.linalg.solve(Xt, np.swapaxes(dY - U @ dX, 1, 2)), 1, 2)
    S = -1j * np.conj(np.swapaxes(U, 1, 2)) @ dU
    return U, (S + np.conj(np.swapaxes(S, 1, 2))) / 2


def telescoped_rotation(model: JacobiModel, energies, gauge: np.ndarray | None = None,
                        per_site: bool = False, table: SiteTable | None = None):
    """Total rotation Theta(E) as a sum of per-site phases, without an energy sweep.

    Each site contributes arg det(A) - arg det(D) (continued from E = -infinity
    through its pencil roots) plus principal trace logarithms of the two
    contractions A^{-1} B U^* and D^{-1} C U, minus their values at -infinity.
    """
    table = table or model_table(model, gauge)
    table._prepare_branch()
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    M = table.lorentz(E)
    Yb, Yc = table.branch(M)
    U0 = initial_state(model, table.gauge)
    N = model.N
    g_inf = table.g_inf_identity.copy()
    g_inf[0] = table.g_inf(np.array([0]), U0[None])[0]
    if per_site:
        U, _, g = kernels.propagate(M, Yb, Yc, np.arange(N)[None], U0, block=1, trlog=True)
        contrib = table.site_phase(E) + g[:, 0, :] - g_inf[None]
        return contrib.sum(axis=1), contrib, U[:, 0]
    U, _, g = kernels.propagate(M, Yb, Yc, np.arange(N)[None], U0, trlog=True)
    theta = table.site_phase(E).sum(axis=1) + g[:, 0, 0] - g_inf.sum()
    return theta, U[:, 0]


def count_from_rotation(theta: float, U: np.ndarray, phi: float = np.pi, check: float = 1e-6) -> int:
    """Number of phi-crossings given the absolute total rotation and the final unitary."""
    w = wrap_below(np.angle(np.linalg.eigvals(U)), phi)
    x = (theta - np.sum(w)) / TWO_PI
    n = int(np.rint(x))
    if abs(x - n) > check:
        raise ArithmeticError(f"rotation count is not integral: {x!r}")
    return n


# ---- eigenphase tracking ----------------------------------------------------

def _circ(x):
    return (np.asarray(x) + np.pi) % TWO_PI - np.pi


def _match(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Signed displacement d with a + d a permutation of b (mod 2pi), minimal total |d|."""
    L = len(a)
    if L == 1:
        return _circ(b - a)
    d = _circ(b[None, :] - a[:, None])
    cost = np.abs(d)
    if L <= EXACT_ASSIGNMENT_MAX_L:
        rows, cols = linear_sum_assignment(cost)
        out = np.empty(L)
        out[rows] = d[rows, cols]
        return out
    out = np.empty(L)
    free_r = np.ones(L, bool)
    free_c = np.ones(L, bool)
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), L)
        if free_r[i] and free_c[j]:
            out[i] = d[i, j]
            free_r[i] = free_c[j] = False
    return out


@dataclass(frozen=True)
class Crossing:
    energy: float
    multiplicity: int
    direction: int
    width: float = 0.0


@dataclass
class PhaseTracks:
    """Matched eigenphase curves on an adaptive grid.

    ``theta[k, l]`` are unwrapped phases anchored in [phi - 2pi, phi) at the
    first grid point; ``Theta`` is the rotation accumulated from the first
    grid point.  ``counts[k]`` is the number of phi-crossings up to grid[k]
    obtained from the determinant phase alone (independent of matching).
    """

    grid: np.ndarray
    theta: np.ndarray
    Theta: np.ndarray
    det_Theta: np.ndarray
    counts: np.ndarray
    crossings: list[Crossing]
    phi: float
    flags: list[str] = dc_field(default_factory=list)
    unresolved: np.ndarray | None = None

    @property
    def L(self) -> int:
        return self.theta.shape[1]

    @property
    def anchor(self) -> float:
        return float(np.sum(self.theta[0]))

    @property
    def Theta_absolute(self) -> np.ndarray:
        return self.anchor + self.Theta

    def min_step(self, resolved_only: bool = False) -> float:
        """Smallest track increment over grid steps.

        Steps left unresolved at the energy floor carry phases that are not
        determined to working precision; ``resolved_only`` skips them.
        """
        if len(self.grid) < 2:
            return 0.0
        d = np.diff(self.theta, axis=0)
        if resolved_only and self.unresolved is not None:
            d = d[~self.unresolved]
        return float(np.min(d)) if d.size else 0.0

    def crossing_energies(self) -> np.ndarray:
        return np.array([c.energy for c in self.crossings for _ in range(c.multiplicity)])


class _Path:
    """Evaluations of a unitary-valued path on a growing set of parameters.

    ``fn`` returns either the unitaries or a pair (unitaries, phase velocity).
    With a velocity the step control bounds the largest eigenphase speed,
    which rules out steps that silently wrap a phase by a full turn.
    """

    def __init__(self, fn, phi):
        self.fn = fn
        self.phi = phi

    def eval(self, t):
        out = self.fn(np.asarray(t, dtype=float))
        if isinstance(out, tuple):
            U, S = out
            speed = np.max(np.abs(np.linalg.eigvalsh(S)), axis=-1)
        else:
            U, speed = out, None
        detphase = np.angle(np.linalg.det(U))
        w = wrap_below(np.angle(np.linalg.eigvals(U)), self.phi)
        return U, detphase, w, speed


def _monotone_lift(prev: np.ndarray, new: np.ndarray, total: float) -> np.ndarray:
    """Lift of the phases ``new`` that rises by ``total`` in sum, assigned in sorted order.

    Along a path with positive phase velocity each sorted eigenphase is
    nondecreasing, and the sorted new phases form L consecutive lifts of the
    new phase set; the certified total rotation selects the window.
    """
    L = len(prev)
    order = np.argsort(prev, kind="stable")
    lo = prev[order[0]]
    base = np.sort(lo + np.mod(new - lo, TWO_PI))
    start = int(np.rint((prev.sum() + total - base.sum()) / TWO_PI))
    idx = np.arange(start, start + L)
    out = np.empty(L)
    out[order] = base[idx % L] + TWO_PI * (idx // L)
    return out


def track_path(fn, params, phi: float = np.pi, energy_tol: float | None = None,
               cluster_tol: float | None = None, max_rounds: int = 60,
               min_step_rel: float = 1e-13, max_disp: float = np.pi / 4,
               max_det: float = np.pi / 2, certify=None, monotone: bool = False) -> PhaseTracks:
    """Track the eigenphases of ``fn(t)`` (a batch of L x L unitaries) along t.

    Steps are bisected until each phase moves by less than ``max_disp``, the
    determinant phase by less than ``max_det``, no phase moves backwards and,
    when ``fn`` also returns the phase velocity, the fastest phase cannot
    cover ``max_disp`` within the step.  The backwards rule applies only to
    ``monotone`` paths.  These local rules cannot see a
    resonance narrower than the step that wraps a phase by a full turn, so
    ``certify(t)``, if given, supplies the absolute rotation at each node and
    every step whose swept increment disagrees with it by a multiple of 2 pi
    is refined as well.  Crossings of ``phi`` are then localized by bisection
    on the determinant-based count.
    """
    path = _Path(fn, phi)
    t = np.array(sorted(set(np.asarray(params, dtype=float).tolist())))
    span = t[-1] - t[0]
    scale = max(span, float(np.max(np.abs(t))))
    if energy_tol is None:
        energy_tol = 1e-12 * scale
    if cluster_tol is None:
        cluster_tol = max(1e-9 * scale, 10 * energy_tol)
    U, dph, w, speed = path.eval(t)
    flags: list[str] = []
    frozen = np.zeros(len(t) - 1, bool)
    cert = None if certify is None else np.asarray(certify(t), dtype=float)
    converged = False
    dmax = np.full(len(t) - 1, np.nan)
    dmin = np.full(len(t) - 1, np.nan)
    for _ in range(max_rounds):
        ddet = _circ(np.diff(dph))
        for k in np.nonzero(np.isnan(dmax))[0]:
            d = _match(w[k], w[k + 1])
            dmax[k] = np.max(np.abs(d))
            dmin[k] = np.min(d)
        bad = (dmax > max_disp) | (np.abs(ddet) > max_det)
        if monotone:
            bad |= dmin < -1e-9
        if speed is not None:
            bad |= np.diff(t) * np.maximum(speed[:-1], speed[1:]) > max_disp
        if cert is not None:
            bad |= np.rint((np.diff(cert) - ddet) / TWO_PI) != 0
        bad &= ~frozen
        tiny = np.diff(t) < min_step_rel * span
        if np.any(bad & tiny):
            for k in np.nonzero(bad & tiny)[0]:
                flags.append(f"unresolved step at [{t[k]!r}, {t[k + 1]!r}]")
            frozen |= bad & tiny
            bad &= ~tiny
        if not np.any(bad):
            converged = True
            break
        k = np.nonzero(bad)[0]
        mid = (t[k] + t[k + 1]) / 2
        Um, dm, wm, sm = path.eval(mid)
        t = np.insert(t, k + 1, mid)
        if speed is not None:
            speed = np.insert(speed, k + 1, sm)
        if cert is not None:
            cert = np.insert(cert, k + 1, np.asarray(certify(mid), dtype=float))
        U = np.insert(U, k + 1, Um, axis=0)
        dph = np.insert(dph, k + 1, dm)
        w = np.insert(w, k + 1, wm, axis=0)
        frozen = np.insert(frozen, k + 1, frozen[k])
        dmax[k] = dmin[k] = np.nan
        dmax = np.insert(dmax, k + 1, np.nan)
        dmin = np.insert(dmin, k + 1, np.nan)
    if not converged:
        flags.append("refinement did not converge")
    K, L = w.shape
    ddet = _circ(np.diff(dph))
    extra = np.zeros(K - 1, int)
    if cert is not None:
        extra = np.rint((np.diff(cert) - ddet) / TWO_PI).astype(int)
    turned = np.zeros(K - 1, bool)
    theta = np.empty((K, L))
    theta[0] = w[0]
    for k in range(K - 1):
        d = _match(wrap_below(theta[k], phi), w[k + 1])
        theta[k + 1] = theta[k] + d
        turns = 0 if cert is None else int(np.rint((cert[k + 1] - cert[k] - d.sum()) / TWO_PI))
        if monotone and cert is not None and (turns or frozen[k]):
            # inside an unresolved step the displacement matching can pair phases
            # backwards; the sorted assignment keeps every track nondecreasing
            theta[k + 1] = _monotone_lift(theta[k], w[k + 1], cert[k + 1] - cert[k])
            turned[k] = bool(turns)
            if turns:
                flags.append(f"sub-resolution turn ({turns}) at [{t[k]!r}, {t[k + 1]!r}]")
        elif turns:
            turned[k] = True
            if not frozen[k]:
                flags.append(f"certified rotation disagrees on a resolved step at {t[k]!r}")
            # phases wrapped by whole turns inside a step below the resolution
            # floor; which tracks turned cannot be observed, so the turns go to
            # the tracks closest below phi
            order = np.argsort(-wrap_below(theta[k], phi), kind="stable")
            for i in range(abs(turns)):
                theta[k + 1, order[i % L]] += TWO_PI * np.sign(turns)
            flags.append(f"sub-resolution turn ({turns}) at [{t[k]!r}, {t[k + 1]!r}]")
    Theta = np.sum(theta - theta[0], axis=1)
    det_Theta = np.concatenate([[0.0], np.cumsum(ddet + TWO_PI * extra)])
    if np.max(np.abs(Theta - det_Theta)) > 1e-8:
        flags.append("track sum disagrees with determinant phase")
    x = (np.sum(w[0]) + det_Theta - np.sum(w, axis=1)) / TWO_PI
    counts = np.rint(x).astype(int)
    if np.max(np.abs(x - counts)) > 1e-6:
        flags.append("non-integral crossing count")
    per_track = np.floor((theta - phi) / TWO_PI).astype(int)
    located: list[float] = []
    jumps = np.diff(counts)
    steps = np.nonzero(jumps != 0)[0]
    if len(steps):
        dtrack = np.diff(per_track, axis=0)[steps]
        if monotone and (np.any(dtrack < 0) or np.any(jumps[steps] < 0)):
            flags.append("downward crossing detected")
        if np.any(dtrack.sum(axis=1) != jumps[steps]):
            flags.append("track crossings disagree with determinant count")
        rough_mask = (extra != 0) | turned
        smooth = steps[~rough_mask[steps]]
        rough = steps[rough_mask[steps]]
        located = _localize(path, t, dph, w, counts, smooth, energy_tol)
        if len(rough):
            located += _localize_certified(path, certify, t, counts, rough, energy_tol)
    crossings = []
    for sign in (1, -1):
        here = sorted(e for e, d in located if d == sign)
        crossings += [Crossing(e, m, sign, wd) for e, m, wd in _cluster(here, cluster_tol)]
    crossings.sort(key=lambda c: c.energy)
    return PhaseTracks(t, theta, Theta, det_Theta, counts, crossings, phi, flags, frozen.copy())


def _targets(t, counts, steps):
    lo, hi, k0, n0, need, sign = [], [], [], [], [], []
    for k in steps:
        jump = int(counts[k + 1] - counts[k])
        for j in range(1, abs(jump) + 1):
            lo.append(t[k])
            hi.append(t[k + 1])
            k0.append(k)
            n0.append(counts[k])
            need.append(j)
            sign.append(1 if jump > 0 else -1)
    return (np.array(lo, dtype=float), np.array(hi, dtype=float), np.array(k0, dtype=int),
            np.array(n0, dtype=int), np.array(need, dtype=int), np.array(sign, dtype=int))


def _bisect(lo, hi, n0, need, sign, count_at, tol):
    # shrink [lo, hi] around the point where sign * (count - n0) first reaches need
    while True:
        mid = (lo + hi) / 2
        active = ((hi - lo) > tol) & (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        a = np.nonzero(active)[0]
        reached = sign[a] * (count_at(mid[a], a) - n0[a]) >= need[a]
        hi[a[reached]] = mid[a][reached]
        lo[a[~reached]] = mid[a][~reached]
    return list(zip(((lo + hi) / 2).tolist(), sign.tolist()))


def _localize(path, t, dph, w, counts, steps, tol):
    """Bisection on the determinant-phase count inside resolved steps."""
    lo, hi, k0, n0, need, sign = _targets(t, counts, steps)
    ref_det = dph[k0]
    ref_w = np.sum(w[k0], axis=1)

    def count_at(E, a):
        _, dm, wm, _ = path.eval(E)
        x = (ref_w[a] + _circ(dm - ref_det[a]) - np.sum(wm, axis=1)) / TWO_PI
        return n0[a] + np.rint(x).astype(int)

    return _bisect(lo, hi, n0, need, sign, count_at, tol)


def _localize_certified(path, certify, t, counts, steps, tol):
    """Bisection on the certified count, for steps the phase flow cannot resolve."""
    lo, hi, _, n0, need, sign = _targets(t, counts, steps)

    def absolute(E):
        _, _, wm, _ = path.eval(E)
        return np.rint((np.asarray(certify(E)) - np.sum(wm, axis=1)) / TWO_PI).astype(int)

    # the certified count is absolute; align it with the sweep count at the step start
    offset = absolute(lo) - n0
    return _bisect(lo, hi, n0, need, sign, lambda E, a: absolute(E) - offset[a], tol)


def _cluster(energies, tol):
    """Group sorted energies whose consecutive gaps are at most ``tol``."""
    out = []
    group: list[float] = []
    for e in list(energies) + [np.inf]:
        if group and e - group[-1] > tol:
            out.append((float(np.mean(group)), len(group), float(group[-1] - group[0])))
            group = []
        group.append(e)
    return out


def default_range(model: JacobiModel, phi: float = np.pi) -> tuple[float, float]:
    shifted = model.with_xi(model.xi + _boundary_shift(phi) * np.eye(model.L))
    return gershgorin_bounds(shifted)


def sweep(model: JacobiModel, E_range=None, phi: float = np.pi, energy_tol: float | None = None,
          cluster_tol: float | None = None, grid: int | None = None,
          certified: bool = True) -> PhaseTracks:
    """Eigenphase tracks of U_N(E) in the boundary gauge of the model.

    Upward crossings of ``phi`` are the eigenvalues of the model with the
    right boundary matrix xi replaced by xi + cot(phi/2).  With ``certified``
    the step control is backed by the telescoped rotation at every node.
    """
    lo, hi = default_range(model, phi) if E_range is None else map(float, E_range)
    if not hi > lo:
        raise ValueError("empty energy range")
    gauge = model_gauge(model)
    table = model_table(model, gauge)
    n0 = grid or 4 * model.N * model.L + 64
    scale = max(hi - lo, abs(lo), abs(hi))
    if energy_tol is None:
        energy_tol = 1e-12 * scale
    certify = None
    if certified:
        def certify(E):
            return telescoped_rotation(model, E, table=table)[0]

    return track_path(lambda E: states_and_velocity(model, E, table),
                      np.linspace(lo, hi, n0), phi, energy_tol, cluster_tol, certify=certify,
                      monotone=True)


def count_below(model: JacobiModel, E: float, phi: float = np.pi, method: str = "sweep",
                energy_tol: float | None = None) -> int:
    """Number of eigenvalues <= E of the model (boundary xi + cot(phi/2) on the right)."""
    lo, hi = default_range(model, phi)
    NL = model.N * model.L
    if E < lo:
        return 0
    if E > hi:
        return NL
    scale = max(hi - lo, abs(lo), abs(hi))
    tol = 1e-12 * scale if energy_tol is None else energy_tol
    if method == "telescoped":
        g = model_gauge(model, phi)
        theta, U = telescoped_rotation(model, [E], g)
        U = U[0]
        ph = np.angle(np.linalg.eigvals(U))
        if np.min(np.abs(_circ(ph - np.pi))) < 1e-10:
            n = count_from_rotation(theta[0] + 1e-9, U)
            raise BoundaryAmbiguity(E, (n - 1, n))
        return count_from_rotation(theta[0], U)
    if method != "sweep":
        raise ValueError(f"unknown counting method {method!r}")
    tracks = sweep(model, (lo, E), phi, energy_tol=tol)
    n = int(tracks.counts[-1])
    if tracks.crossings and tracks.crossings[-1].energy > E - 10 * tol:
        m = tracks.crossings[-1].multiplicity
        raise BoundaryAmbiguity(E, (n - m, n))
    return n


@dataclass(frozen=True)
class SpectralEntry:
    energy: float
    multiplicity: int
    wronskian_multiplicity: int
    flagged: bool = False


def cut_wronskians(model: JacobiModel, energies) -> np.ndarray:
    """Wronskians of the left and right solution frames at every cut m = 0..N.

    The left frame starts from the left boundary condition and the right
    frame from the right one; both are orthonormalized at each cut.  The
    unnormalized Wronskian does not depend on m, so all returned matrices have
    the same rank; the one taken where the solution lives is best conditioned.
    Shape (K, N + 1, L, L) for K energies.
    """
    E = np.atleast_1d(np.asarray(energies, dtype=float))[:, None, None]
    N, L = model.N, model.L
    J = canonical_forms(L).J
    parts = [transfer_parts(model, n) for n in range(1, N + 1)]
    left = [np.broadcast_to(np.linalg.qr(initial_frame(model))[0], (E.shape[0], 2 * L, L))]
    for P, Q in parts:
        left.append(np.linalg.qr((E * P + Q) @ left[-1])[0])
    right = [np.broadcast_to(np.linalg.qr(end_frame(model))[0], (E.shape[0], 2 * L, L))]
    for P, Q in reversed(parts):
        right.append(np.linalg.qr(np.linalg.solve(E * P + Q, right[-1]))[0])
    right.reverse()
    lf = np.stack(left, axis=1)
    rf = np.stack(right, axis=1)
    return np.conj(np.swapaxes(rf, -1, -2)) @ J @ lf


def wronskian_multiplicity(model: JacobiModel, E: float, uncertainty: float,
                           kernel_tol: float = 1e-8, step: float | None = None) -> int:
    """Kernel dimension of the boundary Wronskian at an energy known to +-uncertainty.

    At each cut a singular value counts as zero if it lies below ``kernel_tol``
    plus the energy sensitivity of that cut's Wronskian times ``uncertainty``.
    The best-conditioned cut decides.
    """
    if step is None:
        lo, hi = gershgorin_bounds(model)
        step = 1e-8 * max(hi - lo, abs(lo), abs(hi))
    W_mid, W_up, W_down = cut_wronskians(model, [E, E + step, E - step])
    slope = np.linalg.norm(W_up - W_down, ord=2, axis=(1, 2)) / (2 * step)
    sv = np.linalg.svd(W_mid, compute_uv=False)
    thr = kernel_tol + slope * uncertainty
    return int(np.max(np.sum(sv <= thr[:, None], axis=1)))


def spectrum_by_rotation(model: JacobiModel, tol: float | None = None,
                         cluster_tol: float | None = None, kernel_tol: float = 1e-8):
    """All eigenvalues with multiplicities from pi-crossings of the eigenphases.

    Each multiplicity is cross-checked against the kernel dimension of the
    Wronskian between the left and right boundary frames at the located energy.
    """
    lo, hi = default_range(model)
    scale = max(hi - lo, abs(lo), abs(hi))
    tol = 1e-12 * scale if tol is None else float(tol)
    tracks = sweep(model, energy_tol=tol, cluster_tol=cluster_tol)
    out = []
    for c in tracks.crossings:
        k = wronskian_multiplicity(model, c.energy, 4 * tol + c.width, kernel_tol, 1e-8 * scale)
        out.append(SpectralEntry(c.energy, c.multiplicity, k, flagged=k != c.multiplicity))
    return out, tracks


def velocity_matrix(model: JacobiModel, E: float, h: float | None = None,
                    gauge: np.ndarray | None = None) -> np.ndarray:
    """(1/i) U^* dU/dE by central differences, made selfadjoint."""
    if model.N < 2:
        raise ValueError("velocity matrix needs N >= 2")
    lo, hi = gershgorin_bounds(model)
    scale = max(abs(lo), abs(hi))
    h = 1e-6 * scale if h is None else float(h)
    if h < 1e-12 * scale:
        raise ValueError("finite-difference step below the precision floor")
    g = model_gauge(model) if gauge is None else gauge
    U = final_states(model, [E - h, E, E + h], g)
    S = U[1].conj().T @ (U[2] - U[0]) / (2j * h)
    return (S + S.conj().T) / 2


def intersection_index(tracks: PhaseTracks, phi: float | None = None) -> int:
    """Signed number of crossings of phi along the tracked path."""
    phi = tracks.phi if phi is None else phi
    start = np.floor((tracks.theta[0] - phi) / TWO_PI)
    end = np.floor((tracks.theta[-1] - phi) / TWO_PI)
    return int(np.sum(end - start))


def path_winding(tracks: PhaseTracks, fn) -> float:
    """Winding number of det along the tracked path, summed from winding_increment."""
    U = fn(tracks.grid)
    total = sum(winding_increment(U[k], U[k + 1]) for k in range(len(U) - 1))
    return total / TWO_PI


def rotation_loop(frame, phi: float = np.pi, points: int = 64) -> tuple[PhaseTracks, callable]:
    """Track Pi(R_eta frame) for eta in [0, pi], a closed loop of Lagrangian planes."""
    frame = np.asarray(frame, dtype=complex)
    L = frame.shape[1]

    def fn(etas):
        return np.array([stereo_Pi(rotation_path(e, L) @ frame) for e in np.atleast_1d(etas)])

    return track_path(fn, np.linspace(0.0, np.pi, points), phi), fn


def transfer_loop(P, Q, frame, phi: float = np.pi, points: int = 64,
                  reverse: bool = False) -> tuple[PhaseTracks, callable]:
    """Track the plane (E P + Q) frame as E runs once around the real projective line.

    Homogeneous coordinates E = tan(s), s in [-pi/2, pi/2], give the frame
    (sin s P + cos s Q) frame, which spans the same plane and closes up.
    """
    P = np.asarray(P, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    frame = np.asarray(frame, dtype=complex)
    sign = -1.0 if reverse else 1.0

    def fn(ss):
        out = []
        for s in np.atleast_1d(ss):
            s = sign * s
            out.append(stereo_Pi((np.sin(s) * P + np.cos(s) * Q) @ frame))
        return np.array(out)

    return track_path(fn, np.linspace(-np.pi / 2, np.pi / 2, points), phi), fn
