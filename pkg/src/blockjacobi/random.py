"""Random block Jacobi families: sampling, Lyapunov sums, densities of states, channels.

Site n carries a random label sigma_n drawn from a finite distribution; the
label fixes V_n = V(1 + lam v_sigma) and T_n = T(1 + lam t_sigma), both
symmetrized.  All estimators run on a table of per-label transfer matrices
and a label sequence, so many realizations and energies are propagated in
one batched pass.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np
from scipy import stats

from . import kernels
from .jacobi import JacobiModel, decode_matrix, transfer_parts
from .matrices import is_positive_definite
from .rotation import TWO_PI, SiteTable, count_from_rotation
from .symplectic import canonical_forms, is_symplectic, stereo_Pi

__all__ = [
    "EnsembleError",
    "BandEdgeError",
    "AnomalyWarning",
    "Disorder",
    "EnsembleSpec",
    "ChannelData",
    "BirkhoffResult",
    "Estimate",
    "PerturbationReport",
    "ProbeResult",
    "sample_labels",
    "sample_model",
    "channel_decomposition",
    "birkhoff_ids_lyap",
    "lyap_qr_oracle",
    "ids_by_counting",
    "periodic_ids",
    "periodic_ids_closed_form",
    "perturbation_study",
    "hyperbolic_alignment_probe",
    "load_ensemble",
    "save_ensemble",
    "ensemble_from_dict",
    "ensemble_to_dict",
]


class EnsembleError(ValueError):
    """Ensemble data violates a structural requirement."""


class BandEdgeError(ArithmeticError):
    """The clean transfer matrix is not safely diagonalizable at this energy."""


class AnomalyWarning(UserWarning):
    """Two elliptic phases add up to a multiple of 2 pi (within the gate)."""


def _sym(x: np.ndarray) -> np.ndarray:
    return (x + np.swapaxes(x, -1, -2)) / 2


def _real_matrix(a, L: int, name: str) -> np.ndarray:
    m = np.asarray(a)
    if m.ndim == 0:
        m = m * np.eye(L)
    elif not isinstance(a, np.ndarray):
        try:
            m = decode_matrix(a, L)
        except ValueError as exc:
            raise EnsembleError(f"{name}: {exc}") from exc
    if m.shape != (L, L):
        raise EnsembleError(f"{name} must be {L}x{L}, got shape {m.shape}")
    if np.max(np.abs(np.imag(m))) > 0:
        raise EnsembleError(f"{name} must be real")
    m = np.real(m).astype(float)
    if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
        raise EnsembleError(f"{name} must be symmetric")
    return _sym(m)


@dataclass(frozen=True)
class Disorder:
    """One value of the random label: perturbations v, t and its probability."""

    v: np.ndarray
    t: np.ndarray
    p: float


@dataclass(frozen=True)
class EnsembleSpec:
    """Real symmetric base blocks with a finite label distribution and a coupling."""

    L: int
    V: np.ndarray
    T: np.ndarray
    sigma: tuple[Disorder, ...]
    lam: float = 0.0
    lam_max: float | None = None

    def __post_init__(self):
        L = int(self.L)
        if L < 1:
            raise EnsembleError("L must be positive")
        V = _real_matrix(self.V, L, "V")
        T = _real_matrix(self.T, L, "T")
        if not is_positive_definite(T):
            raise EnsembleError("T not positive definite")
        sigma = []
        for i, d in enumerate(self.sigma):
            if not d.p >= 0:
                raise EnsembleError(f"weight of label {i} is negative")
            sigma.append(Disorder(_real_matrix(d.v, L, f"v[{i}]"), _real_matrix(d.t, L, f"t[{i}]"),
                                  float(d.p)))
        if not sigma:
            raise EnsembleError("the label distribution is empty")
        total = sum(d.p for d in sigma)
        if abs(total - 1) > 1e-12:
            raise EnsembleError(f"weights sum to {total!r}, not 1")
        lam = float(self.lam)
        lam_max = lam if self.lam_max is None else float(self.lam_max)
        if not 0 <= lam <= lam_max:
            raise EnsembleError(f"coupling {lam!r} outside [0, {lam_max!r}]")
        for i, d in enumerate(sigma):
            if not is_positive_definite(_sym(T @ (np.eye(L) + lam_max * d.t))):
                raise EnsembleError(f"T(1 + lambda t) not positive definite for label {i} "
                                    f"at lambda={lam_max!r}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "sigma", tuple(sigma))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lam_max", lam_max)

    @property
    def size(self) -> int:
        return len(self.sigma)

    @property
    def weights(self) -> np.ndarray:
        return np.array([d.p for d in self.sigma])

    @property
    def bound(self) -> float:
        """Largest entry of any label perturbation."""
        return float(max(max(np.max(np.abs(d.v)), np.max(np.abs(d.t))) for d in self.sigma))

    def with_lambda(self, lam: float) -> "EnsembleSpec":
        return EnsembleSpec(self.L, self.V, self.T, self.sigma, lam, max(lam, self.lam_max or 0.0))

    def blocks(self, label: int) -> tuple[np.ndarray, np.ndarray]:
        d = self.sigma[label]
        eye = np.eye(self.L)
        return _sym(self.V @ (eye + self.lam * d.v)), _sym(self.T @ (eye + self.lam * d.t))

    def transfer_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Affine parts (P, Q) of the transfer matrices of all site types.

        Types 0..S-1 are the labels; types S..2S-1 are the same labels on the
        first site, where the hopping is the identity.
        """
        P, Q = [], []
        for first in (False, True):
            for s in range(self.size):
                V, T = self.blocks(s)
                m = JacobiModel(np.array([V, V]), T[None], field="real")
                p, q = transfer_parts(m, 1 if first else 2)
                P.append(p)
                Q.append(q)
        return np.array(P), np.array(Q)

    def table(self, gauge: np.ndarray | None = None) -> SiteTable:
        P, Q = self.transfer_parts()
        return SiteTable(P, Q, gauge)


def ensemble_to_dict(spec: EnsembleSpec) -> dict:
    return {
        "L": spec.L,
        "V": spec.V.tolist(),
        "T": spec.T.tolist(),
        "sigma": [{"v": d.v.tolist(), "t": d.t.tolist(), "p": d.p} for d in spec.sigma],
        "lambda": spec.lam,
    }


def ensemble_from_dict(data: dict) -> EnsembleSpec:
    try:
        L = int(data["L"])
        sigma = tuple(Disorder(d["v"], d["t"], float(d["p"]))
                      for d in data["sigma"])
        return EnsembleSpec(L, data["V"], data["T"], sigma,
                            float(data.get("lambda", 0.0)))
    except (KeyError, TypeError) as exc:
        raise EnsembleError(f"malformed ensemble: {exc}") from exc


def load_ensemble(path) -> EnsembleSpec:
    return ensemble_from_dict(json.loads(Path(path).read_text()))


def save_ensemble(spec: EnsembleSpec, path) -> None:
    Path(path).write_text(json.dumps(ensemble_to_dict(spec), indent=2) + "\n")


# ---- sampling ---------------------------------------------------------------

def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_labels(spec: EnsembleSpec, N: int, seed: int) -> np.ndarray:
    """Labels sigma_1..sigma_N of one realization; deterministic in (spec, N, seed)."""
    return _rng(seed).choice(spec.size, size=N, p=spec.weights).astype(np.int64)


def _site_types(spec: EnsembleSpec, labels: np.ndarray) -> np.ndarray:
    idx = np.array(labels, dtype=np.int64, copy=True)
    idx[..., 0] += spec.size
    return idx


def sample_model(spec: EnsembleSpec, N: int, seed: int) -> JacobiModel:
    labels = sample_labels(spec, N, seed)
    blocks = [spec.blocks(s) for s in labels]
    V = np.array([b[0] for b in blocks])
    T = np.array([b[1] for b in blocks[1:]]).reshape(N - 1, spec.L, spec.L)
    return JacobiModel(V, T, field="real")


def _label_matrix(spec: EnsembleSpec, N: int, realizations: int, seed: int) -> np.ndarray:
    return np.array([sample_labels(spec, N, seed + r) for r in range(realizations)])


# ---- channel decomposition --------------------------------------------------

@dataclass
class ChannelData:
    """Symplectic normal form R = M T M^{-1} of the clean transfer matrix.

    Coordinates are ordered (hyperbolic q, elliptic q, hyperbolic p,
    elliptic p).  ``eta`` are in [0, 2 pi), ``kappa`` > 0.
    """

    M: np.ndarray
    eta: np.ndarray
    kappa: np.ndarray
    S: np.ndarray
    P_h: np.ndarray
    P_e: np.ndarray
    g_h: float
    g_e: float
    R: np.ndarray
    residual: float
    energy: float = 0.0

    @property
    def L_h(self) -> int:
        return len(self.kappa)

    @property
    def L_e(self) -> int:
        return len(self.eta)

    @property
    def lyapunov(self) -> float:
        """Clean Lyapunov sum per channel, sum(kappa) / L."""
        return float(np.sum(self.kappa) / (self.L_h + self.L_e))


def _normal_form(S, kappa, eta) -> np.ndarray:
    Lh, Le = len(kappa), len(eta)
    L = Lh + Le
    R = np.zeros((2 * L, 2 * L))
    ek = np.diag(np.exp(kappa))
    R[:Lh, :Lh] = S @ ek
    R[L:L + Lh, L:L + Lh] = S @ np.linalg.inv(ek)
    c, s = np.diag(np.cos(eta)), np.diag(np.sin(eta))
    R[Lh:L, Lh:L] = c
    R[Lh:L, L + Lh:] = s
    R[L + Lh:, Lh:L] = -s
    R[L + Lh:, L + Lh:] = c
    return R


def channel_decomposition(V, T, E: float, tol: float = 1e-6, tol_circle: float = 1e-8,
                          anomaly_gate: float = 1e-3) -> ChannelData:
    """Symplectic diagonalization of the clean transfer matrix at a real energy.

    Eigenvalues with ||lam| - 1| <= tol_circle are elliptic.  Each elliptic
    eigenvector x with positive Krein form x^* J x / (-2i) gives the pair
    (Re x, Im x) and the phase arg(lam).  Expanding eigenvalues give the
    hyperbolic q-block (real and imaginary parts for complex pairs, which
    become the rotation S); the p-block is the contracting subspace
    normalized against it.
    """
    V = np.real(np.asarray(V, dtype=complex))
    T = np.real(np.asarray(T, dtype=complex))
    L = V.shape[0]
    m = JacobiModel(np.array([V, V]), T[None], field="real")
    P, Q = transfer_parts(m, 2)
    tm = np.real(E * P + Q)
    J = np.real(canonical_forms(L).J)
    lam, X = np.linalg.eig(tm)
    Xn = X / np.linalg.norm(X, axis=0)
    if np.linalg.cond(Xn) > 1 / tol:
        raise BandEdgeError(f"Jordan block / band edge at E={E!r}: transfer matrix not diagonalizable")
    dist = np.abs(np.abs(lam) - 1)
    if np.any((dist > tol_circle) & (dist < 2 * tol_circle)):
        raise BandEdgeError(f"Jordan block / band edge at E={E!r}: eigenvalue in the ambiguous annulus")
    if np.any(np.abs(lam - 1) < np.sqrt(tol)) or np.any(np.abs(lam + 1) < np.sqrt(tol)):
        raise BandEdgeError(f"Jordan block / band edge at E={E!r}: parabolic eigenvalue")
    ell = dist <= tol_circle

    # elliptic channels: Krein-positive eigenvectors, orthonormal for the Krein form
    fe, ge, eta = [], [], []
    ell_idx = np.nonzero(ell)[0]
    done = np.zeros(len(lam), bool)
    for i in ell_idx:
        if done[i]:
            continue
        group = [j for j in ell_idx if not done[j] and abs(lam[j] - lam[i]) < 1e-6]
        done[group] = True
        Y = Xn[:, group]
        K = Y.conj().T @ J @ Y / (-2j)
        K = (K + K.conj().T) / 2
        w, Z = np.linalg.eigh(K)
        pos = w > 1e-10
        for k in np.nonzero(pos)[0]:
            x = Y @ Z[:, k] / np.sqrt(w[k])
            fe.append(x.real)
            ge.append(x.imag)
            eta.append(np.angle(np.mean(lam[group])) % TWO_PI)
    # hyperbolic channels: expanding and contracting invariant subspaces
    hyp = np.nonzero(~ell)[0]
    grow = [j for j in hyp if abs(lam[j]) > 1]
    shrink = [j for j in hyp if abs(lam[j]) < 1]
    if len(fe) + len(grow) != L or len(shrink) != len(grow):
        raise BandEdgeError(f"Jordan block / band edge at E={E!r}: channel count mismatch")
    fh, kappa, sblocks = [], [], []
    used = np.zeros(len(lam), bool)
    for j in sorted(grow, key=lambda j: (-abs(lam[j]), np.angle(lam[j]))):
        if used[j]:
            continue
        used[j] = True
        x = Xn[:, j]
        if abs(lam[j].imag) <= 1e-10 * abs(lam[j]):
            fh.append(np.real(x * np.exp(-1j * np.angle(x[np.argmax(np.abs(x))]))))
            kappa.append(np.log(abs(lam[j])))
            sblocks.append(np.array([[np.sign(lam[j].real)]]))
        else:
            partner = min((k for k in grow if not used[k]), key=lambda k: abs(lam[k] - np.conj(lam[j])))
            used[partner] = True
            x = x if lam[j].imag > 0 else Xn[:, partner]
            a = np.angle(lam[j] if lam[j].imag > 0 else lam[partner])
            fh += [x.real, x.imag]
            kappa += [np.log(abs(lam[j]))] * 2
            sblocks.append(np.array([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]]))
    Lh = len(kappa)
    if Lh:
        F = np.array(fh).T
        # the contracting subspace is real; take a real basis of it
        W = np.linalg.svd(np.hstack([Xn[:, shrink].real, Xn[:, shrink].imag]))[0][:, :Lh]
        G = -W @ np.linalg.inv(F.T @ J @ W)
    else:
        F = G = np.zeros((2 * L, 0))
    S = np.zeros((Lh, Lh))
    pos = 0
    for b in sblocks:
        S[pos:pos + len(b), pos:pos + len(b)] = b
        pos += len(b)
    Fe = np.array(fe).T.reshape(2 * L, -1)
    Ge = np.array(ge).T.reshape(2 * L, -1)
    Minv = np.hstack([F, Fe, G, Ge])
    M = np.linalg.inv(Minv)
    kappa = np.array(kappa)
    eta = np.array(eta)
    R = _normal_form(S, kappa, eta)
    scale = max(1.0, np.max(np.abs(tm)))
    residual = float(np.max(np.abs(M @ tm @ Minv - R)) / scale)
    if residual > 1e-8 or not is_symplectic(M, "real", tol=1e-8):
        raise BandEdgeError(f"Jordan block / band edge at E={E!r}: normal form residual {residual:.3g}")
    g_h = float(np.min(1 - np.exp(-kappa))) if Lh else 1.0
    Le = len(eta)
    g_e = float(np.min(np.abs(1 - np.exp(1j * (eta[:, None] + eta[None, :]))))) if Le else 2.0
    if Le and g_e < anomaly_gate:
        warnings.warn(f"anomaly at E={E!r}: elliptic phases give g_e={g_e:.3g}", AnomalyWarning,
                      stacklevel=2)
    P_h = np.diag(np.r_[np.ones(Lh), np.zeros(Le)])
    P_e = np.diag(np.r_[np.zeros(Lh), np.ones(Le)])
    return ChannelData(M, eta, kappa, S, P_h, P_e, g_h, g_e, R, residual, float(E))


# ---- Birkhoff sums ----------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float


@dataclass
class BirkhoffResult:
    """Average of log det over sites: Lyapunov sum + i pi IDS, per site and channel.

    ``block_lyap`` and ``block_ids`` hold the batch means (realization x block)
    that the standard errors are computed from.
    """

    value: complex
    lyap: Estimate
    ids: Estimate
    block_lyap: np.ndarray = dc_field(repr=False)
    block_ids: np.ndarray = dc_field(repr=False)
    energy: complex = 0.0


def _batch_estimate(x: np.ndarray) -> Estimate:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        return Estimate(float(np.mean(x)), float("nan"))
    return Estimate(float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.size)))


def _burn(N: int, burn_in: int | None) -> int:
    b = N // 10 if burn_in is None else int(burn_in)
    if not 0 <= b < N:
        raise ValueError(f"burn-in {b} must lie in [0, {N})")
    return b


def _run_flow(spec, E_array, labels, gauge, burn, blocks, trlog):
    """Propagate every realization at every energy; returns sums after burn-in."""
    table = spec.table(gauge)
    idx = _site_types(spec, labels)
    M = table.lorentz(E_array)
    U0 = stereo_Pi(table.gauge @ np.vstack([np.eye(spec.L), np.zeros((spec.L, spec.L))]))
    Yb = Yc = None
    if trlog:
        Yb, Yc = table.branch(M)
    R, N = idx.shape
    U = np.broadcast_to(U0, (len(E_array), R, spec.L, spec.L))
    g_head = np.zeros((len(E_array), R))
    if burn:
        U, _, g = kernels.propagate(M, Yb, Yc, idx[:, :burn], U, block=burn, trlog=trlog)
        g_head = g[..., 0]
    rest = N - burn
    block = max(1, rest // blocks)
    U_end, logabs, gsum = kernels.propagate(M, Yb, Yc, idx[:, burn:], U, block=block, trlog=trlog)
    return table, idx, U0, U_end, logabs, gsum, g_head, block


def birkhoff_ids_lyap(spec: EnsembleSpec, E, N: int, seed: int, gauge: np.ndarray | None = None,
                      realizations: int = 1, burn_in: int | None = None, blocks: int = 32) -> BirkhoffResult:
    """Birkhoff average (1/NL) sum_n log det(C_n U_{n-1} + D_n) with a continuous phase.

    The real part is the Lyapunov sum per channel.  The imaginary part is half
    the total rotation per site and channel, computed from the per-site
    branch-controlled increments, so Im / pi estimates the IDS.  For Im E > 0
    the phases are not monotone rotations and the IDS part is NaN.
    """
    E = complex(E)
    if E.imag < 0:
        raise ValueError("need Im E >= 0")
    burn = _burn(N, burn_in)
    labels = _label_matrix(spec, N, realizations, seed)
    real_energy = E.imag == 0
    if real_energy:
        table, idx, U0, U_end, logabs, gsum, _, block = _run_flow(
            spec, np.array([E.real]), labels, gauge, burn, blocks, True)
    else:
        table, idx, U0, U_end, logabs, gsum, _, block = _run_flow_complex(
            spec, E, labels, gauge, burn, blocks)
    L = spec.L
    rest = N - burn
    sizes = np.full(logabs.shape[-1], block)
    sizes[-1] = rest - block * (len(sizes) - 1)
    lyap_blocks = logabs[0] / (sizes * L)
    lyap = _batch_estimate(lyap_blocks)
    if real_energy:
        table._prepare_branch()
        site = table.site_phase([E.real])[0]
        g_inf = table.g_inf(np.arange(table.size), stereo_Pi(table.gauge @ np.vstack(
            [np.eye(L), np.zeros((L, L))])))
        inc = site - g_inf
        tail = idx[:, burn:]
        per_site = inc[tail]
        cuts = np.cumsum(sizes)[:-1]
        theta_blocks = np.array([[c.sum() for c in np.split(row, cuts)] for row in per_site]) + gsum[0]
        ids_blocks = theta_blocks / (TWO_PI * sizes * L)
        ids = _batch_estimate(ids_blocks)
    else:
        ids_blocks = np.full_like(lyap_blocks, np.nan)
        ids = Estimate(float("nan"), float("nan"))
    value = complex(lyap.mean, np.pi * ids.mean)
    return BirkhoffResult(value, lyap, ids, lyap_blocks, ids_blocks, E)


def _run_flow_complex(spec, E, labels, gauge, burn, blocks):
    table = spec.table(gauge)
    idx = _site_types(spec, labels)
    M = E * table.Pc[None] + table.Qc[None]
    U0 = stereo_Pi(table.gauge @ np.vstack([np.eye(spec.L), np.zeros((spec.L, spec.L))]))
    R, N = idx.shape
    U = np.broadcast_to(U0, (1, R, spec.L, spec.L))
    if burn:
        U, _, _ = kernels.propagate(M, None, None, idx[:, :burn], U, block=burn)
    block = max(1, (N - burn) // blocks)
    U_end, logabs, gsum = kernels.propagate(M, None, None, idx[:, burn:], U, block=block)
    return table, idx, U0, U_end, logabs, gsum, None, block


def lyap_qr_oracle(spec: EnsembleSpec, E: float, N: int, seed: int, realizations: int = 1,
                   burn_in: int | None = None, blocks: int = 32) -> Estimate:
    """Lyapunov sum per channel from repeated QR of a propagated 2L x L frame."""
    burn = _burn(N, burn_in)
    labels = _label_matrix(spec, N, realizations, seed)
    idx = _site_types(spec, labels)
    # plain transfer matrices, independent of the Cayley/Moebius machinery
    P, Q = spec.transfer_parts()
    Tm = float(E) * P.real + Q.real
    L = spec.L
    R = realizations
    frame = np.broadcast_to(np.vstack([np.eye(L), np.zeros((L, L))]), (R, 2 * L, L)).copy()
    rest = N - burn
    block = max(1, rest // blocks)
    nb = -(-rest // block)
    sums = np.zeros((R, nb))
    for n in range(N):
        frame = Tm[idx[:, n]] @ frame
        frame, r = np.linalg.qr(frame)
        if n >= burn:
            sums[:, (n - burn) // block] += np.sum(np.log(np.abs(np.diagonal(r, axis1=1, axis2=2))), axis=1)
    sizes = np.full(nb, block)
    sizes[-1] = rest - block * (nb - 1)
    return _batch_estimate(sums / (sizes * L))


# ---- counting ---------------------------------------------------------------

def _counts(spec: EnsembleSpec, E: float, labels: np.ndarray) -> np.ndarray:
    """Exact eigenvalue counts below E for each label row (Dirichlet ends)."""
    table = spec.table()
    table._prepare_branch()
    idx = _site_types(spec, labels)
    M = table.lorentz([E])
    Yb, Yc = table.branch(M)
    L = spec.L
    U0 = stereo_Pi(np.vstack([np.eye(L), np.zeros((L, L))]))
    U, _, g = kernels.propagate(M, Yb, Yc, idx, U0, trlog=True)
    site = table.site_phase([E])[0]
    g_inf = table.g_inf(np.arange(table.size), np.broadcast_to(U0, (table.size, L, L)))
    theta = (site - g_inf)[idx].sum(axis=1) + g[0, :, 0]
    return np.array([count_from_rotation(th, u) for th, u in zip(theta, U[0])])


def ids_by_counting(spec: EnsembleSpec, E: float, N: int, realizations: int, base_seed: int) -> Estimate:
    """Mean of count_below(model, E) / (N L) over realizations seeded base_seed + i.

    Counts come from the telescoped rotation number of each realization,
    which is an exact integer count of eigenvalues <= E.
    """
    labels = _label_matrix(spec, N, realizations, base_seed)
    frac = _counts(spec, float(E), labels) / (N * spec.L)
    return _batch_estimate(frac) if realizations > 1 else Estimate(float(frac[0]), float("nan"))


def periodic_ids(spec: EnsembleSpec, label: int, E: float, N: int = 200_000) -> float:
    """IDS of the chain with the same label at every site, counted on N sites."""
    labels = np.full((1, N), label, dtype=np.int64)
    return float(_counts(spec, float(E), labels)[0] / (N * spec.L))


def periodic_ids_closed_form(V, T, E: float) -> float:
    """IDS of the period-one chain from its band functions eig(V + 2 cos(k) T).

    Each band is increasing in c = cos k because T > 0, so the band lies
    below E exactly for c <= c_j with c_j the j-th eigenvalue of T^{-1}(E - V)/2.
    """
    V = np.real(np.asarray(V, dtype=float))
    T = np.real(np.asarray(T, dtype=float))
    c = np.linalg.eigvals(np.linalg.solve(T, float(E) * np.eye(len(V)) - V)).real / 2
    return float(np.mean(1 - np.arccos(np.clip(c, -1, 1)) / np.pi))


@dataclass
class PerturbationReport:
    energy: float
    lambdas: list[float]
    ids: list[Estimate]
    comparator: list[float]
    err: list[float]
    slope: float
    intercept: float
    r2: float
    g_h: float
    g_e: float

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "per_lambda": [
                {"lambda": lam, "ids": e.mean, "stderr": e.stderr, "comparator": c, "err": d}
                for lam, e, c, d in zip(self.lambdas, self.ids, self.comparator, self.err)
            ],
            "fit": {"slope": self.slope, "intercept": self.intercept, "r2": self.r2},
            "gaps": {"g_h": self.g_h, "g_e": self.g_e},
        }


def perturbation_study(family, E: float, lambdas, N: int, realizations: int, base_seed: int = 0,
                       comparator_N: int = 2_000_000, anomaly_gate: float = 1e-3) -> PerturbationReport:
    """Compare the random IDS with the label-averaged IDS of the periodic chains.

    ``family`` maps a coupling to an EnsembleSpec.  The difference should
    scale like lambda^2; the report carries a least-squares fit of
    log err against log lambda.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise ValueError("empty coupling list")
    clean = family(0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", AnomalyWarning)
        try:
            ch = channel_decomposition(clean.V, clean.T, E, anomaly_gate=anomaly_gate)
        except AnomalyWarning as exc:
            raise BandEdgeError(f"anomaly: {exc}") from exc
    ids, comp, err = [], [], []
    for lam in lambdas:
        spec = family(lam)
        est = ids_by_counting(spec, E, N, realizations, base_seed)
        c = float(sum(d.p * periodic_ids(spec, s, E, comparator_N) for s, d in enumerate(spec.sigma)))
        ids.append(est)
        comp.append(c)
        err.append(abs(est.mean - c))
    positive = [(lam, e) for lam, e in zip(lambdas, err) if lam > 0 and e > 0]
    if len(positive) >= 2:
        fit = stats.linregress(np.log([p[0] for p in positive]), np.log([p[1] for p in positive]))
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
    else:
        slope = intercept = r2 = float("nan")
    return PerturbationReport(float(E), lambdas, ids, comp, err, slope, intercept, r2, ch.g_h, ch.g_e)


# ---- hyperbolic alignment -----------------------------------------------------

@dataclass
class ProbeResult:
    plateau: float
    defects: np.ndarray = dc_field(repr=False)
    ratio: float = float("nan")


def hyperbolic_alignment_probe(spec: EnsembleSpec, E: float, N: int, seed: int = 0,
                               channels: ChannelData | None = None) -> ProbeResult | None:
    """Defect ||P_h U_n P_h - P_h|| along one realization in channel coordinates.

    Returns None when there is no hyperbolic channel.  ``plateau`` is the
    largest defect over the second half of the chain, after the initial
    transient has contracted; ``ratio`` is lambda / g_h.
    """
    ch = channels or channel_decomposition(spec.V, spec.T, E)
    if ch.L_h == 0:
        return None
    labels = sample_labels(spec, N, seed)
    idx = _site_types(spec, labels[None])[0]
    table = spec.table(ch.M.astype(complex))
    M = table.lorentz([E])[0]
    L = spec.L
    U = stereo_Pi(table.gauge @ np.vstack([np.eye(L), np.zeros((L, L))]))
    Ph = ch.P_h
    defects = np.empty(N + 1)
    defects[0] = np.linalg.norm(Ph @ U @ Ph - Ph, 2)
    for n, s in enumerate(idx, start=1):
        A, B, C, D = M[s, :L, :L], M[s, :L, L:], M[s, L:, :L], M[s, L:, L:]
        U = np.linalg.solve((C @ U + D).T, (A @ U + B).T).T
        defects[n] = np.linalg.norm(Ph @ U @ Ph - Ph, 2)
    plateau = float(np.max(defects[N // 2:]))
    return ProbeResult(plateau, defects, spec.lam / ch.g_h)

