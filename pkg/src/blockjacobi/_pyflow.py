"""Pure numpy implementation of the batched Moebius flow (fallback backend)."""
from __future__ import annotations

import numpy as np


def imtrlog(x: np.ndarray) -> np.ndarray:
    """Im Tr log(1 + x) for a batch of matrices whose eigenvalues lie in the unit disc."""
    if x.shape[-1] == 1:
        return np.angle(1 + x[..., 0, 0])
    y = np.linalg.eigvals(x)
    return np.sum(np.angle(1 + y), axis=-1)


def propagate(M, Yb, Yc, idx, U0, block, trlog):
    """Run U <- (A U + B)(C U + D)^{-1} along site sequences.

    Parameters
    ----------
    M : (K, S, 2L, 2L) complex
        Lorentz matrices per energy and site type.
    Yb, Yc : (K, S, L, L) complex
        A^{-1} B and D^{-1} C, used only when ``trlog`` is set.
    idx : (R, N) int64
        Site type of every site, one row per realization.
    U0 : (K, R, L, L) complex
        Initial states.
    block : int
        Partial sums are collected over consecutive blocks of this many sites.
    trlog : bool
        Also accumulate Im Tr log(1 + Yb U^*) - Im Tr log(1 + Yc U).

    Returns
    -------
    U : (K, R, L, L) final states
    logabs : (K, R, B) block sums of log|det(C U + D)|
    gsum : (K, R, B) block sums of the trace-log phase (zeros without ``trlog``)
    """
    K, S, L2, _ = M.shape
    L = L2 // 2
    R, N = idx.shape
    nb = -(-N // block) if N else 0
    U = np.array(U0, dtype=complex).reshape(K * R, L, L)
    logabs = np.zeros((K * R, nb))
    gsum = np.zeros((K * R, nb))
    kk = np.repeat(np.arange(K), R)
    for n in range(N):
        s = np.tile(idx[:, n], K)
        m = M[kk, s]
        A, B, C, D = m[:, :L, :L], m[:, :L, L:], m[:, L:, :L], m[:, L:, L:]
        if trlog:
            g = imtrlog(Yb[kk, s] @ np.conj(np.swapaxes(U, 1, 2))) - imtrlog(Yc[kk, s] @ U)
            gsum[:, n // block] += g
        num = A @ U + B
        den = C @ U + D
        logabs[:, n // block] += np.linalg.slogdet(den)[1]
        U = np.swapaxes(np.linalg.solve(np.swapaxes(den, 1, 2), np.swapaxes(num, 1, 2)), 1, 2)
    return U.reshape(K, R, L, L), logabs.reshape(K, R, nb), gsum.reshape(K, R, nb)
