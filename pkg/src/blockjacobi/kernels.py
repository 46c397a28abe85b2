"""Backend selection for the batched Moebius flow.

The compiled extension is used when it imports and the problem is within
its scope (the trace-log phase is compiled only for L <= 2).  Setting the
environment variable ``BLOCKJACOBI_PURE_PYTHON=1`` forces the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pyflow

try:
    if os.environ.get("BLOCKJACOBI_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python backend requested")
    from . import _kernels
except ImportError:
    _kernels = None

BACKEND = "compiled" if _kernels is not None else "python"

__all__ = ["BACKEND", "propagate"]


def propagate(M, Yb, Yc, idx, U0, block=None, trlog=False, backend=None):
    """Batched flow; see ``_pyflow.propagate`` for the array contract."""
    M = np.ascontiguousarray(M, dtype=complex)
    K, S, L2, _ = M.shape
    L = L2 // 2
    idx = np.ascontiguousarray(np.atleast_2d(idx), dtype=np.int64)
    R, N = idx.shape
    if Yb is None:
        Yb = Yc = np.zeros((K, S, L, L), dtype=complex)
    Yb = np.ascontiguousarray(Yb, dtype=complex)
    Yc = np.ascontiguousarray(Yc, dtype=complex)
    U0 = np.ascontiguousarray(np.broadcast_to(U0, (K, R, L, L)), dtype=complex)
    if N and (idx.min() < 0 or idx.max() >= S):
        raise IndexError("site type index out of range")
    block = max(1, N) if block is None else int(block)
    use = backend or BACKEND
    if use == "compiled" and _kernels is not None and not (trlog and L > 2):
        return _kernels.propagate(M, Yb, Yc, idx, U0, block, bool(trlog))
    return _pyflow.propagate(M, Yb, Yc, idx, U0, block, bool(trlog))
