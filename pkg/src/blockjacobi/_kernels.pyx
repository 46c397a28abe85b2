# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled batched Moebius flow; same contract as ``_pyflow.propagate``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log
from libc.stdlib cimport malloc, free

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double carg(double complex)
    double complex csqrt(double complex)
    double complex conj(double complex)

cnp.import_array()


cdef inline double _imtrlog_small(const double complex* x, Py_ssize_t L) noexcept nogil:
    # sum of arg(1 + y) over the eigenvalues y of x, for L <= 2
    cdef double complex t, d, r
    if L == 1:
        return carg(1.0 + x[0])
    t = x[0] + x[3]
    d = x[0] * x[3] - x[1] * x[2]
    r = csqrt(t * t / 4.0 - d)
    return carg(1.0 + t / 2.0 + r) + carg(1.0 + t / 2.0 - r)


cdef int _lu_solve_right(double complex* den, double complex* num, double complex* out,
                         int* piv, Py_ssize_t L, double* logabs) noexcept nogil:
    # out = num den^{-1}; den is overwritten by the LU factors of den^T
    cdef Py_ssize_t i, j, k, p
    cdef double best, a
    cdef double complex tmp, f
    # transpose den in place
    for i in range(L):
        for j in range(i + 1, L):
            tmp = den[i * L + j]
            den[i * L + j] = den[j * L + i]
            den[j * L + i] = tmp
    logabs[0] = 0.0
    for k in range(L):
        p = k
        best = cabs(den[k * L + k])
        for i in range(k + 1, L):
            a = cabs(den[i * L + k])
            if a > best:
                best = a
                p = i
        piv[k] = p
        if best == 0.0:
            return -1
        if p != k:
            for j in range(L):
                tmp = den[k * L + j]
                den[k * L + j] = den[p * L + j]
                den[p * L + j] = tmp
        logabs[0] += log(best)
        for i in range(k + 1, L):
            f = den[i * L + k] / den[k * L + k]
            den[i * L + k] = f
            for j in range(k + 1, L):
                den[i * L + j] -= f * den[k * L + j]
    # solve den^T x = b for each row b of num (as a column), x is the row of out
    for i in range(L):
        for j in range(L):
            out[i * L + j] = num[i * L + j]
        for k in range(L):
            p = piv[k]
            if p != k:
                tmp = out[i * L + k]
                out[i * L + k] = out[i * L + p]
                out[i * L + p] = tmp
        for k in range(L):
            for j in range(k):
                out[i * L + k] -= den[k * L + j] * out[i * L + j]
        for k in range(L - 1, -1, -1):
            for j in range(k + 1, L):
                out[i * L + k] -= den[k * L + j] * out[i * L + j]
            out[i * L + k] /= den[k * L + k]
    return 0


def propagate(const double complex[:, :, :, ::1] M,
              const double complex[:, :, :, ::1] Yb,
              const double complex[:, :, :, ::1] Yc,
              const long long[:, ::1] idx,
              const double complex[:, :, :, ::1] U0,
              Py_ssize_t block, bint trlog):
    cdef Py_ssize_t K = M.shape[0], L2 = M.shape[2], L = L2 // 2
    cdef Py_ssize_t R = idx.shape[0], N = idx.shape[1]
    cdef Py_ssize_t nb = (N + block - 1) // block if N > 0 else 0
    if trlog and L > 2:
        raise NotImplementedError("compiled trace-log phase supports L <= 2")
    U_arr = np.array(U0, dtype=np.complex128, copy=True)
    la_arr = np.zeros((K, R, nb))
    g_arr = np.zeros((K, R, nb))
    cdef double complex[:, :, :, ::1] U = U_arr
    cdef double[:, :, ::1] la = la_arr
    cdef double[:, :, ::1] gs = g_arr
    cdef double complex* u = <double complex*> malloc(L * L * sizeof(double complex))
    cdef double complex* num = <double complex*> malloc(L * L * sizeof(double complex))
    cdef double complex* den = <double complex*> malloc(L * L * sizeof(double complex))
    cdef double complex* w = <double complex*> malloc(L * L * sizeof(double complex))
    cdef int* piv = <int*> malloc(L * sizeof(int))
    cdef Py_ssize_t k, r, n, s, i, j, q
    cdef double complex acc, acc2
    cdef double ld, g
    cdef int status = 0
    try:
        with nogil:
            for k in range(K):
                for r in range(R):
                    for i in range(L):
                        for j in range(L):
                            u[i * L + j] = U[k, r, i, j]
                    for n in range(N):
                        s = idx[r, n]
                        if trlog:
                            # w = Yb u^*
                            for i in range(L):
                                for j in range(L):
                                    acc = 0
                                    for q in range(L):
                                        acc = acc + Yb[k, s, i, q] * conj(u[j * L + q])
                                    w[i * L + j] = acc
                            g = _imtrlog_small(w, L)
                            # w = Yc u
                            for i in range(L):
                                for j in range(L):
                                    acc = 0
                                    for q in range(L):
                                        acc = acc + Yc[k, s, i, q] * u[q * L + j]
                                    w[i * L + j] = acc
                            g -= _imtrlog_small(w, L)
                            gs[k, r, n // block] += g
                        for i in range(L):
                            for j in range(L):
                                acc = M[k, s, i, L + j]
                                acc2 = M[k, s, L + i, L + j]
                                for q in range(L):
                                    acc = acc + M[k, s, i, q] * u[q * L + j]
                                    acc2 = acc2 + M[k, s, L + i, q] * u[q * L + j]
                                num[i * L + j] = acc
                                den[i * L + j] = acc2
                        if _lu_solve_right(den, num, u, piv, L, &ld) != 0:
                            status = -1
                            break
                        la[k, r, n // block] += ld
                    if status != 0:
                        break
                    for i in range(L):
                        for j in range(L):
                            U[k, r, i, j] = u[i * L + j]
                if status != 0:
                    break
    finally:
        free(u)
        free(num)
        free(den)
        free(w)
        free(piv)
    if status != 0:
        raise ArithmeticError("Moebius singularity in compiled flow")
    return U_arr, la_arr, g_arr
