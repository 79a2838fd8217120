# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport NAN
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

ctypedef double complex cplx


cdef int _lu_solve(cplx[:, ::1] a, cplx[:, ::1] b) noexcept nogil:
    """In-place Gaussian elimination with partial pivoting; b is overwritten by a^-1 b."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[1]
    cdef Py_ssize_t i, j, k, p
    cdef double best, mag
    cdef cplx f, tmp
    for k in range(n):
        p = k
        best = abs(a[k, k])
        for i in range(k + 1, n):
            mag = abs(a[i, k])
            if mag > best:
                best = mag
                p = i
        if best == 0.0:
            return 1
        if p != k:
            for j in range(n):
                tmp = a[k, j]; a[k, j] = a[p, j]; a[p, j] = tmp
            for j in range(m):
                tmp = b[k, j]; b[k, j] = b[p, j]; b[p, j] = tmp
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            if f == 0:
                continue
            for j in range(k + 1, n):
                a[i, j] = a[i, j] - f * a[k, j]
            for j in range(m):
                b[i, j] = b[i, j] - f * b[k, j]
    for k in range(n - 1, -1, -1):
        for j in range(m):
            tmp = b[k, j]
            for i in range(k + 1, n):
                tmp = tmp - a[k, i] * b[i, j]
            b[k, j] = tmp / a[k, k]
    return 0


def nodal_sweep(cond, cap, inv_l, inc, omegas):
    cdef double[:, ::1] g = np.ascontiguousarray(cond, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(cap, dtype=np.float64)
    cdef double[:, ::1] il = np.ascontiguousarray(inv_l, dtype=np.float64)
    cdef double[:, ::1] e = np.ascontiguousarray(inc, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0], nt = e.shape[1], nw = w.shape[0]
    out_arr = np.empty((nw, nt, nt), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef cplx[:, ::1] y = np.empty((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] x = np.empty((n, nt), dtype=np.complex128)
    cdef Py_ssize_t k, i, j, r
    cdef cplx acc, iw
    with nogil:
        for k in range(nw):
            iw = 1j * w[k]
            for i in range(n):
                for j in range(n):
                    y[i, j] = g[i, j] + iw * c[i, j] + il[i, j] / iw
                for j in range(nt):
                    x[i, j] = e[i, j]
            if _lu_solve(y, x):
                for i in range(nt):
                    for j in range(nt):
                        out[k, i, j] = NAN
                continue
            for i in range(nt):
                for j in range(nt):
                    acc = 0
                    for r in range(n):
                        acc = acc + e[r, i] * x[r, j]
                    out[k, i, j] = acc
    return out_arr


def ordered_product(mats):
    # Fortran zgemm on C-ordered data: computing out^T = prev^T m^T gives out = m @ prev.
    cdef cplx[:, :, ::1] ms = np.ascontiguousarray(mats, dtype=np.complex128)
    cdef int n = ms.shape[1]
    cdef Py_ssize_t s, steps = ms.shape[0]
    cdef cplx[:, ::1] cur = np.eye(n, dtype=np.complex128)
    cdef cplx[:, ::1] nxt = np.empty((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] swap
    cdef cplx one = 1.0, zero = 0.0
    cdef char trans = b'N'
    with nogil:
        for s in range(steps):
            zgemm(&trans, &trans, &n, &n, &n, &one, &cur[0, 0], &n, &ms[s, 0, 0], &n, &zero, &nxt[0, 0], &n)
            swap = cur
            cur = nxt
            nxt = swap
    return np.asarray(cur).copy()
