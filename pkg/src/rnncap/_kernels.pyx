# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recurrence kernels.

Drop-in replacement for ``rnncap._fallback``; inputs must be C-contiguous
float64 arrays.  Loops run without the GIL.  Inner loops are written as
contiguous axpy updates so the compiler can vectorise them.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh

cnp.import_array()

RELU = 0
TANH = 1


cdef inline void _axpy(double a, const double* x, double* y, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(m):
        y[j] += a * x[j]


def forward_batch(double[:, ::1] U, double[:, ::1] W, double[:, :, ::1] X, int kind):
    cdef Py_ssize_t n = X.shape[0], t = X.shape[1], dx = X.shape[2]
    cdef Py_ssize_t dh = U.shape[0]
    H_arr = np.empty((n, t, dh), dtype=np.float64)
    UT_arr = np.ascontiguousarray(np.asarray(U).T)
    WT_arr = np.ascontiguousarray(np.asarray(W).T)
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, ::1] UT = UT_arr
    cdef double[:, ::1] WT = WT_arr
    cdef Py_ssize_t i, tau, r, c
    cdef double* a
    cdef const double* x
    cdef const double* prev
    with nogil:
        for i in range(n):
            for tau in range(t):
                a = &H[i, tau, 0]
                for r in range(dh):
                    a[r] = 0.0
                x = &X[i, tau, 0]
                for c in range(dx):
                    if x[c] != 0.0:
                        _axpy(x[c], &WT[c, 0], a, dh)
                if tau > 0:
                    prev = &H[i, tau - 1, 0]
                    for c in range(dh):
                        if prev[c] != 0.0:
                            _axpy(prev[c], &UT[c, 0], a, dh)
                if kind == 0:
                    for r in range(dh):
                        if a[r] < 0.0:
                            a[r] = 0.0
                else:
                    for r in range(dh):
                        a[r] = tanh(a[r])
    return H_arr


def backward_batch(double[:, ::1] U, double[:, ::1] W, double[:, ::1] V,
                   double[:, :, ::1] X, double[:, :, ::1] H, double[:, :, ::1] dY,
                   int kind):
    cdef Py_ssize_t n = X.shape[0], t = X.shape[1], dx = X.shape[2]
    cdef Py_ssize_t dh = U.shape[0], dy = V.shape[0]
    dU_arr = np.zeros((dh, dh), dtype=np.float64)
    dW_arr = np.zeros((dh, dx), dtype=np.float64)
    dV_arr = np.zeros((dy, dh), dtype=np.float64)
    carry_arr = np.zeros(dh, dtype=np.float64)
    da_arr = np.zeros(dh, dtype=np.float64)
    cdef double[:, ::1] dU = dU_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[:, ::1] dV = dV_arr
    cdef double[::1] carry_v = carry_arr
    cdef double[::1] da_v = da_arr
    cdef double* carry = &carry_v[0]
    cdef double* da = &da_v[0]
    cdef Py_ssize_t i, tau, r, k
    cdef double g, h
    cdef const double* hcur
    cdef const double* hprev
    cdef const double* x
    cdef const double* dy_row
    with nogil:
        for i in range(n):
            for r in range(dh):
                carry[r] = 0.0
            for tau in range(t - 1, -1, -1):
                hcur = &H[i, tau, 0]
                dy_row = &dY[i, tau, 0]
                # da = (dY V + carry) * act'(a)
                for r in range(dh):
                    da[r] = carry[r]
                for k in range(dy):
                    g = dy_row[k]
                    if g != 0.0:
                        _axpy(g, hcur, &dV[k, 0], dh)
                        _axpy(g, &V[k, 0], da, dh)
                if kind == 0:
                    for r in range(dh):
                        if not hcur[r] > 0.0:
                            da[r] = 0.0
                else:
                    for r in range(dh):
                        h = hcur[r]
                        da[r] = da[r] * (1.0 - h * h)
                x = &X[i, tau, 0]
                hprev = &H[i, tau - 1, 0] if tau > 0 else NULL
                for r in range(dh):
                    g = da[r]
                    if g == 0.0:
                        continue
                    if tau > 0:
                        _axpy(g, hprev, &dU[r, 0], dh)
                    _axpy(g, x, &dW[r, 0], dx)
                # carry = da U
                for r in range(dh):
                    carry[r] = 0.0
                for r in range(dh):
                    g = da[r]
                    if g != 0.0:
                        _axpy(g, &U[r, 0], carry, dh)
    return dU_arr, dW_arr, dV_arr
