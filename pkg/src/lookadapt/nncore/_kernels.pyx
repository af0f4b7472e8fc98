# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops (float64): the LSTM recurrence and the Adam update.

Mirrors forward_numpy, backward_numpy and adam_numpy in kernels.py.
"""
import numpy as np
from libc.math cimport exp, sqrt, tanh
from scipy.linalg.cython_blas cimport dgemv


cdef inline double _sig(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def lstm_forward(const double[:, ::1] Zx, const double[:, ::1] Wh, const double[::1] h0,
                 const double[::1] c0):
    cdef int T = Zx.shape[0]
    cdef int H4 = Zx.shape[1]
    cdef int Hn = H4 // 4
    H_arr = np.empty((T, Hn))
    C_arr = np.empty((T, Hn))
    G_arr = np.empty((T, H4))
    z_arr = np.empty(H4)
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] G = G_arr
    cdef double[::1] z = z_arr
    cdef double[::1] h = np.array(h0, copy=True)
    cdef double[::1] c = np.array(c0, copy=True)
    cdef char trans = b'T'
    cdef int m = Hn, n = H4, inc = 1
    cdef double one = 1.0
    cdef int t, k
    cdef double ig, fg, gg, og
    with nogil:
        for t in range(T):
            for k in range(H4):
                z[k] = Zx[t, k]
            # z += Wh @ h ; Wh is row-major (4H, H) == column-major (H, 4H)
            if Hn > 0:
                dgemv(&trans, &m, &n, &one, <double*>&Wh[0, 0], &m, &h[0], &inc, &one, &z[0], &inc)
            for k in range(Hn):
                ig = _sig(z[k])
                fg = _sig(z[Hn + k])
                gg = tanh(z[2 * Hn + k])
                og = _sig(z[3 * Hn + k])
                c[k] = fg * c[k] + ig * gg
                h[k] = og * tanh(c[k])
                G[t, k] = ig
                G[t, Hn + k] = fg
                G[t, 2 * Hn + k] = gg
                G[t, 3 * Hn + k] = og
                H[t, k] = h[k]
                C[t, k] = c[k]
    return H_arr, C_arr, G_arr


def lstm_backward(const double[:, ::1] dH, const double[::1] dC_last, const double[:, ::1] Wh,
                  const double[:, ::1] C, const double[:, ::1] G, const double[::1] c0):
    cdef int T = dH.shape[0]
    cdef int Hn = dH.shape[1]
    cdef int H4 = 4 * Hn
    dZ_arr = np.empty((T, H4))
    dh_arr = np.zeros(Hn)
    dc_arr = np.array(dC_last, copy=True)
    cdef double[:, ::1] dZ = dZ_arr
    cdef double[::1] dh_next = dh_arr
    cdef double[::1] dc_next = dc_arr
    cdef char trans = b'N'
    cdef int m = Hn, n = H4, inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef int t, k
    cdef double ig, fg, gg, og, tc, dh, dc, c_prev
    with nogil:
        for t in range(T - 1, -1, -1):
            for k in range(Hn):
                ig = G[t, k]
                fg = G[t, Hn + k]
                gg = G[t, 2 * Hn + k]
                og = G[t, 3 * Hn + k]
                c_prev = C[t - 1, k] if t > 0 else c0[k]
                tc = tanh(C[t, k])
                dh = dH[t, k] + dh_next[k]
                dc = dc_next[k] + dh * og * (1.0 - tc * tc)
                dZ[t, k] = dc * gg * ig * (1.0 - ig)
                dZ[t, Hn + k] = dc * c_prev * fg * (1.0 - fg)
                dZ[t, 2 * Hn + k] = dc * ig * (1.0 - gg * gg)
                dZ[t, 3 * Hn + k] = dh * tc * og * (1.0 - og)
                dc_next[k] = dc * fg
            # dh_next = Wh^T @ dZ[t]
            if Hn > 0:
                dgemv(&trans, &m, &n, &one, <double*>&Wh[0, 0], &m, &dZ[t, 0], &inc, &zero, &dh_next[0], &inc)
    return dZ_arr, dh_arr, dc_arr


def adam_update(double[::1] w, const double[::1] g, double[::1] m, double[::1] v, double scale,
                double lr, double b1, double b2, double corr1, double corr2, double eps):
    """One fused Adam step on flat buffers; ``g`` is multiplied by ``scale`` (clipping)."""
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t k
    cdef double gk
    with nogil:
        for k in range(n):
            gk = g[k] * scale
            m[k] = b1 * m[k] + (1.0 - b1) * gk
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk
            w[k] -= lr * (m[k] / corr1) / (sqrt(v[k] / corr2) + eps)
