# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled complex scoring kernels.

Same contracts as the numpy backend (see _numpy_backend.py), with the
elementwise complex products and the candidate sweeps fused into single
passes so no temporaries are allocated.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def score_single(double[::1] sr, double[::1] si,
                 double[::1] pr, double[::1] pi,
                 double[::1] tr, double[::1] ti,
                 double[::1] cr, double[::1] ci):
    """Score one fact from its four complex vectors, object conjugated."""
    cdef Py_ssize_t c, d = sr.shape[0]
    cdef double wr, wi, zr, zi, acc = 0.0
    for c in range(d):
        wr = pr[c] * tr[c] - pi[c] * ti[c]
        wi = pr[c] * ti[c] + pi[c] * tr[c]
        zr = sr[c] * wr - si[c] * wi
        zi = sr[c] * wi + si[c] * wr
        acc += zr * cr[c] + zi * ci[c]
    return acc


def sweep_conj(double[::1] zr, double[::1] zi,
               double[:, ::1] table_r, double[:, ::1] table_i,
               out=None):
    """scores[j] = Re(<z, conj(row_j)>) for every row of the table."""
    cdef Py_ssize_t j, c, n = table_r.shape[0], d = table_r.shape[1]
    if out is None:
        out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef double acc
    for j in range(n):
        acc = 0.0
        for c in range(d):
            acc += table_r[j, c] * zr[c] + table_i[j, c] * zi[c]
        res[j] = acc
    return out


def sweep_plain(double[::1] ur, double[::1] ui,
                double[:, ::1] table_r, double[:, ::1] table_i,
                out=None):
    """scores[j] = Re(<u, row_j>) for every row of the table."""
    cdef Py_ssize_t j, c, n = table_r.shape[0], d = table_r.shape[1]
    if out is None:
        out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef double acc
    for j in range(n):
        acc = 0.0
        for c in range(d):
            acc += table_r[j, c] * ur[c] - table_i[j, c] * ui[c]
        res[j] = acc
    return out


def sweep_conj_batch(double[:, ::1] zr, double[:, ::1] zi,
                     double[:, ::1] table_r, double[:, ::1] table_i,
                     out=None):
    """Batched sweep_conj: zr, zi are (B, d); result is (B, N)."""
    cdef Py_ssize_t b, j, c
    cdef Py_ssize_t nb = zr.shape[0], n = table_r.shape[0], d = table_r.shape[1]
    if out is None:
        out = np.empty((nb, n), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double acc
    for b in range(nb):
        for j in range(n):
            acc = 0.0
            for c in range(d):
                acc += table_r[j, c] * zr[b, c] + table_i[j, c] * zi[b, c]
            res[b, j] = acc
    return out


def sweep_plain_batch(double[:, ::1] ur, double[:, ::1] ui,
                      double[:, ::1] table_r, double[:, ::1] table_i,
                      out=None):
    """Batched sweep_plain: ur, ui are (B, d); result is (B, N)."""
    cdef Py_ssize_t b, j, c
    cdef Py_ssize_t nb = ur.shape[0], n = table_r.shape[0], d = table_r.shape[1]
    if out is None:
        out = np.empty((nb, n), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double acc
    for b in range(nb):
        for j in range(n):
            acc = 0.0
            for c in range(d):
                acc += table_r[j, c] * ur[b, c] - table_i[j, c] * ui[b, c]
            res[b, j] = acc
    return out
