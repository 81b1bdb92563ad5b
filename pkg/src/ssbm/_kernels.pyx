# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-block kernels over the CSR structure of the adjacency.

Results use the category order (positive, negative, null).  Internally the
loops index small per-node tables by ``a + 1`` (0 = negative, 1 = null,
2 = positive), which keeps the inner loops free of data-dependent branches.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _reorder_mass(double[:, ::1] acc, const double[::1] w,
                               double[:, ::1] out) noexcept nogil:
    # acc columns are (neg, null incl. self, pos)
    cdef Py_ssize_t j
    cdef double rest
    for j in range(acc.shape[0]):
        out[j, 0] = acc[j, 2]
        out[j, 1] = acc[j, 0]
        rest = acc[j, 1] - w[j]
        out[j, 2] = rest if rest > 0.0 else 0.0


cdef inline void _delta_table(const double[:, ::1] loglam,
                              double[:, ::1] delta) noexcept nogil:
    # delta[j, a + 1] = log lambda[j, cat(a)] - log lambda[j, null]
    cdef Py_ssize_t j
    for j in range(loglam.shape[0]):
        delta[j, 0] = loglam[j, 1] - loglam[j, 2]
        delta[j, 1] = 0.0
        delta[j, 2] = loglam[j, 0] - loglam[j, 2]


def csr_category_mass(const int[::1] indptr, const int[::1] indices,
                      const signed char[::1] data, const double[::1] w):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i, p
    cdef double wi, total = 0.0
    acc_arr = np.zeros((n, 3), dtype=np.float64)
    out_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            wi = w[i]
            total += wi
            for p in range(indptr[i], indptr[i + 1]):
                acc[indices[p], data[p] + 1] += wi
        # null mass is everything not seen as an edge
        for i in range(n):
            acc[i, 1] = total - acc[i, 0] - acc[i, 2]
        _reorder_mass(acc, w, out)
    return out_arr


def csr_log_evidence(const int[::1] indptr, const int[::1] indices,
                     const signed char[::1] data, const double[:, ::1] loglam):
    cdef Py_ssize_t n = loglam.shape[0]
    cdef Py_ssize_t i, p
    cdef double base = 0.0, s
    delta_arr = np.empty((n, 3), dtype=np.float64)
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] delta = delta_arr
    cdef double[::1] out = out_arr
    with nogil:
        _delta_table(loglam, delta)
        for i in range(n):
            base += loglam[i, 2]
        for i in range(n):
            s = base - loglam[i, 2]
            for p in range(indptr[i], indptr[i + 1]):
                s += delta[indices[p], data[p] + 1]
            out[i] = s
    return out_arr
