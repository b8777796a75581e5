# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for CSR propagation and per-edge triangle counting.

Both routines mirror ``_pykernels`` operation for operation; the propagation
kernel accumulates each output row in ascending CSR order so results are
bit-identical to the vectorized fallback.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t


def spmm_rows(const idx_t[::1] indptr, const idx_t[::1] indices,
              const double[::1] data, const double[:, ::1] x,
              const idx_t[::1] rows, double[:, ::1] out):
    """out[r] = sum_j data[j] * x[indices[j]] over row r, for every r in rows."""
    cdef Py_ssize_t i, j, k, r, col
    cdef Py_ssize_t n_rows = rows.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef double c
    with nogil:
        for i in range(n_rows):
            r = rows[i]
            for k in range(d):
                out[r, k] = 0.0
            for j in range(indptr[r], indptr[r + 1]):
                c = data[j]
                col = indices[j]
                for k in range(d):
                    out[r, k] = out[r, k] + c * x[col, k]


def edge_triangles(const idx_t[::1] indptr, const idx_t[::1] indices):
    """Per stored entry (u, v): |N(u) & N(v)| by sorted merge.

    Rows must be sorted ascending and free of self-loops.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t nnz = indices.shape[0]
    out_arr = np.zeros(nnz, dtype=np.int64)
    cdef idx_t[::1] out = out_arr
    cdef Py_ssize_t u, v, j, a, a_end, b, b_end
    cdef idx_t count, x, y
    with nogil:
        for u in range(n):
            for j in range(indptr[u], indptr[u + 1]):
                v = indices[j]
                a = indptr[u]
                a_end = indptr[u + 1]
                b = indptr[v]
                b_end = indptr[v + 1]
                count = 0
                while a < a_end and b < b_end:
                    x = indices[a]
                    y = indices[b]
                    if x == y:
                        count += 1
                        a += 1
                        b += 1
                    elif x < y:
                        a += 1
                    else:
                        b += 1
                out[j] = count
    return out_arr
