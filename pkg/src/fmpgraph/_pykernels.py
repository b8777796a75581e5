"""Pure numpy implementations of the hot kernels.

Selected automatically when the compiled extension is missing. The
propagation kernel walks CSR "slots" (the k-th stored entry of every row at
once), which keeps the per-row summation order identical to the compiled
sequential loop.
"""
import numpy as np
import scipy.sparse as sp


def spmm_rows(indptr, indices, data, x, rows, out):
    """out[r] = sum_j data[j] * x[indices[j]] over row r, for every r in rows."""
    rows = np.asarray(rows, dtype=np.int64)
    starts = indptr[rows]
    degs = indptr[rows + 1] - starts
    out[rows] = 0.0
    if rows.size == 0:
        return
    order = np.argsort(-degs, kind="stable")
    rows_sorted = rows[order]
    starts_sorted = starts[order]
    degs_sorted = degs[order]
    max_deg = int(degs_sorted[0])
    # active rows for slot s form a prefix of the degree-sorted order
    n_active = np.searchsorted(-degs_sorted, -np.arange(max_deg), side="left")
    for s in range(max_deg):
        k = n_active[s]
        pos = starts_sorted[:k] + s
        out[rows_sorted[:k]] += data[pos][:, None] * x[indices[pos]]


def edge_triangles(indptr, indices):
    """Per stored entry (u, v): |N(u) & N(v)|. Rows sorted, no self-loops."""
    n = indptr.shape[0] - 1
    ones = np.ones(indices.shape[0], dtype=np.int64)
    a = sp.csr_matrix((ones, indices, indptr), shape=(n, n))
    paths = (a @ a).tocoo()
    # wedge counts u-w-v, looked up at the stored (u, v) positions
    keys = paths.row.astype(np.int64) * n + paths.col
    order = np.argsort(keys)
    keys, vals = keys[order], paths.data[order]
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    want = rows * n + indices
    pos = np.minimum(np.searchsorted(keys, want), max(keys.size - 1, 0))
    out = np.zeros(want.size, dtype=np.int64)
    if keys.size:
        hit = keys[pos] == want
        out[hit] = vals[pos[hit]]
    return out
