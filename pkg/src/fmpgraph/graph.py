"""Compressed sparse row graphs, augmented degrees and triangle weights."""
from dataclasses import dataclass

import numpy as np

from fmpgraph._backend import kernels
from fmpgraph.errors import ContractError, InputError


@dataclass(frozen=True)
class CsrGraph:
    """Immutable adjacency in compressed-row form.

    Row ``u`` lists the nodes ``u`` aggregates from, sorted ascending.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    is_undirected: bool
    has_self_loops: bool

    def __post_init__(self):
        for arr in (self.row_offsets, self.col_indices):
            arr.setflags(write=False)

    @property
    def nnz(self):
        return int(self.col_indices.shape[0])

    def row(self, u):
        return self.col_indices[self.row_offsets[u]:self.row_offsets[u + 1]]

    def row_lengths(self):
        return np.diff(self.row_offsets)

    def edges(self):
        """Stored entries as an (nnz, 2) array of (u, v) pairs."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.row_lengths())
        return np.stack([src, self.col_indices], axis=1)

    def without_self_loops(self):
        if not self.has_self_loops:
            return self
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.row_lengths())
        keep = src != self.col_indices
        offsets = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src[keep], minlength=self.num_nodes), out=offsets[1:])
        return CsrGraph(self.num_nodes, offsets, self.col_indices[keep].copy(),
                        self.is_undirected, False)

    def to_dense(self):
        a = np.zeros((self.num_nodes, self.num_nodes))
        e = self.edges()
        a[e[:, 0], e[:, 1]] = 1.0
        return a


@dataclass(frozen=True)
class TriangleWeights:
    edge_weights: np.ndarray  # aligned with col_indices of the self-loop-free graph
    node_totals: np.ndarray
    graph: CsrGraph  # the self-loop-free view the weights are aligned to


def build_csr(edges, num_nodes, symmetrize=True, add_self_loops=True):
    """Build a sorted, deduplicated CSR graph from (u, v) pairs.

    Symmetrization adds reverse edges before deduplication. Self-loops are
    added exactly once per node when requested; loops already present in the
    input are kept only in that case.
    """
    num_nodes = int(num_nodes)
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if num_nodes <= 0:
        raise InputError("graph must have at least one node")
    if e.size and (e.min() < 0 or e.max() >= num_nodes):
        bad = e[(e < 0).any(axis=1) | (e >= num_nodes).any(axis=1)][0]
        raise InputError(f"edge ({bad[0]}, {bad[1]}) has an endpoint outside [0, {num_nodes})")
    if symmetrize:
        e = np.concatenate([e, e[:, ::-1]])
    e = e[e[:, 0] != e[:, 1]]
    if add_self_loops:
        loops = np.arange(num_nodes, dtype=np.int64)
        e = np.concatenate([e, np.stack([loops, loops], axis=1)])
    if e.size:
        e = np.unique(e, axis=0)  # lexicographic sort + dedup
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(e[:, 0], minlength=num_nodes), out=offsets[1:])
    cols = np.ascontiguousarray(e[:, 1])
    undirected = bool(symmetrize) or _is_symmetric(offsets, cols, num_nodes)
    return CsrGraph(num_nodes, offsets, cols, undirected, bool(add_self_loops))


def _is_symmetric(offsets, cols, n):
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
    fwd = src * n + cols
    rev = cols * n + src
    return bool(np.array_equal(np.sort(fwd), np.sort(rev)))


def augmented_degrees(g):
    """Degrees under I + A: the row length of a graph that carries its self-loops."""
    if not g.has_self_loops:
        raise ContractError("augmented degrees need a graph built with self-loops")
    return g.row_lengths().astype(np.float64)


def count_edge_triangles(g):
    """Number of triangles each undirected edge belongs to.

    Self-loops are ignored: counts are computed on the loop-free view and the
    returned weights are aligned with that view's ``col_indices``.
    """
    if not g.is_undirected:
        raise ContractError("triangle counting requires an undirected graph")
    h = g.without_self_loops()
    w = np.asarray(kernels.edge_triangles(h.row_offsets, h.col_indices), dtype=np.int64)
    src = np.repeat(np.arange(h.num_nodes), h.row_lengths())
    totals = np.bincount(src, weights=w, minlength=h.num_nodes).astype(np.float64)
    return TriangleWeights(w, totals, h)


def validate(g):
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    n = g.num_nodes
    off = np.asarray(g.row_offsets)
    cols = np.asarray(g.col_indices)
    if off.shape[0] != n + 1:
        return [f"row_offsets has length {off.shape[0]}, expected {n + 1}"]
    if off[0] != 0:
        problems.append(f"row_offsets[0] is {off[0]}, expected 0")
    drops = np.nonzero(np.diff(off) < 0)[0]
    for u in drops:
        problems.append(f"row_offsets decreases at row {u}: {off[u]} > {off[u + 1]}")
    if off[-1] != cols.shape[0]:
        problems.append(f"row_offsets[N] is {off[-1]} but nnz is {cols.shape[0]}")
    if problems:
        return problems
    bad = np.nonzero((cols < 0) | (cols >= n))[0]
    for j in bad:
        problems.append(f"col_indices[{j}] = {cols[j]} outside [0, {n})")
    if bad.size:
        return problems
    for u in range(n):
        row = cols[off[u]:off[u + 1]]
        if row.size > 1 and np.any(np.diff(row) <= 0):
            if np.unique(row).size != row.size:
                problems.append(f"row {u} has duplicate entries")
            else:
                problems.append(f"row {u} is not sorted")
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(off))
    if g.is_undirected:
        present = set(zip(src.tolist(), cols.tolist()))
        for u, v in zip(src.tolist(), cols.tolist()):
            if (v, u) not in present:
                problems.append(f"edge ({u}, {v}) has no reverse edge ({v}, {u})")
    loops = np.zeros(n, dtype=bool)
    loops[src[src == cols]] = True
    if g.has_self_loops and not loops.all():
        missing = int(np.nonzero(~loops)[0][0])
        problems.append(f"graph flagged with self-loops but node {missing} has none")
    return problems


def read_edge_list(path):
    """Parse "u<TAB>v" lines (0-based, '#' comments) into an (E, 2) array."""
    pairs = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise InputError(f"{path}:{lineno}: negative node id")
            pairs.append((u, v))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def write_edge_list(path, edges):
    with open(path, "w") as f:
        for u, v in np.asarray(edges).reshape(-1, 2):
            f.write(f"{u}\t{v}\n")
