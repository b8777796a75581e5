"""Graph aggregators as sparse operators, and multi-step feature propagation."""
import struct
from dataclasses import dataclass, field

import numpy as np

from fmpgraph._backend import kernels
from fmpgraph.errors import ContractError, InputError
from fmpgraph.graph import augmented_degrees, count_edge_triangles

KINDS = ("aug_norm_adj", "random_walk", "ppr", "triangle")

MAGIC = b"FMPM"
VERSION = 1
_HEADER = struct.Struct("<4sIQII")


@dataclass(frozen=True)
class PropagationOperator:
    """A normalized sparse operator; row v holds the coefficients v aggregates with.

    ``row_offsets``/``col_indices`` may differ from the source graph's
    (the triangle kind drops zero-weight edges and adds fallback self-loops).
    """

    kind: str
    graph: object
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_coeffs: np.ndarray
    restart_alpha: float = None

    @property
    def num_nodes(self):
        return self.graph.num_nodes

    @property
    def nnz(self):
        return int(self.col_indices.shape[0])

    def to_dense(self):
        """Dense operator matrix, excluding the PPR restart term."""
        n = self.num_nodes
        out = np.zeros((n, n))
        src = np.repeat(np.arange(n), np.diff(self.row_offsets))
        np.add.at(out, (src, self.col_indices), self.edge_coeffs)
        return out


@dataclass
class MessageSet:
    """Messages m^0..m^T stacked as an array of shape (T + 1, N, d)."""

    steps: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.steps.shape[0] - 1

    @property
    def num_nodes(self):
        return self.steps.shape[1]

    @property
    def dim(self):
        return self.steps.shape[2]

    def take(self, nodes):
        """Restrict to a subset of nodes (rows), keeping step order."""
        return MessageSet(self.steps[:, nodes], dict(self.meta))


def make_operator(g, kind, restart_alpha=None):
    if kind not in KINDS:
        raise InputError(f"unknown graph aggregator {kind!r}; choose from {', '.join(KINDS)}")
    if kind == "ppr":
        if restart_alpha is None:
            raise InputError("ppr needs restart_alpha")
        restart_alpha = float(restart_alpha)
        if not 0.0 < restart_alpha <= 1.0:
            raise InputError(f"restart_alpha must lie in (0, 1], got {restart_alpha}")
    elif restart_alpha is not None:
        raise InputError(f"restart_alpha only applies to ppr, not {kind}")

    if kind == "triangle":
        return _triangle_operator(g)

    if not g.has_self_loops:
        raise ContractError(f"{kind} requires a graph built with self-loops")
    deg = augmented_degrees(g)
    src = np.repeat(np.arange(g.num_nodes), g.row_lengths())
    dst = g.col_indices
    if kind == "random_walk":
        coeffs = 1.0 / deg[src]
    else:
        coeffs = 1.0 / np.sqrt(deg[src] * deg[dst])
    return PropagationOperator(kind, g, g.row_offsets, g.col_indices, coeffs, restart_alpha)


def _triangle_operator(g):
    tri = count_edge_triangles(g)
    h = tri.graph
    n = h.num_nodes
    src = np.repeat(np.arange(n), h.row_lengths())
    keep = tri.edge_weights > 0
    zero_rows = np.nonzero(tri.node_totals == 0)[0]
    # rows without any triangle keep their own message (weight-1 self-loop)
    rows = np.concatenate([src[keep], zero_rows])
    cols = np.concatenate([h.col_indices[keep], zero_rows])
    w = np.concatenate([tri.edge_weights[keep] / tri.node_totals[src[keep]],
                        np.ones(zero_rows.size)])
    order = np.lexsort((cols, rows))
    rows, cols, w = rows[order], cols[order], w[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return PropagationOperator("triangle", g, offsets, np.ascontiguousarray(cols, dtype=np.int64),
                               np.ascontiguousarray(w))


def step_rows(op, m_prev, m0, rows, out):
    """Write one propagation step for ``rows`` into ``out`` (float64, in place)."""
    kernels.spmm_rows(op.row_offsets, op.col_indices, op.edge_coeffs, m_prev, rows, out)
    if op.kind == "ppr":
        a = op.restart_alpha
        out[rows] = a * m0[rows] + (1.0 - a) * out[rows]


def apply_step(op, m_prev, m0=None):
    """One application of the operator; ``m0`` is only read by the ppr kind."""
    m_prev = _as_matrix(m_prev, op.num_nodes, "m_prev")
    if op.kind == "ppr":
        if m0 is None:
            raise InputError("ppr step needs the initial messages m0")
        m0 = _as_matrix(m0, op.num_nodes, "m0")
        if m0.shape != m_prev.shape:
            raise InputError(f"m0 shape {m0.shape} differs from m_prev shape {m_prev.shape}")
    out = np.empty_like(m_prev)
    step_rows(op, m_prev, m0, np.arange(op.num_nodes, dtype=np.int64), out)
    return out


def propagate(op, X, T, dtype=np.float64):
    """Messages X, SX, S^2 X, ... for T steps (ppr adds the restart term each step)."""
    if T < 0:
        raise InputError(f"step count must be >= 0, got {T}")
    X = _as_matrix(X, op.num_nodes, "X")
    if not np.all(np.isfinite(X)):
        raise InputError("feature matrix contains non-finite values")
    steps = np.empty((T + 1,) + X.shape, dtype=dtype)
    steps[0] = X
    rows = np.arange(op.num_nodes, dtype=np.int64)
    prev = X
    for t in range(1, T + 1):
        cur = np.empty_like(X)
        step_rows(op, prev, X, rows, cur)
        steps[t] = cur
        prev = cur
    return MessageSet(steps, _meta(op, T, X.shape[1]))


def _meta(op, T, d):
    return {"kind": op.kind, "restart_alpha": op.restart_alpha, "T": T, "d": d}


def _as_matrix(a, n, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] != n:
        raise InputError(f"{name} must have {n} rows, got shape {a.shape}")
    return a


def write_messages(path, ms):
    """Binary layout: header then (T+1)*N*d little-endian float32, step-major."""
    steps = np.ascontiguousarray(ms.steps, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, ms.num_nodes, ms.T, ms.dim))
        f.write(steps.tobytes())


def read_messages(path):
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise InputError(f"{path}: truncated header")
        magic, version, n, T, d = _HEADER.unpack(head)
        if magic != MAGIC:
            raise InputError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise InputError(f"{path}: unsupported version {version}")
        payload = f.read()
    expected = (T + 1) * n * d * 4
    if len(payload) != expected:
        raise InputError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    steps = np.frombuffer(payload, dtype="<f4").reshape(T + 1, n, d).astype(np.float32)
    return MessageSet(steps, {"T": T, "d": d})
