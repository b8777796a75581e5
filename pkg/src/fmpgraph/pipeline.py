"""Partition-aware batched precompute with traffic accounting, and the analytic cost model.

Workers are simulated in one process. Traffic is counted in message entries
(floats), never bytes.
"""
import json
import time
from dataclasses import dataclass, field

import numpy as np

from fmpgraph.errors import InputError
from fmpgraph.propagation import MessageSet, _as_matrix, _meta, make_operator, step_rows

SCHEMES = ("NMP", "DNMP", "FMP", "sage")


@dataclass(frozen=True)
class PartitionPlan:
    num_workers: int
    assignment: np.ndarray

    def members(self, w):
        return np.nonzero(self.assignment == w)[0]


@dataclass
class CostReport:
    pulled: int = 0
    pushed: int = 0
    local: int = 0
    flops: int = 0
    per_step: list = field(default_factory=list)

    def to_dict(self):
        return {"pulled": self.pulled, "pushed": self.pushed, "local": self.local,
                "flops": self.flops, "per_step": self.per_step}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def partition_nodes(g, num_workers, scheme="range"):
    n = g.num_nodes if hasattr(g, "num_nodes") else int(g)
    if num_workers < 1:
        raise InputError("need at least one worker")
    if num_workers > n:
        raise InputError(f"{num_workers} workers for {n} nodes")
    if scheme == "range":
        # first n % W workers take one extra node
        sizes = np.full(num_workers, n // num_workers)
        sizes[: n % num_workers] += 1
        assign = np.repeat(np.arange(num_workers), sizes)
    elif scheme == "hash":
        ids = np.arange(n, dtype=np.uint64)
        mixed = (ids * np.uint64(2654435761)) & np.uint64(0xFFFFFFFF)
        assign = (mixed % np.uint64(num_workers)).astype(np.int64)
    else:
        raise InputError(f"unknown partition scheme {scheme!r}")
    return PartitionPlan(num_workers, assign.astype(np.int64))


def precompute_batched(g, X, op_kind, T, plan, batch_size, restart_alpha=None, dtype=np.float64):
    """Step-synchronous batched propagation; returns (MessageSet, CostReport).

    Each step, every worker walks its nodes in ascending order in batches: it
    pulls the previous-step neighbor messages (local or remote), computes the
    batch, and pushes the rows back to the shared store. The store is only
    swapped at the step barrier.
    """
    op = make_operator(g, op_kind, restart_alpha)
    if T < 0:
        raise InputError(f"step count must be >= 0, got {T}")
    if batch_size < 1:
        raise InputError("batch_size must be >= 1")
    X = _as_matrix(X, op.num_nodes, "X")
    if not np.all(np.isfinite(X)):
        raise InputError("feature matrix contains non-finite values")
    if plan.assignment.shape[0] != op.num_nodes:
        raise InputError("partition plan does not cover the graph")
    d = X.shape[1]
    n = op.num_nodes

    src = np.repeat(np.arange(n), np.diff(op.row_offsets))
    cross = plan.assignment[src] != plan.assignment[op.col_indices]
    cross_per_row = np.bincount(src, weights=cross, minlength=n).astype(np.int64)
    len_per_row = np.diff(op.row_offsets).astype(np.int64)

    steps = np.empty((T + 1, n, d), dtype=dtype)
    steps[0] = X
    report = CostReport()
    prev = X
    for t in range(1, T + 1):
        cur = np.empty_like(X)
        pulled = local = pushed = 0
        for w in range(plan.num_workers):
            nodes = plan.members(w)
            for start in range(0, nodes.size, batch_size):
                batch = nodes[start:start + batch_size]
                step_rows(op, prev, X, batch, cur)
                remote = int(cross_per_row[batch].sum())
                pulled += remote * d
                local += (int(len_per_row[batch].sum()) - remote) * d
                pushed += batch.size * d
        flops = 2 * op.nnz * d + (3 * n * d if op.kind == "ppr" else 0)
        report.per_step.append({"step": t, "pulled": pulled, "local": local,
                                "pushed": pushed, "flops": flops})
        report.pulled += pulled
        report.local += local
        report.pushed += pushed
        report.flops += flops
        steps[t] = cur
        prev = cur
    return MessageSet(steps, _meta(op, T, d)), report


def measure_precompute(g, X, op_kind, T, plan, batch_size, restart_alpha=None):
    """Wall-clock seconds plus the traffic report of one batched precompute."""
    t0 = time.perf_counter()
    ms, report = precompute_batched(g, X, op_kind, T, plan, batch_size, restart_alpha)
    return time.perf_counter() - t0, report, ms


def cost_model(N, M, d, L_p, L_u, T_epochs, k=0, scheme="FMP"):
    """Closed-form forward work and communication with unit constants.

    NMP/DNMP propagate neural messages every epoch; FMP propagates raw
    features once; sage expands k sampled neighbors per layer.
    """
    for name, v in (("N", N), ("M", M), ("d", d), ("L_p", L_p), ("L_u", L_u),
                    ("T_epochs", T_epochs), ("k", k)):
        if v < 0:
            raise InputError(f"{name} must be >= 0")
    if scheme in ("NMP", "DNMP"):
        return {"forward_flops": L_p * M * d + L_u * N * d * d,
                "comm_entries": L_p * M * T_epochs * d}
    if scheme == "FMP":
        return {"forward_flops": L_u * N * d * d, "comm_entries": L_p * M * d}
    if scheme == "sage":
        return {"forward_flops": k ** L_p * N * d * d, "comm_entries": k ** L_p * N * T_epochs * d}
    raise InputError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
