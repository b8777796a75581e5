import sys

import numpy as np
import pytest

from fmpgraph._backend import available_backends
from fmpgraph.graph import build_csr


def random_edges(rng, n, p):
    a = rng.random((n, n)) < p
    u, v = np.nonzero(np.triu(a, 1))
    return np.stack([u, v], axis=1)


def random_graph(rng, n_max=64, p=None):
    n = int(rng.integers(1, n_max + 1))
    p = rng.uniform(0.02, 0.4) if p is None else p
    return build_csr(random_edges(rng, n, p), n)


def dense_aug_norm(g):
    a = g.to_dense()
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


def dense_triangle_operator(g):
    """Row-normalized A^tri with a self-loop for rows that have no triangle."""
    a = g.without_self_loops().to_dense()
    tri = (a @ a) * a
    out = np.zeros_like(a)
    for v in range(a.shape[0]):
        s = tri[v].sum()
        if s == 0:
            out[v, v] = 1.0
        else:
            out[v] = tri[v] / s
    return out


def dense_oracle(g, kind, X, T, alpha=None):
    if kind == "aug_norm_adj" or kind == "ppr":
        S = dense_aug_norm(g)
    elif kind == "random_walk":
        a = g.to_dense()
        S = a / a.sum(axis=1, keepdims=True)
    else:
        S = dense_triangle_operator(g)
    out = [X]
    for _ in range(T):
        nxt = S @ out[-1]
        if kind == "ppr":
            nxt = alpha * X + (1 - alpha) * nxt
        out.append(nxt)
    return np.stack(out)


def brute_force_triangles(g):
    a = g.without_self_loops().to_dense().astype(bool)
    n = a.shape[0]
    counts = np.zeros((n, n), dtype=np.int64)
    for x in range(n):
        for y in range(x + 1, n):
            for z in range(y + 1, n):
                if a[x, y] and a[y, z] and a[x, z]:
                    for p, q in ((x, y), (y, z), (x, z)):
                        counts[p, q] += 1
                        counts[q, p] += 1
    return counts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(available_backends()))
def backend(request):
    return available_backends()[request.param]


def k_n(n):
    return build_csr([(a, b) for a in range(n) for b in range(a + 1, n)], n)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is not None and acc.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acc.RESULTS:
            terminalreporter.write_line(line)
