import numpy as np
import pytest
from scipy.optimize import linprog
from hypothesis import given, settings, strategies as st

from conftest import dense_aug_norm, dense_oracle, dense_triangle_operator, k_n, random_graph
from fmpgraph.errors import ContractError, InputError
from fmpgraph.graph import augmented_degrees, build_csr
from fmpgraph.propagation import (MessageSet, apply_step, make_operator, propagate, read_messages,
                                  write_messages)


def path2():
    return build_csr([(0, 1)], 2)


def single():
    return build_csr([], 1)


def test_path_aug_norm_operator():
    op = make_operator(path2(), "aug_norm_adj")
    # D^-1/2 (I + A) D^-1/2 with d = [2, 2]
    np.testing.assert_allclose(op.to_dense(), [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(op.to_dense(), dense_aug_norm(path2()))


@pytest.mark.parametrize("kind, alpha", [("aug_norm_adj", None), ("random_walk", None),
                                         ("ppr", 0.3), ("triangle", None)])
def test_single_node_is_fixed_point(kind, alpha):
    op = make_operator(single(), kind, alpha)
    assert op.to_dense().tolist() == [[1.0]]
    assert apply_step(op, [[2.5]], [[2.5]]).tolist() == [[2.5]]


def test_k3_triangle_operator():
    op = make_operator(k_n(3), "triangle")
    dense = op.to_dense()
    np.testing.assert_allclose(dense, [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])


def test_triangle_fallback_self_loop():
    # a path has no triangles: every row falls back to its own message
    g = build_csr([(0, 1), (1, 2)], 3)
    op = make_operator(g, "triangle")
    np.testing.assert_array_equal(op.to_dense(), np.eye(3))


def test_operator_errors():
    with pytest.raises(InputError):
        make_operator(path2(), "ppr", 0.0)
    with pytest.raises(InputError):
        make_operator(path2(), "ppr", 1.5)
    with pytest.raises(InputError):
        make_operator(path2(), "ppr")
    with pytest.raises(InputError):
        make_operator(path2(), "aug_norm_adj", 0.5)
    with pytest.raises(InputError):
        make_operator(path2(), "heat")
    with pytest.raises(ContractError):
        make_operator(build_csr([(0, 1)], 2, add_self_loops=False), "random_walk")


def test_apply_step_examples():
    op = make_operator(path2(), "aug_norm_adj")
    np.testing.assert_allclose(apply_step(op, np.eye(2)), [[0.5, 0.5], [0.5, 0.5]])
    ppr = make_operator(single(), "ppr", 0.3)
    assert apply_step(ppr, [[1.0]], [[1.0]]).tolist() == [[1.0]]
    rw = make_operator(k_n(3), "random_walk")
    out = apply_step(rw, np.array([[1.0], [0.0], [0.0]]))
    np.testing.assert_allclose(out[:, 0], [1 / 3, 1 / 3, 1 / 3])


def test_apply_step_shape_errors():
    op = make_operator(path2(), "aug_norm_adj")
    with pytest.raises(InputError):
        apply_step(op, np.ones((3, 2)))
    ppr = make_operator(path2(), "ppr", 0.5)
    with pytest.raises(InputError):
        apply_step(ppr, np.ones((2, 2)), np.ones((2, 3)))


def test_propagate_examples():
    X = np.eye(2)
    op = make_operator(path2(), "aug_norm_adj")
    ms = propagate(op, X, 0)
    assert ms.T == 0 and np.array_equal(ms.steps[0], X)
    ms = propagate(op, X, 2)
    np.testing.assert_allclose(ms.steps[2], [[0.5, 0.5], [0.5, 0.5]])
    ppr = make_operator(k_n(3), "ppr", 1.0)
    Xk = np.arange(6.0).reshape(3, 2)
    ms = propagate(ppr, Xk, 4)
    for t in range(5):
        assert np.array_equal(ms.steps[t], Xk)


def test_propagate_rejects_nonfinite():
    op = make_operator(path2(), "aug_norm_adj")
    with pytest.raises(InputError):
        propagate(op, np.array([[np.nan], [0.0]]), 1)
    with pytest.raises(InputError):
        propagate(op, np.ones((2, 1)), -1)


@pytest.mark.parametrize("kind", ["aug_norm_adj", "random_walk", "ppr", "triangle"])
def test_oracle_equivalence(rng, kind):
    for _ in range(25):
        g = random_graph(rng, n_max=64)
        alpha = float(rng.uniform(0.05, 1.0)) if kind == "ppr" else None
        T = int(rng.integers(0, 9))
        X = rng.normal(size=(g.num_nodes, int(rng.integers(1, 5))))
        ms = propagate(make_operator(g, kind, alpha), X, T)
        np.testing.assert_allclose(ms.steps, dense_oracle(g, kind, X, T, alpha), rtol=0, atol=1e-6)
        assert np.all(np.isfinite(ms.steps))


def test_sqrt_degree_is_fixed_point(rng):
    for _ in range(20):
        g = random_graph(rng)
        v = np.sqrt(augmented_degrees(g))[:, None]
        out = apply_step(make_operator(g, "aug_norm_adj"), v)
        np.testing.assert_allclose(out, v, rtol=0, atol=1e-9)


@pytest.mark.parametrize("kind", ["random_walk", "triangle"])
def test_row_stochastic_conserves_ones(rng, kind):
    for _ in range(20):
        g = random_graph(rng)
        ones = np.ones((g.num_nodes, 1))
        np.testing.assert_allclose(apply_step(make_operator(g, kind), ones), ones, rtol=0, atol=1e-9)


def connected_graph(rng, n):
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    edges += [tuple(rng.integers(0, n, 2)) for _ in range(int(rng.integers(0, 2 * n)))]
    return build_csr(edges, n)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_ppr_differences_contract_in_l2(n, alpha, seed):
    # the operator is symmetric with spectral norm 1, so successive differences
    # shrink by at least 1 - alpha in the Euclidean norm
    rng = np.random.default_rng(seed)
    g = connected_graph(rng, n)
    ms = propagate(make_operator(g, "ppr", alpha), rng.normal(size=(n, 2)), 8)
    diffs = [np.linalg.norm(ms.steps[t + 1] - ms.steps[t]) for t in range(8)]
    for t in range(1, 7):
        assert diffs[t + 1] <= (1 - alpha) * diffs[t] + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.integers(1, 4), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_ppr_sup_norm_contracts_on_regular_graphs(n, half_k, alpha, seed):
    # circulant graphs are regular, making the operator row-stochastic
    half_k = min(half_k, (n - 1) // 2)
    edges = [(i, (i + s) % n) for i in range(n) for s in range(1, half_k + 1)]
    g = build_csr(edges, n)
    X = np.random.default_rng(seed).normal(size=(n, 2))
    ms = propagate(make_operator(g, "ppr", alpha), X, 8)
    diffs = [np.abs(ms.steps[t + 1] - ms.steps[t]).max() for t in range(8)]
    assert all(diffs[t + 1] <= diffs[t] + 1e-12 for t in range(1, 7))


def test_ppr_sup_norm_can_grow_on_irregular_graphs():
    # counterexample: on a connected 16-node tree-like graph the largest
    # per-entry change grows between steps t=1 and t=2 at alpha = 0.1
    edges = [(1, 0), (2, 0), (3, 0), (4, 3), (5, 0), (6, 3), (7, 4), (8, 3), (9, 2),
             (10, 0), (11, 0), (12, 10), (13, 8), (14, 6), (15, 14), (8, 7)]
    g = build_csr(edges, 16)
    S = make_operator(g, "aug_norm_adj").to_dense()
    v = np.sqrt(augmented_degrees(g))
    # differences obey d1 = 0.9 S d0 and d2 = 0.9 S d1, with d0 = 0.9 (S - I) X any
    # vector orthogonal to sqrt(degrees). Choose d0 so that S d0 lies in the unit
    # box while (S S d0) is as large as possible at the hub, row 0.
    res = linprog(-(S @ S)[0], A_ub=np.vstack([S, -S]), b_ub=np.ones(32), A_eq=v[None],
                  b_eq=[0.0], bounds=[(None, None)] * 16)
    assert -res.fun > 1 / 0.9
    X = np.linalg.lstsq(0.9 * (S - np.eye(16)), res.x[:, None], rcond=None)[0]
    ms = propagate(make_operator(g, "ppr", 0.1), X, 3)
    diffs = [np.abs(ms.steps[t + 1] - ms.steps[t]).max() for t in range(3)]
    assert diffs[2] > 1.3 * diffs[1]


def test_message_file_round_trip(tmp_path, rng):
    g = random_graph(rng, n_max=20)
    ms = propagate(make_operator(g, "aug_norm_adj"), rng.normal(size=(g.num_nodes, 3)), 2,
                   dtype=np.float32)
    p = tmp_path / "m.fmpm"
    write_messages(p, ms)
    back = read_messages(p)
    assert back.steps.dtype == np.float32
    assert back.steps.tobytes() == ms.steps.tobytes()
    raw = p.read_bytes()
    assert raw[:4] == b"FMPM"
    assert len(raw) == 24 + 3 * g.num_nodes * 3 * 4
    write_messages(tmp_path / "again.fmpm", back)
    assert (tmp_path / "again.fmpm").read_bytes() == raw


def test_message_file_rejects_corruption(tmp_path):
    ms = MessageSet(np.zeros((1, 2, 2), dtype=np.float32))
    p = tmp_path / "m.fmpm"
    write_messages(p, ms)
    raw = p.read_bytes()
    (tmp_path / "bad_magic").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "short").write_bytes(raw[:-1])
    for name in ("bad_magic", "short"):
        with pytest.raises(InputError):
            read_messages(tmp_path / name)
