"""Compare the compiled and numpy kernel backends.

Times one full sparse-dense product (``spmm_rows`` over all rows) and one
per-edge triangle count on random graphs, checks that both backends agree
bit-for-bit, and prints a table.

    python3 benchmarks/bench_kernels.py [--nodes 2708 20000] [--dims 16 128] [--repeat 5]
"""
import argparse
import json
import time

import numpy as np

from fmpgraph._backend import available_backends
from fmpgraph.graph import build_csr
from fmpgraph.propagation import make_operator


def random_graph(n, avg_degree, seed):
    rng = np.random.default_rng(seed)
    m = int(n * avg_degree / 2)
    edges = rng.integers(n, size=(m, 2))
    return build_csr(edges, n)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(nodes, dims, avg_degree, repeat, seed=0):
    backends = available_backends()
    rows = []
    for n in nodes:
        g = random_graph(n, avg_degree, seed)
        op = make_operator(g, "aug_norm_adj")
        loop_free = g.without_self_loops()
        all_rows = np.arange(n, dtype=np.int64)
        for d in dims:
            x = np.random.default_rng(seed).normal(size=(n, d))
            outs, timing = {}, {}
            for name, k in backends.items():
                out = np.empty_like(x)
                timing[name] = best_of(lambda: k.spmm_rows(op.row_offsets, op.col_indices,
                                                           op.edge_coeffs, x, all_rows, out), repeat)
                outs[name] = out
            rows.append(_row("spmm_rows", n, op.nnz, d, timing, outs))
        outs, timing = {}, {}
        for name, k in backends.items():
            timing[name] = best_of(lambda: k.edge_triangles(loop_free.row_offsets,
                                                            loop_free.col_indices), repeat)
            outs[name] = np.asarray(k.edge_triangles(loop_free.row_offsets, loop_free.col_indices))
        rows.append(_row("edge_triangles", n, loop_free.nnz, None, timing, outs))
    return rows


def _row(kernel, n, nnz, d, timing, outs):
    ref = next(iter(outs.values()))
    same = all(np.array_equal(ref, o) for o in outs.values())
    row = {"kernel": kernel, "nodes": n, "nnz": nnz, "dim": d, "identical": same}
    row.update({f"{name}_ms": 1e3 * t for name, t in timing.items()})
    if "cython" in timing:
        row["speedup"] = timing["python"] / timing["cython"]
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, nargs="+", default=[2708, 20000])
    ap.add_argument("--dims", type=int, nargs="+", default=[16, 128])
    ap.add_argument("--avg-degree", type=float, default=8.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print rows as JSON")
    args = ap.parse_args(argv)
    rows = bench(args.nodes, args.dims, args.avg_degree, args.repeat)
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    if "cython" not in available_backends():
        print("compiled extension not built; timing the numpy backend only")
    head = f"{'kernel':<15}{'nodes':>7}{'nnz':>9}{'dim':>5}{'python ms':>11}{'cython ms':>11}{'speedup':>9}  same"
    print(head)
    for r in rows:
        print(f"{r['kernel']:<15}{r['nodes']:>7}{r['nnz']:>9}{r['dim'] or '-':>5}"
              f"{r['python_ms']:>11.2f}{r.get('cython_ms', float('nan')):>11.2f}"
              f"{r.get('speedup', float('nan')):>9.1f}  {r['identical']}")


if __name__ == "__main__":
    main()
