"""Dataset directories, bundled fixtures, Planetoid conversion and synthetic graphs.

A dataset directory holds four text files:

* ``edges.tsv``    one ``u<TAB>v`` pair per line, 0-based, ``#`` comments allowed
* ``features.txt`` whitespace-separated floats, one node per line
* ``labels.txt``   one integer class per line
* ``splits.txt``   one of train/val/test/none per line
"""
import os
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fmpgraph.errors import InputError
from fmpgraph.graph import build_csr, read_edge_list, validate, write_edge_list

BUNDLED = Path(__file__).parent / "data"
SPLIT_NAMES = ("train", "val", "test", "none")


@dataclass
class Dataset:
    graph: object
    features: np.ndarray
    labels: np.ndarray
    splits: dict
    name: str = ""

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1

    def check(self):
        problems = validate(self.graph)
        n = self.graph.num_nodes
        if self.features.shape[0] != n or self.features.shape[1] == 0:
            problems.append(f"features have shape {self.features.shape}, expected ({n}, d>0)")
        if self.labels.shape[0] != n:
            problems.append(f"{self.labels.shape[0]} labels for {n} nodes")
        names = [k for k in ("train", "val", "test") if k in self.splits]
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if np.any(self.splits[a] & self.splits[b]):
                    problems.append(f"{a} and {b} masks overlap")
        return problems


def resolve_dataset_dir(name):
    """A directory path, or a bundled/known dataset name."""
    p = Path(name)
    if p.is_dir():
        return p
    if (BUNDLED / name).is_dir():
        return BUNDLED / name
    env = os.environ.get(f"FMPGRAPH_{str(name).upper()}_DIR")
    if env and Path(env).is_dir():
        return Path(env)
    raise InputError(f"no dataset directory {name!r} (set FMPGRAPH_{str(name).upper()}_DIR for named datasets)")


def _read_lines(path):
    if not path.is_file():
        raise InputError(f"missing dataset file {path}")
    with open(path) as f:
        return [line.rstrip("\n") for line in f]


def load_dataset(path, symmetrize=True, add_self_loops=True):
    d = resolve_dataset_dir(path)

    feat_lines = _read_lines(d / "features.txt")
    rows = []
    width = None
    for lineno, line in enumerate(feat_lines, 1):
        parts = line.split()
        if not parts:
            raise InputError(f"{d / 'features.txt'}:{lineno}: empty feature row")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise InputError(f"{d / 'features.txt'}:{lineno}: ragged row with {len(parts)} values, expected {width}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise InputError(f"{d / 'features.txt'}:{lineno}: non-numeric feature value") from None
    if not rows:
        raise InputError(f"{d / 'features.txt'}: no feature rows")
    X = np.array(rows)
    if not np.all(np.isfinite(X)):
        raise InputError(f"{d / 'features.txt'}: non-finite feature values")
    n = X.shape[0]

    label_lines = [s for s in _read_lines(d / "labels.txt")]
    if len(label_lines) != n:
        raise InputError(f"{d / 'labels.txt'}: {len(label_lines)} labels for {n} feature rows")
    labels = np.empty(n, dtype=np.int64)
    for lineno, s in enumerate(label_lines, 1):
        try:
            labels[lineno - 1] = int(s.strip())
        except ValueError:
            raise InputError(f"{d / 'labels.txt'}:{lineno}: not an integer label: {s!r}") from None
        if labels[lineno - 1] < 0:
            raise InputError(f"{d / 'labels.txt'}:{lineno}: label out of range: {s.strip()}")

    split_lines = _read_lines(d / "splits.txt")
    if len(split_lines) != n:
        raise InputError(f"{d / 'splits.txt'}: {len(split_lines)} entries for {n} nodes")
    tags = np.array([s.strip() for s in split_lines])
    for lineno, s in enumerate(tags, 1):
        if s not in SPLIT_NAMES:
            raise InputError(f"{d / 'splits.txt'}:{lineno}: unknown split {s!r}")
    splits = {k: tags == k for k in ("train", "val", "test")}

    edges = read_edge_list(d / "edges.tsv")
    if edges.size and edges.max() >= n:
        raise InputError(f"{d / 'edges.tsv'}: node id {edges.max()} outside [0, {n})")
    g = build_csr(edges, n, symmetrize=symmetrize, add_self_loops=add_self_loops)
    ds = Dataset(g, X, labels, splits, name=d.name)
    problems = ds.check()
    if problems:
        raise InputError(f"{d}: " + "; ".join(problems))
    return ds


def write_dataset(path, edges, features, labels, split_tags):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    write_edge_list(p / "edges.tsv", edges)
    with open(p / "features.txt", "w") as f:
        for row in np.asarray(features):
            f.write(" ".join(repr(float(x)) if not float(x).is_integer() else str(int(x)) for x in row))
            f.write("\n")
    with open(p / "labels.txt", "w") as f:
        f.writelines(f"{int(y)}\n" for y in labels)
    with open(p / "splits.txt", "w") as f:
        f.writelines(f"{s}\n" for s in split_tags)
    return p


def two_clique_fixture():
    """Raw arrays of the bundled toy graph: two 4-cliques bridged by edge (3, 4)."""
    edges = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    edges += [(a + 4, b + 4) for a, b in edges] + [(3, 4)]
    rng = np.random.default_rng(7)
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    centers = np.array([[1.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 0.5]])
    X = np.round(centers[labels] + rng.normal(scale=0.8, size=(8, 4)), 3)
    splits = ["train", "val", "test", "test", "test", "test", "val", "train"]
    return np.array(edges), X, labels, splits


# -- Planetoid / LINQS conversion ---------------------------------------------

def _load_pickle(path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert_planetoid(raw_dir, name, out_dir):
    """Convert the ``ind.<name>.*`` Planetoid files into a dataset directory.

    Uses the standard split: the first 20 labelled nodes per class are the
    ``x`` block (train), the next 500 are validation, ``test.index`` is test.
    """
    raw = Path(raw_dir)
    parts = {k: _load_pickle(raw / f"ind.{name}.{k}") for k in ("x", "y", "tx", "ty", "allx", "ally", "graph")}
    test_index = [int(line) for line in _read_lines(raw / f"ind.{name}.test.index") if line.strip()]
    test_sorted = np.sort(test_index)

    def dense(m):
        return m.toarray() if hasattr(m, "toarray") else np.asarray(m)

    allx, tx = dense(parts["allx"]), dense(parts["tx"])
    ally, ty = np.asarray(parts["ally"]), np.asarray(parts["ty"])
    if name == "citeseer":
        # citeseer has isolated test nodes missing from tx; pad them with zeros
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = np.zeros((full.size, tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min()] = tx
        ty_ext = np.zeros((full.size, ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min()] = ty
        tx, ty = tx_ext, ty_ext
    X = np.vstack([allx, tx])
    Y = np.vstack([ally, ty])
    # test rows arrive in test_index order; move them to their node ids
    X[test_index] = X[test_sorted]
    Y[test_index] = Y[test_sorted]
    labels = Y.argmax(axis=1)
    n = X.shape[0]

    graph = parts["graph"]
    edges = [(u, v) for u, nbrs in graph.items() for v in nbrs if u < n and v < n]
    n_train = dense(parts["x"]).shape[0]
    tags = np.array(["none"] * n, dtype=object)
    tags[:n_train] = "train"
    tags[n_train:n_train + 500] = "val"
    tags[test_sorted] = "test"
    return write_dataset(out_dir, edges, X, labels, tags)


def convert_linqs(content_path, cites_path, out_dir, per_class=20, n_val=500, n_test=1000, seed=0):
    """Convert LINQS ``.content``/``.cites`` files, drawing a Planetoid-style random split."""
    ids, feats, classes = [], [], []
    for line in _read_lines(Path(content_path)):
        parts = line.split()
        if not parts:
            continue
        ids.append(parts[0])
        feats.append([float(x) for x in parts[1:-1]])
        classes.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    names = sorted(set(classes))
    labels = np.array([names.index(c) for c in classes])
    edges = []
    for line in _read_lines(Path(cites_path)):
        parts = line.split()
        if len(parts) == 2 and parts[0] in index and parts[1] in index:
            edges.append((index[parts[1]], index[parts[0]]))
    tags = planetoid_style_split(labels, per_class, n_val, n_test, seed)
    return write_dataset(out_dir, edges, np.array(feats), labels, tags)


def planetoid_style_split(labels, per_class=20, n_val=500, n_test=1000, seed=0):
    rng = np.random.default_rng(seed)
    n = labels.shape[0]
    tags = np.array(["none"] * n, dtype=object)
    order = rng.permutation(n)
    for c in np.unique(labels):
        tags[order[labels[order] == c][:per_class]] = "train"
    rest = order[tags[order] == "none"]
    tags[rest[:n_val]] = "val"
    tags[rest[n_val:n_val + n_test]] = "test"
    return tags


def synthetic_citation(n=2000, num_classes=7, d=500, avg_degree=4.0, homophily=0.8,
                       words_per_node=18, topic_words=60, topic_rate=0.35, seed=0):
    """Citation-like benchmark: homophilous random graph plus sparse bag-of-words features.

    Each class owns ``topic_words`` vocabulary entries. A node draws each word
    from its class topic with probability ``topic_rate``, otherwise uniformly,
    so raw features alone are only weakly informative.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(num_classes, size=n)
    m = int(n * avg_degree / 2)
    src = rng.integers(n, size=m)
    same = rng.random(m) < homophily
    dst = np.empty(m, dtype=np.int64)
    by_class = [np.nonzero(labels == c)[0] for c in range(num_classes)]
    for i in range(m):
        pool = by_class[labels[src[i]]] if same[i] else None
        dst[i] = rng.choice(pool) if pool is not None else rng.integers(n)
    keep = src != dst
    edges = np.stack([src[keep], dst[keep]], axis=1)
    X = np.zeros((n, d))
    for v in range(n):
        topic = rng.random(words_per_node) < topic_rate
        base = (labels[v] * topic_words) % d
        words = np.where(topic, base + rng.integers(topic_words, size=words_per_node),
                         rng.integers(d, size=words_per_node)) % d
        X[v, words] = 1.0
    X /= np.maximum(X.sum(axis=1, keepdims=True), 1.0)
    tags = planetoid_style_split(labels, 20, 500, 1000, seed)
    g = build_csr(edges, n)
    splits = {k: tags == k for k in ("train", "val", "test")}
    return Dataset(g, X, labels, splits, name="synthetic")
