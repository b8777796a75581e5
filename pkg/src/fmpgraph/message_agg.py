"""Per-node combination of multi-step messages.

All functions take the stacked step array of shape (T + 1, N, d) (or a
``MessageSet``) and return the combined (N, out) matrix. The adaptive
combiners also return their (N, T + 1) weight matrix.
"""
import numpy as np

from fmpgraph.errors import InputError, NumericError

NONADAPTIVE = ("concat", "mean_pool", "max_pool")


def _steps(ms):
    steps = getattr(ms, "steps", ms)
    steps = np.asarray(steps)
    if steps.ndim != 3 or steps.shape[0] == 0:
        raise InputError(f"expected a (T+1, N, d) message stack, got shape {steps.shape}")
    return steps


def combine_nonadaptive(ms, kind):
    steps = _steps(ms)
    if kind == "concat":
        return np.concatenate(list(steps), axis=1)
    if kind == "mean_pool":
        return steps.mean(axis=0)
    if kind == "max_pool":
        return steps.max(axis=0)
    raise InputError(f"unknown non-adaptive aggregator {kind!r}")


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def combine_gating(ms, s):
    """c_v = sum_i sigmoid(s . m_v^i) m_v^i with one gate vector shared by all nodes.

    Gates are not normalized across steps.
    """
    steps = _steps(ms)
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.shape[0] != steps.shape[2]:
        raise InputError(f"gate vector has length {s.shape[0]}, messages have width {steps.shape[2]}")
    gates = sigmoid((steps @ s).T)
    combined = weighted_sum(gates, steps)
    return combined, gates


def weighted_sum(weights, steps):
    """sum_i weights[v, i] * steps[i, v] for every node v."""
    out = weights[:, :1] * steps[0]
    for i in range(1, steps.shape[0]):
        out += weights[:, i:i + 1] * steps[i]
    return out


def softmax_rows(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def attention_scores(steps, R, W1, W2, q):
    """score[v, i] = q . tanh(W1 m_v^i + W2 r_v); also returns the tanh block (T+1, N, h_att)."""
    hidden = np.tanh(steps @ W1.T + (R @ W2.T)[None])
    return (hidden @ q).T, hidden


def combine_attention(ms, R, W1, W2, q):
    """Softmax over steps of reference-guided additive attention scores."""
    steps = _steps(ms)
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    W1 = np.atleast_2d(np.asarray(W1, dtype=np.float64))
    W2 = np.atleast_2d(np.asarray(W2, dtype=np.float64))
    q = np.asarray(q, dtype=np.float64).ravel()
    n, d = steps.shape[1], steps.shape[2]
    h_att = q.shape[0]
    if R.shape[0] != n:
        raise InputError(f"reference has {R.shape[0]} rows, messages have {n} nodes")
    if W1.shape != (h_att, d):
        raise InputError(f"W1 must be {(h_att, d)}, got {W1.shape}")
    if W2.shape != (h_att, R.shape[1]):
        raise InputError(f"W2 must be {(h_att, R.shape[1])}, got {W2.shape}")
    scores, _ = attention_scores(steps, R, W1, W2, q)
    if not np.all(np.isfinite(scores)):
        raise NumericError("attention scores are not finite")
    weights = softmax_rows(scores)
    return weighted_sum(weights, steps), weights
