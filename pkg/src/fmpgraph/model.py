"""Update networks and the dual-branch self-guided model with exact gradients.

Parameters live in a flat, ordered ``{name: array}`` mapping so optimizers,
gradient checks and checkpoints can all iterate the same way. Weight matrices
are stored (in, out) so a layer is ``x @ W + b``.
"""
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from fmpgraph import message_agg as magg
from fmpgraph.errors import ConfigError, ContractError, InputError

VARIANTS = ("GU", "GMU", "FULL")
GMU_AGGREGATORS = ("concat", "mean_pool", "max_pool", "gating")

CKPT_MAGIC = b"FMPP"
CKPT_VERSION = 1


@dataclass
class VariantConfig:
    variant: str = "FULL"
    graph_agg: str = "aug_norm_adj"
    restart_alpha: float = None
    message_agg: str = "concat"  # GMU aggregator, or the NA-branch aggregator for FULL
    T: int = 5
    hidden: tuple = (64,)
    dropout: float = 0.5
    reference_source: str = "last_hidden"
    att_hidden: int = 32

    def check(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.variant == "GMU" and self.message_agg not in GMU_AGGREGATORS:
            raise ConfigError(f"GMU aggregator must be one of {GMU_AGGREGATORS}")
        if self.variant == "FULL":
            if self.message_agg not in magg.NONADAPTIVE:
                raise ConfigError("the FULL model's NA branch needs a non-adaptive aggregator")
            if self.reference_source not in ("last_hidden", "logits"):
                raise ConfigError(f"unknown reference source {self.reference_source!r}")
            if self.reference_source == "last_hidden" and not self.hidden:
                raise ConfigError("reference_source=last_hidden needs at least one hidden layer")
            if self.att_hidden < 1:
                raise ConfigError("att_hidden must be >= 1")
        return self


@dataclass
class ModelParams:
    tensors: dict
    version: int = 0

    def __getitem__(self, name):
        return self.tensors[name]

    def names(self):
        return list(self.tensors)

    def count(self):
        return int(sum(a.size for a in self.tensors.values()))

    def copy(self):
        return ModelParams({k: v.copy() for k, v in self.tensors.items()}, self.version)

    def layers(self, prefix):
        out = []
        i = 0
        while f"{prefix}.{i}.W" in self.tensors:
            out.append((self.tensors[f"{prefix}.{i}.W"], self.tensors[f"{prefix}.{i}.b"]))
            i += 1
        return out

    def bump(self):
        self.version += 1


@dataclass
class ForwardTrace:
    logits_na: np.ndarray
    logits_sga: np.ndarray = None
    attn: np.ndarray = None
    cache: dict = field(default_factory=dict)
    params_id: int = None
    params_version: int = None


def glorot(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _mlp_tensors(prefix, widths, rng):
    out = {}
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        out[f"{prefix}.{i}.W"] = glorot(rng, a, b)
        out[f"{prefix}.{i}.b"] = np.zeros(b)
    return out


def na_input_width(cfg, d):
    agg = cfg.message_agg
    if cfg.variant == "GU":
        return d
    return (cfg.T + 1) * d if agg == "concat" else d


def init_params(cfg, d, num_classes, rng):
    """Glorot-uniform weights, zero biases, zero gate and attention projection.

    W1/W2 get Glorot values: with q = 0 the first attention pass is still a
    plain mean, but the gradient with respect to q is nonzero.
    """
    cfg.check()
    hidden = tuple(cfg.hidden)
    t = _mlp_tensors("na", (na_input_width(cfg, d),) + hidden + (num_classes,), rng)
    if cfg.variant == "GMU" and cfg.message_agg == "gating":
        t["gate.s"] = np.zeros(d)
    if cfg.variant == "FULL":
        ref_width = hidden[-1] if cfg.reference_source == "last_hidden" else num_classes
        t.update(_mlp_tensors("sga", (d,) + hidden + (num_classes,), rng))
        t["att.W1"] = glorot(rng, d, cfg.att_hidden).T.copy()
        t["att.W2"] = glorot(rng, ref_width, cfg.att_hidden).T.copy()
        t["att.q"] = np.zeros(cfg.att_hidden)
    return ModelParams(t)


def expected_shapes(cfg, d, num_classes):
    p = init_params(cfg, d, num_classes, np.random.default_rng(0))
    return {k: v.shape for k, v in p.tensors.items()}


def mlp_forward(layers, x, dropout=0.0, train_mode=False, rng=None):
    """Affine -> ReLU -> dropout per hidden layer; the last layer is affine only.

    Returns ``(logits, cache)``; ``cache["last_hidden"]`` is the final ReLU
    output before dropout (None for a single-layer network).
    """
    x = np.asarray(x, dtype=np.float64)
    if not layers:
        raise InputError("an MLP needs at least one layer")
    if x.ndim != 2 or x.shape[1] != layers[0][0].shape[0]:
        raise InputError(f"input width {x.shape[-1]} does not match first layer {layers[0][0].shape[0]}")
    for (w_a, _), (w_b, _) in zip(layers[:-1], layers[1:]):
        if w_a.shape[1] != w_b.shape[0]:
            raise InputError(f"layer widths do not chain: {w_a.shape} then {w_b.shape}")
    if not 0.0 <= dropout < 1.0:
        raise InputError(f"dropout must lie in [0, 1), got {dropout}")
    use_dropout = train_mode and dropout > 0.0
    acts, pre, masks = [x], [], []
    a = x
    last_hidden = None
    for W, b in layers[:-1]:
        z = a @ W + b
        h = np.maximum(z, 0.0)
        last_hidden = h
        if use_dropout:
            m = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            a = h * m
        else:
            m = None
            a = h
        pre.append(z)
        masks.append(m)
        acts.append(a)
    W, b = layers[-1]
    out = a @ W + b
    return out, {"acts": acts, "pre": pre, "masks": masks, "last_hidden": last_hidden}


def mlp_backward(layers, cache, d_out, d_last_hidden=None):
    """Gradients of an MLP given dL/dlogits (and optionally dL/d last_hidden).

    Returns ``(layer_grads, d_input)`` with ``layer_grads[i] = (dW, db)``.
    """
    acts, pre, masks = cache["acts"], cache["pre"], cache["masks"]
    grads = [None] * len(layers)
    W, _ = layers[-1]
    grads[-1] = (acts[-1].T @ d_out, d_out.sum(axis=0))
    g = d_out @ W.T
    for i in range(len(layers) - 2, -1, -1):
        if masks[i] is not None:
            g = g * masks[i]
        if d_last_hidden is not None and i == len(layers) - 2:
            g = g + d_last_hidden
        g = g * (pre[i] > 0)
        W, _ = layers[i]
        grads[i] = (acts[i].T @ g, g.sum(axis=0))
        g = g @ W.T
    return grads, g


def _steps(cfg, ms):
    steps = np.asarray(getattr(ms, "steps", ms), dtype=np.float64)
    if steps.shape[0] != cfg.T + 1:
        raise InputError(f"messages hold {steps.shape[0] - 1} steps, config expects T={cfg.T}")
    return steps


def forward(params, cfg, ms, train_mode=False, rng=None):
    cfg.check()
    steps = _steps(cfg, ms)
    if train_mode and cfg.dropout > 0 and rng is None:
        raise InputError("training-mode forward with dropout needs an rng")
    na_layers = params.layers("na")
    cache = {}
    trace = ForwardTrace(None, cache=cache, params_id=id(params), params_version=params.version)

    if cfg.variant == "GU":
        x = steps[cfg.T]
    elif cfg.variant == "GMU" and cfg.message_agg == "gating":
        if "gate.s" not in params.tensors:
            raise ConfigError("gating aggregator configured but parameters hold no gate vector")
        x, gates = magg.combine_gating(steps, params["gate.s"])
        trace.attn = gates
        cache["gates"] = gates
    else:
        x = magg.combine_nonadaptive(steps, cfg.message_agg)
    logits, c_na = mlp_forward(na_layers, x, cfg.dropout, train_mode, rng)
    trace.logits_na = logits
    cache["na"] = c_na
    cache["steps"] = steps

    if cfg.variant != "FULL":
        return trace
    if "att.q" not in params.tensors:
        raise ConfigError("FULL variant needs attention parameters")
    R = c_na["last_hidden"] if cfg.reference_source == "last_hidden" else logits
    W1, W2, q = params["att.W1"], params["att.W2"], params["att.q"]
    scores, hidden = magg.attention_scores(steps, R, W1, W2, q)
    weights = magg.softmax_rows(scores)
    c = magg.weighted_sum(weights, steps)
    logits_sga, c_sga = mlp_forward(params.layers("sga"), c, cfg.dropout, train_mode, rng)
    trace.logits_sga = logits_sga
    trace.attn = weights
    cache.update(sga=c_sga, R=R, att_hidden=hidden)
    return trace


def schedule_alpha(t, total_epochs):
    """Weight of the NA loss at epoch t: cos(pi t / (2 T_e)), exact at both ends."""
    if total_epochs <= 0:
        raise InputError("total_epochs must be positive")
    if not 0 <= t <= total_epochs:
        raise InputError(f"epoch {t} outside [0, {total_epochs}]")
    if t == 0:
        return 1.0
    if t == total_epochs:
        return 0.0
    return math.cos(math.pi * t / (2.0 * total_epochs))


def _mask_index(mask, n):
    mask = np.asarray(mask)
    idx = np.nonzero(mask)[0] if mask.dtype == bool else mask.astype(np.int64)
    if idx.size == 0:
        raise InputError("loss mask selects no nodes")
    if mask.dtype == bool and mask.shape[0] != n:
        raise InputError(f"mask has length {mask.shape[0]}, expected {n}")
    return idx


def cross_entropy(logits, labels, idx):
    """Mean softmax cross-entropy over rows ``idx`` and its gradient w.r.t. logits."""
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = np.asarray(labels)[idx]
    n = idx.size
    value = -logp[np.arange(n), y].mean()
    grad = np.zeros_like(logits)
    p = np.exp(logp)
    p[np.arange(n), y] -= 1.0
    grad[idx] = p / n
    return value, grad


def loss(trace, labels, mask, t, total_epochs):
    """Scheduled loss: returns (total, (loss_na, loss_sga), alpha_t)."""
    idx = _mask_index(mask, trace.logits_na.shape[0])
    l_na, _ = cross_entropy(trace.logits_na, labels, idx)
    if trace.logits_sga is None:
        return l_na, (l_na, None), 1.0
    a = schedule_alpha(t, total_epochs)
    l_sga, _ = cross_entropy(trace.logits_sga, labels, idx)
    return a * l_na + (1.0 - a) * l_sga, (l_na, l_sga), a


def backward(params, cfg, ms, labels, mask, t, total_epochs, trace):
    """Exact gradients of ``loss`` w.r.t. every tensor in ``params``."""
    if trace.params_id != id(params) or trace.params_version != params.version:
        raise ContractError("trace was produced with different or since-updated parameters")
    cache = trace.cache
    steps = cache["steps"]
    idx = _mask_index(mask, trace.logits_na.shape[0])
    grads = {}

    if trace.logits_sga is None:
        a = 1.0
    else:
        a = schedule_alpha(t, total_epochs)
    _, g_na = cross_entropy(trace.logits_na, labels, idx)
    g_na *= a

    d_ref = None
    if trace.logits_sga is not None:
        _, g_sga = cross_entropy(trace.logits_sga, labels, idx)
        g_sga *= 1.0 - a
        sga_layers = params.layers("sga")
        layer_grads, d_c = mlp_backward(sga_layers, cache["sga"], g_sga)
        _store(grads, "sga", layer_grads)
        w = trace.attn
        H = cache["att_hidden"]
        R = cache["R"]
        W2, q = params["att.W2"], params["att.q"]
        d_w = (steps * d_c[None]).sum(axis=2).T
        d_score = w * (d_w - (w * d_w).sum(axis=1, keepdims=True))
        grads["att.q"] = np.tensordot(d_score.T, H, axes=([0, 1], [0, 1]))
        d_u = d_score.T[:, :, None] * q * (1.0 - H * H)
        grads["att.W1"] = np.tensordot(d_u, steps, axes=([0, 1], [0, 1]))
        d_u_sum = d_u.sum(axis=0)
        grads["att.W2"] = d_u_sum.T @ R
        d_ref = d_u_sum @ W2
        if cfg.reference_source == "logits":
            g_na = g_na + d_ref
            d_ref = None

    layer_grads, d_x = mlp_backward(params.layers("na"), cache["na"], g_na, d_ref)
    _store(grads, "na", layer_grads)
    if "gates" in cache:
        g = cache["gates"]
        d_g = (steps * d_x[None]).sum(axis=2).T
        grads["gate.s"] = np.tensordot((d_g * g * (1.0 - g)).T, steps, axes=([0, 1], [0, 1]))
    return {k: grads[k] for k in params.names()}


def _store(grads, prefix, layer_grads):
    for i, (dW, db) in enumerate(layer_grads):
        grads[f"{prefix}.{i}.W"] = dW
        grads[f"{prefix}.{i}.b"] = db


def predict_logits(params, cfg, ms):
    trace = forward(params, cfg, ms, train_mode=False)
    return trace.logits_sga if trace.logits_sga is not None else trace.logits_na


def predict(params, cfg, ms):
    """Class per node; FULL models use the SGA branch. Ties go to the lowest index."""
    return np.argmax(predict_logits(params, cfg, ms), axis=1)


def save_params(path, params):
    """Header (magic, version, tensor count, then name and shape per tensor), then float32 data."""
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", CKPT_MAGIC, CKPT_VERSION, len(params.tensors)))
        for name, arr in params.tensors.items():
            raw = name.encode()
            f.write(struct.pack("<I", len(raw)) + raw)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for arr in params.tensors.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_params(path):
    with open(path, "rb") as f:
        data = f.read()
    try:
        magic, version, count = struct.unpack_from("<4sII", data, 0)
    except struct.error:
        raise InputError(f"{path}: truncated checkpoint header") from None
    if magic != CKPT_MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    specs = []
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", data, off)
            name = data[off + 4:off + 4 + n].decode()
            off += 4 + n
            (ndim,) = struct.unpack_from("<I", data, off)
            shape = struct.unpack_from(f"<{ndim}I", data, off + 4)
            off += 4 + 4 * ndim
            specs.append((name, shape))
    except struct.error:
        raise InputError(f"{path}: truncated checkpoint header") from None
    tensors = {}
    for name, shape in specs:
        size = int(np.prod(shape)) if shape else 1
        chunk = data[off:off + 4 * size]
        if len(chunk) != 4 * size:
            raise InputError(f"{path}: truncated data for {name}")
        tensors[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64)
        off += 4 * size
    if off != len(data):
        raise InputError(f"{path}: {len(data) - off} trailing bytes")
    return ModelParams(tensors)
