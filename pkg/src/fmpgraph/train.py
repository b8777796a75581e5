"""Mini-batch training with the NA->SGA loss schedule and early stopping."""
import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from fmpgraph import model
from fmpgraph.errors import InputError, NumericError

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 512
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 50
    seed: int = 0
    eval_every: int = 1

    def check(self):
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.patience < 1:
            raise InputError("patience must be >= 1")
        if self.eval_every < 1:
            raise InputError("eval_every must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise InputError(f"unknown optimizer {self.optimizer!r}")
        return self


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = -1.0
    best_params: object = None

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "val_acc", "alpha_t", "wall_ms"])
            for r in self.records:
                w.writerow([r["epoch"], repr(r["train_loss"]), r["val_acc"], repr(r["alpha_t"]),
                            f"{r['wall_ms']:.3f}"])


class SGD:
    def __init__(self, lr, weight_decay=0.0):
        self.lr = lr
        self.weight_decay = weight_decay

    def step(self, params, grads):
        for name, p in params.tensors.items():
            g = grads[name]
            if self.weight_decay:
                g = g + self.weight_decay * p
            p -= self.lr * g
        params.bump()


class Adam:
    """Adam with L2 weight decay folded into the gradient."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in params.tensors.items():
            g = grads[name]
            if self.weight_decay:
                g = g + self.weight_decay * p
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        params.bump()


def make_optimizer(cfg):
    if cfg.optimizer == "sgd":
        return SGD(cfg.learning_rate, cfg.weight_decay)
    return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)


def _index(mask, name):
    mask = np.asarray(mask)
    idx = np.nonzero(mask)[0] if mask.dtype == bool else mask.astype(np.int64)
    if idx.size == 0:
        raise InputError(f"{name} split is empty")
    return idx


def evaluate(params, vcfg, ms, labels, mask):
    idx = _index(mask, "evaluation")
    sub = ms.take(idx) if hasattr(ms, "take") else np.asarray(ms)[:, idx]
    return _accuracy(params, vcfg, sub, np.asarray(labels)[idx])


def _accuracy(params, vcfg, sub, labels):
    return float(np.mean(model.predict(params, vcfg, sub) == labels))


def train(cfg, vcfg, ms, labels, splits, num_classes=None, params=None):
    """Train from scratch (or from ``params``) and return (best params, history).

    ``splits`` maps "train"/"val" (and optionally "test") to boolean masks.
    The schedule weight uses the global epoch index over the planned horizon,
    so early stopping does not compress it.
    """
    cfg.check()
    vcfg.check()
    labels = np.asarray(labels)
    train_idx = _index(splits["train"], "train")
    val_idx = _index(splits["val"], "val")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = model.init_params(vcfg, ms.dim, num_classes, rng)
    opt = make_optimizer(cfg)
    hist = TrainHistory()
    # slice the message stacks once; batches index into the training block
    train_steps = np.ascontiguousarray(ms.steps[:, train_idx])
    pos_of = {v: i for i, v in enumerate(train_idx.tolist())}
    val_ms = ms.take(val_idx)
    val_labels = labels[val_idx]
    since_best = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(train_idx)
        total, seen = 0.0, 0
        a_t = 1.0
        for start in range(0, perm.size, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            sub = train_steps[:, [pos_of[v] for v in batch.tolist()]]
            y = labels[batch]
            everything = np.ones(batch.size, dtype=bool)
            trace = model.forward(params, vcfg, sub, train_mode=True, rng=rng)
            value, _, a_t = model.loss(trace, y, everything, epoch, cfg.epochs)
            if not np.isfinite(value):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            grads = model.backward(params, vcfg, sub, y, everything, epoch, cfg.epochs, trace)
            opt.step(params, grads)
            total += value * batch.size
            seen += batch.size
        val_acc = None
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs - 1:
            val_acc = _accuracy(params, vcfg, val_ms, val_labels)
            if val_acc > hist.best_val:
                hist.best_val, hist.best_epoch = val_acc, epoch
                hist.best_params = params.copy()
                since_best = 0
            else:
                since_best += cfg.eval_every
        hist.records.append({
            "epoch": epoch,
            "train_loss": total / seen,
            "val_acc": val_acc,
            "alpha_t": a_t,
            "wall_ms": 1e3 * (time.perf_counter() - t0),
        })
        log.debug("epoch %d loss %.4f val %s", epoch, total / seen, val_acc)
        if since_best >= cfg.patience:
            break
    return hist.best_params, hist


def run_trials(cfg, vcfg, ms, labels, splits, n_trials, seeds=None, num_classes=None):
    """Repeat training with derived seeds; report test accuracy at the best-val epoch."""
    if n_trials < 1:
        raise InputError("n_trials must be >= 1")
    if seeds is None:
        seeds = [cfg.seed + i for i in range(n_trials)]
    accs = []
    for s in seeds[:n_trials]:
        run_cfg = TrainConfig(**{**cfg.__dict__, "seed": int(s)})
        params, _ = train(run_cfg, vcfg, ms, labels, splits, num_classes=num_classes)
        accs.append(evaluate(params, vcfg, ms, labels, splits["test"]))
    accs = np.array(accs)
    return {"mean": float(accs.mean()), "std": float(accs.std()), "accs": accs.tolist()}
