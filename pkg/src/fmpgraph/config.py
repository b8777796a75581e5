"""Flat key=value run configuration with CLI overrides.

Precedence is CLI flag > config file > default. Unknown keys are rejected.
"""
from dataclasses import dataclass, field, fields

from fmpgraph.errors import ConfigError
from fmpgraph.model import VariantConfig
from fmpgraph.train import TrainConfig


def _opt_float(s):
    return None if str(s).lower() in ("", "none") else float(s)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _widths(s):
    if isinstance(s, (tuple, list)):
        return tuple(int(x) for x in s)
    s = str(s).strip()
    return tuple(int(x) for x in s.split(",") if x.strip()) if s else ()


def _upper(s):
    return str(s).upper()


@dataclass
class RunConfig:
    variant: str = field(default="FULL", metadata={"parse": _upper, "doc": "GU, GMU or FULL"})
    graph_agg: str = field(default="aug_norm_adj", metadata={"parse": str, "doc": "aug_norm_adj, random_walk, ppr or triangle"})
    restart_alpha: float = field(default=None, metadata={"parse": _opt_float, "doc": "ppr restart probability in (0, 1]"})
    message_agg: str = field(default="concat", metadata={"parse": str, "doc": "GMU aggregator or FULL NA-branch aggregator"})
    steps: int = field(default=5, metadata={"parse": int, "doc": "propagation steps T"})
    hidden: tuple = field(default=(64,), metadata={"parse": _widths, "doc": "comma-separated hidden widths"})
    dropout: float = field(default=0.5, metadata={"parse": float, "doc": "dropout rate"})
    reference_source: str = field(default="last_hidden", metadata={"parse": str, "doc": "last_hidden or logits"})
    att_hidden: int = field(default=32, metadata={"parse": int, "doc": "attention projection width"})
    epochs: int = field(default=200, metadata={"parse": int, "doc": "planned epochs T_e"})
    batch_size: int = field(default=512, metadata={"parse": int, "doc": "training batch size"})
    lr: float = field(default=0.01, metadata={"parse": float, "doc": "learning rate"})
    weight_decay: float = field(default=5e-4, metadata={"parse": float, "doc": "L2 weight decay"})
    optimizer: str = field(default="adam", metadata={"parse": str, "doc": "adam or sgd"})
    beta1: float = field(default=0.9, metadata={"parse": float, "doc": "adam beta1"})
    beta2: float = field(default=0.999, metadata={"parse": float, "doc": "adam beta2"})
    eps: float = field(default=1e-8, metadata={"parse": float, "doc": "adam epsilon"})
    patience: int = field(default=50, metadata={"parse": int, "doc": "early-stopping patience in epochs"})
    seed: int = field(default=0, metadata={"parse": int, "doc": "base random seed"})
    eval_every: int = field(default=1, metadata={"parse": int, "doc": "validate every k epochs"})
    workers: int = field(default=1, metadata={"parse": int, "doc": "simulated precompute workers"})
    partition: str = field(default="range", metadata={"parse": str, "doc": "range or hash"})
    precompute_batch: int = field(default=1024, metadata={"parse": int, "doc": "precompute batch size"})
    symmetrize: bool = field(default=True, metadata={"parse": _bool, "doc": "add reverse edges on load"})
    self_loops: bool = field(default=True, metadata={"parse": _bool, "doc": "add self-loops on load"})

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def variant_config(self):
        return VariantConfig(
            variant=self.variant, graph_agg=self.graph_agg, restart_alpha=self.restart_alpha,
            message_agg=self.message_agg, T=self.steps, hidden=tuple(self.hidden),
            dropout=self.dropout, reference_source=self.reference_source,
            att_hidden=self.att_hidden,
        ).check()

    def train_config(self):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.lr,
            weight_decay=self.weight_decay, optimizer=self.optimizer, beta1=self.beta1,
            beta2=self.beta2, eps=self.eps, patience=self.patience, seed=self.seed,
            eval_every=self.eval_every,
        ).check()

    def to_text(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out.append(f"{f.name}={'none' if v is None else v}")
        return "\n".join(out) + "\n"


def parse_value(key, raw):
    by_name = {f.name: f for f in fields(RunConfig)}
    if key not in by_name:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return by_name[key].metadata["parse"](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def read_config_file(path):
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            values[key] = parse_value(key, raw)
    return values


def load_config(path=None, overrides=None):
    values = read_config_file(path) if path else {}
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = parse_value(key, raw)
    return RunConfig(**values)
