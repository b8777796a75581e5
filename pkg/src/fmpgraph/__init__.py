"""Feature-message passing: precompute multi-step node messages once, then train
MLPs with non-adaptive, gated or self-guided attention aggregation."""
from fmpgraph._backend import BACKEND
from fmpgraph.errors import ConfigError, ContractError, InputError, NumericError
from fmpgraph.graph import CsrGraph, augmented_degrees, build_csr, count_edge_triangles, validate
from fmpgraph.message_agg import combine_attention, combine_gating, combine_nonadaptive
from fmpgraph.model import ModelParams, VariantConfig, backward, forward, init_params, loss, predict
from fmpgraph.pipeline import cost_model, partition_nodes, precompute_batched
from fmpgraph.propagation import MessageSet, apply_step, make_operator, propagate
from fmpgraph.train import TrainConfig, evaluate, run_trials, train

__version__ = "0.1.0"
