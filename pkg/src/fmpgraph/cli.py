"""Command line entry point: precompute, train, eval, bench, cost-model, validate.

Exit codes: 0 ok, 1 usage, 2 input error, 3 numeric error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from fmpgraph import model, pipeline
from fmpgraph.config import RunConfig, load_config
from fmpgraph.data import load_dataset
from fmpgraph.errors import InputError, NumericError
from fmpgraph.propagation import read_messages, write_messages
from fmpgraph.train import evaluate, run_trials, train

log = logging.getLogger("fmpgraph")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

_ALIASES = {"graph_agg": ["--agg"], "restart_alpha": ["--alpha"]}

class UsageError(Exception):
    pass

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)

def _add_run_options(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--dataset", default="toy", help="dataset directory or bundled name")
    g = p.add_argument_group("run options (override the config file)")
    for f in RunConfig.__dataclass_fields__.values():
        flags = ["--" + f.name.replace("_", "-")] + _ALIASES.get(f.name, [])
        g.add_argument(*flags, dest=f"cfg_{f.name}", default=None, metavar="V",
                       help=f.metadata["doc"])

def build_parser():
    parser = _Parser(prog="fmp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("precompute", help="propagate features and write the message file")
    _add_run_options(p)
    p.add_argument("--out", default="runs/precompute", help="output directory")

    p = sub.add_parser("train", help="train on precomputed messages")
    _add_run_options(p)
    p.add_argument("--messages", help="message file (precomputed on the fly if omitted)")
    p.add_argument("--out", default="runs/train", help="output directory")

    p = sub.add_parser("eval", help="accuracy of a checkpoint on one split")
    _add_run_options(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--messages")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])

    p = sub.add_parser("bench", help="repeated training runs, mean and std of test accuracy")
    _add_run_options(p)
    p.add_argument("--trials", type=int, default=10)

    p = sub.add_parser("cost-model", help="closed-form forward/communication comparison")
    for name in ("N", "M", "d"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--Lp", type=int, default=2)
    p.add_argument("--Lu", type=int, default=2)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--k", type=int, default=10, help="sampled neighbors per layer (sage)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")

    p = sub.add_parser("validate", help="check a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--no-symmetrize", action="store_true")
    return parser

def _run_config(args):
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_")}
    return load_config(args.config, overrides)

def _load(args, rc):
    return load_dataset(args.dataset, symmetrize=rc.symmetrize, add_self_loops=rc.self_loops)

def _precompute(ds, rc):
    plan = pipeline.partition_nodes(ds.graph, rc.workers, rc.partition)
    return pipeline.precompute_batched(ds.graph, ds.features, rc.graph_agg, rc.steps, plan,
                                       rc.precompute_batch, rc.restart_alpha)

def _messages(args, ds, rc):
    if getattr(args, "messages", None):
        ms = read_messages(args.messages)
        if ms.num_nodes != ds.graph.num_nodes or ms.T != rc.steps:
            raise InputError(f"{args.messages}: holds N={ms.num_nodes}, T={ms.T}; "
                             f"expected N={ds.graph.num_nodes}, T={rc.steps}")
        return ms
    ms, _ = _precompute(ds, rc)
    return ms

def cmd_precompute(args):
    rc = _run_config(args)
    ds = _load(args, rc)
    ms, report = _precompute(ds, rc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_messages(out / "messages.fmpm", ms)
    (out / "cost.json").write_text(report.to_json() + "\n")
    print(f"wrote {out / 'messages.fmpm'} (N={ms.num_nodes}, T={ms.T}, d={ms.dim})")
    print(f"traffic: pulled={report.pulled} local={report.local} pushed={report.pushed}")
    return EXIT_OK

def cmd_train(args):
    rc = _run_config(args)
    ds = _load(args, rc)
    ms = _messages(args, ds, rc)
    vcfg, tcfg = rc.variant_config(), rc.train_config()
    params, hist = train(tcfg, vcfg, ms, ds.labels, ds.splits, num_classes=ds.num_classes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save_params(out / "params.fmpp", params)
    hist.write_csv(out / "history.csv")
    (out / "run.cfg").write_text(rc.to_text())
    test = evaluate(params, vcfg, ms, ds.labels, ds.splits["test"]) if ds.splits["test"].any() else float("nan")
    print(f"best epoch {hist.best_epoch}  val {hist.best_val:.4f}  test {test:.4f}")
    print(f"wrote {out / 'params.fmpp'}, {out / 'history.csv'}")
    return EXIT_OK

def cmd_eval(args):
    rc = _run_config(args)
    ds = _load(args, rc)
    ms = _messages(args, ds, rc)
    vcfg = rc.variant_config()
    params = model.load_params(args.checkpoint)
    want = model.expected_shapes(vcfg, ms.dim, ds.num_classes)
    got = {k: v.shape for k, v in params.tensors.items()}
    if want != got:
        raise InputError(f"{args.checkpoint}: parameter shapes do not match the run config")
    acc = evaluate(params, vcfg, ms, ds.labels, ds.splits[args.split])
    print(f"{args.split} accuracy {acc:.4f}")
    return EXIT_OK

def cmd_bench(args):
    rc = _run_config(args)
    ds = _load(args, rc)
    ms = _messages(args, ds, rc)
    res = run_trials(rc.train_config(), rc.variant_config(), ms, ds.labels, ds.splits,
                     args.trials, num_classes=ds.num_classes)
    print(f"{rc.variant} T={rc.steps} {rc.graph_agg}: {100 * res['mean']:.1f} ± {100 * res['std']:.1f} "
          f"({args.trials} trials)")
    return EXIT_OK

def cmd_cost_model(args):
    rows = {s: pipeline.cost_model(args.N, args.M, args.d, args.Lp, args.Lu, args.epochs, args.k, s)
            for s in pipeline.SCHEMES}
    ratio = rows["NMP"]["comm_entries"] / rows["FMP"]["comm_entries"] if rows["FMP"]["comm_entries"] else float("inf")
    if args.json:
        print(json.dumps({"schemes": rows, "nmp_over_fmp_comm": ratio}, indent=2))
        return EXIT_OK
    print(f"{'scheme':<6} {'forward_flops':>18} {'comm_entries':>18}")
    for s, r in rows.items():
        print(f"{s:<6} {r['forward_flops']:>18d} {r['comm_entries']:>18d}")
    print(f"FMP/NMP comm ratio: 1/{ratio:g}  (NMP moves {ratio:g}x more entries)")
    return EXIT_OK

def cmd_validate(args):
    ds = load_dataset(args.dataset, symmetrize=not args.no_symmetrize)
    print(f"ok: N={ds.graph.num_nodes} nnz={ds.graph.nnz} d={ds.features.shape[1]} "
          f"C={ds.num_classes} train={ds.splits['train'].sum()} val={ds.splits['val'].sum()} "
          f"test={ds.splits['test'].sum()}")
    return EXIT_OK

COMMANDS = {
    "precompute": cmd_precompute, "train": cmd_train, "eval": cmd_eval,
    "bench": cmd_bench, "cost-model": cmd_cost_model, "validate": cmd_validate,
}

def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"fmp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"fmp: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        print(f"fmp: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

if __name__ == "__main__":
    sys.exit(main())
