"""Command-line entry point: ``diffmap <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .flow import DEFAULT_ALPHA, build_flow
from .graph import (
    GraphFormatError,
    Partition,
    check_connected,
    identity_features,
    load_edge_list,
    load_features,
    load_partition,
    write_partition,
)
from .harness import ExperimentSpec, run_experiment
from .mapequation import (
    DEFAULT_EPS,
    brute_force_optimum,
    codelength_entropy_form,
    codelength_expanded_form,
    codelength_soft,
)
from .metrics import ami, count_modules, mixing
from .neural import ARCHITECTURES, EncoderConfig, save_params
from .training import TrainConfig, train_trials

log = logging.getLogger("diffmap")


def _dump(doc, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _add_graph_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("edges", help="edge list: 'src dst [weight]' per line")
    p.add_argument("--directed", action="store_true", help="treat lines as arcs")
    p.add_argument("--unweighted", action="store_true", help="ignore a third column")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="teleportation probability (directed only)")


def _graph(args):
    return load_edge_list(args.edges, directed=args.directed, weighted=not args.unweighted)


def cmd_cluster(args) -> int:
    graph = _graph(args)
    check_connected(graph, strict=args.strict)
    X = load_features(args.features, graph) if args.features else identity_features(graph)
    enc = EncoderConfig(
        arch=args.arch,
        hidden_dim=args.hidden_dim,
        s=args.s,
        dropout_p=args.dropout,
        use_batch_norm=not args.no_batch_norm,
        temperature_init=args.temperature,
    )
    cfg = TrainConfig(
        lr=args.lr,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
        epsilon_loss=args.epsilon_loss,
        trials=args.trials,
        eps=args.eps,
        alpha=args.alpha,
    )
    best, results = train_trials(graph, X, enc, cfg, workers=args.workers)
    part = best.partition
    flow = build_flow(graph, args.alpha)
    doc = {
        "arch": enc.arch,
        "seed": best.seed,
        "codelength": best.best_loss_bits,
        "hard_codelength": codelength_expanded_form(flow, part).total,
        "modules": count_modules(part),
        "epochs": best.epochs_run,
        "best_epoch": best.best_epoch,
        "temperature": best.temperature,
        "partition": dict(zip(graph.node_ids, part.labels.tolist())),
        "trials": [{"seed": r.seed, "codelength": r.best_loss_bits, "epochs": r.epochs_run} for r in results],
    }
    if args.soft:
        doc["S"] = {nid: row.tolist() for nid, row in zip(graph.node_ids, best.best_S)}
    if args.history:
        with open(args.history, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "codelength"])
            w.writerows(enumerate(best.loss_history))
    if args.partition_out:
        write_partition(graph, part, args.partition_out)
    if args.save_params:
        save_params(best.best_params, enc.resolve(graph.n), args.save_params)
    _dump(doc, args.output)
    return 0


def cmd_codelength(args) -> int:
    graph = _graph(args)
    flow = build_flow(graph, args.alpha)
    part = load_partition(args.partition, graph)
    if args.form == "entropy":
        cl = codelength_entropy_form(flow, part)
    elif args.form == "soft":
        cl = codelength_soft(flow.F, flow.p, part.one_hot(), args.eps)
    else:
        cl = codelength_expanded_form(flow, part)
    doc = cl.to_dict()
    doc["modules"] = part.module_count
    doc["one_level"] = flow.node_entropy()
    _dump(doc, args.output)
    return 0


def _read_labels(path) -> dict[str, str]:
    labels = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'id label'")
        labels[parts[0]] = parts[1]
    return labels


def cmd_eval(args) -> int:
    if args.edges:
        graph = load_edge_list(args.edges, directed=args.directed)
        pred, truth = load_partition(args.pred, graph), load_partition(args.truth, graph)
    else:
        a, b = _read_labels(args.pred), _read_labels(args.truth)
        if a.keys() != b.keys():
            raise GraphFormatError("partition files label different node sets")
        ids = sorted(a)
        pred = Partition.from_labels([a[i] for i in ids])
        truth = Partition.from_labels([b[i] for i in ids])
        graph = None
    doc = {
        "ami": ami(pred, truth, args.average),
        "modules_pred": count_modules(pred),
        "modules_true": count_modules(truth),
        "mu_pred": mixing(graph, pred) if graph else None,
        "mu_true": mixing(graph, truth) if graph else None,
    }
    _dump(doc, args.output)
    return 0


def cmd_optimum(args) -> int:
    graph = _graph(args)
    part, cl = brute_force_optimum(build_flow(graph, args.alpha), max_n=args.max_n)
    doc = cl.to_dict()
    doc["modules"] = part.module_count
    doc["partition"] = dict(zip(graph.node_ids, part.labels.tolist()))
    _dump(doc, args.output)
    return 0


def cmd_flow(args) -> int:
    graph = _graph(args)
    flow = build_flow(graph, args.alpha, force_power_iteration=args.power_iteration)
    F = flow.F
    doc = {
        "n": graph.n,
        "arcs": graph.num_arcs,
        "directed": graph.directed,
        "alpha": flow.alpha,
        "iterations": flow.iterations,
        "converged": flow.converged,
        "p": dict(zip(graph.node_ids, flow.p.tolist())),
        "sum_p": float(flow.p.sum()),
        "sum_F": float(F.sum()),
        "max_abs_colsum_F_minus_p": float(np.abs(np.asarray(F.sum(axis=0)).ravel() - flow.p).max()),
        "node_entropy": flow.node_entropy(),
    }
    _dump(doc, args.output)
    return 0


def cmd_bench(args) -> int:
    spec = ExperimentSpec.load(args.spec)
    if args.output:
        spec.output = args.output
    if args.workers:
        spec.workers = args.workers
    result = run_experiment(spec)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffmap", description="Graph clustering by gradient descent on the map equation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="train an encoder and report the partition")
    _add_graph_args(p)
    p.add_argument("--features", help="node features (CSV with id column, or 'id col value' lines); default X = A")
    p.add_argument("--arch", choices=ARCHITECTURES, default="mlp")
    p.add_argument("--s", type=int, default=None, help="maximum modules (default ceil(sqrt n))")
    p.add_argument("--hidden-dim", type=int, default=None, help="hidden width (default ceil(4 sqrt n))")
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--no-batch-norm", action="store_true")
    p.add_argument("--temperature", type=float, default=1.0, help="initial softmax temperature")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default depends on --arch)")
    p.add_argument("--max-epochs", type=int, default=10_000)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--epsilon-loss", type=float, default=1e-6, help="minimum improvement that resets patience")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="log smoothing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="refuse disconnected graphs")
    p.add_argument("--soft", action="store_true", help="include the soft assignment matrix")
    p.add_argument("--history", help="write per-epoch codelength CSV here")
    p.add_argument("--partition-out", help="write 'id label' lines here")
    p.add_argument("--save-params", help="write a JSON parameter checkpoint here")
    p.add_argument("-o", "--output", help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("codelength", help="codelength of a given partition")
    _add_graph_args(p)
    p.add_argument("partition", help="'id label' lines")
    p.add_argument("--form", choices=("expanded", "entropy", "soft"), default="expanded")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_codelength)

    p = sub.add_parser("eval", help="compare two partitions")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--edges", help="graph, for mixing fractions and id checks")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--average", choices=("arithmetic", "max"), default="arithmetic")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimum", help="exhaustive best partition of a tiny graph")
    _add_graph_args(p)
    p.add_argument("--max-n", type=int, default=10)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_optimum)

    p = sub.add_parser("flow", help="visit rates and flow diagnostics")
    _add_graph_args(p)
    p.add_argument("--power-iteration", action="store_true", help="skip the undirected closed form")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("bench", help="run an experiment spec (TOML or JSON)")
    p.add_argument("spec")
    p.add_argument("--output", help="table path stem; .csv and .json are written")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GraphFormatError, ValueError, RuntimeError, FileNotFoundError) as exc:
        print(f"diffmap: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
