"""Desk-scale experiments: planted-partition graphs, multi-seed sweeps and
result tables."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .flow import build_flow
from .graph import Graph, Partition, check_connected, connected_components, identity_features, load_edge_list
from .graph import load_features, load_lfr, load_partition
from .mapequation import codelength_expanded_form
from .metrics import ami, count_modules
from .neural import EncoderConfig
from .training import TrainConfig, train_trials

log = logging.getLogger(__name__)

MAX_RETRIES = 100


def generate_planted(
    blocks: int,
    size: int,
    p_in: float,
    p_out: float,
    seed: int = 0,
) -> tuple[Graph, Partition]:
    """Undirected planted-partition graph with ``blocks`` groups of ``size`` nodes.

    Each pair inside a block is linked with probability ``p_in``, each pair
    across blocks with ``p_out``. Draws are repeated until the graph is
    connected.
    """
    for name, val in (("p_in", p_in), ("p_out", p_out)):
        if not 0 <= val <= 1:
            raise ValueError(f"{name} must lie in [0, 1]")
    n = blocks * size
    truth = np.repeat(np.arange(blocks), size)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(truth[iu] == truth[ju], p_in, p_out)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        keep = rng.random(len(iu)) < prob
        if not keep.any():
            continue
        graph = Graph.from_edges(zip(iu[keep], ju[keep]), directed=False, n=n)
        if connected_components(graph)[1] == 1:
            return graph, Partition(truth)
    raise RuntimeError(f"no connected planted graph in {MAX_RETRIES} draws")


@dataclass
class ExperimentSpec:
    """What to cluster and how.

    ``graph`` is either ``{"generator": "planted", "blocks", "size", "p_in",
    "p_out", "seed"}``, ``{"edges": path, "directed": bool, "communities":
    path}`` or ``{"lfr_network": path, "lfr_community": path, "directed":
    bool}``. ``encoder`` and ``train`` hold EncoderConfig / TrainConfig fields.
    """

    graph: dict[str, Any]
    encoder: dict[str, Any] = field(default_factory=dict)
    train: dict[str, Any] = field(default_factory=dict)
    trials: int = 10
    output: str | None = None
    features: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib

            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        else:
            doc = json.loads(path.read_text())
        return cls(**doc)


def load_graph_source(source: dict[str, Any]) -> tuple[Graph, Partition | None]:
    if source.get("generator") == "planted":
        return generate_planted(
            source["blocks"], source["size"], source["p_in"], source["p_out"], source.get("seed", 0)
        )
    if "lfr_network" in source:
        return load_lfr(source["lfr_network"], source["lfr_community"], source.get("directed", False))
    if "edges" in source:
        graph = load_edge_list(source["edges"], source.get("directed", False), source.get("weighted", True))
        truth = load_partition(source["communities"], graph) if source.get("communities") else None
        return graph, truth
    raise ValueError(f"unrecognised graph source {source!r}")


@dataclass
class ExperimentResult:
    rows: list[dict[str, Any]]
    summary: dict[str, dict[str, float]]

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "summary": self.summary}, indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
            writer.writeheader()
            writer.writerows(self.rows)


def summarize(rows: list[dict[str, Any]], keys=("ami", "modules", "codelength", "epochs")) -> dict:
    """Mean and population standard deviation per column."""
    out = {}
    for key in keys:
        vals = [r[key] for r in rows if r.get(key) is not None]
        if not vals:
            continue
        mean = math.fsum(vals) / len(vals)
        var = math.fsum((v - mean) ** 2 for v in vals) / len(vals)
        out[key] = {"mean": mean, "std": math.sqrt(var)}
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    graph, truth = load_graph_source(spec.graph)
    check_connected(graph)
    X = load_features(spec.features, graph) if spec.features else identity_features(graph)
    enc = EncoderConfig(**spec.encoder)
    cfg = TrainConfig(**{**spec.train, "trials": spec.trials})
    _, results = train_trials(graph, X, enc, cfg, workers=spec.workers)

    flow = build_flow(graph, cfg.alpha)
    rows = []
    for trial, res in enumerate(results):
        part = res.partition
        rows.append(
            {
                "trial": trial,
                "seed": res.seed,
                "ami": ami(part, truth) if truth is not None else None,
                "modules": count_modules(part),
                "codelength": res.best_loss_bits,
                "hard_codelength": codelength_expanded_form(flow, part).total,
                "epochs": res.epochs_run,
            }
        )
    result = ExperimentResult(rows, summarize(rows))
    if spec.output:
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        result.write_csv(out.with_suffix(".csv"))
        out.with_suffix(".json").write_text(result.to_json())
    return result

