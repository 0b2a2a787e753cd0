import json

import numpy as np
import pytest

from diffmap.graph import Partition, write_edge_list, write_partition
from diffmap.harness import ExperimentSpec, generate_planted, run_experiment, summarize
from diffmap.metrics import mixing

from conftest import barbell


def test_planted_rejects_disconnected_blocks():
    with pytest.raises(RuntimeError):
        generate_planted(2, 5, 1.0, 0.0, seed=0)
    with pytest.raises(ValueError):
        generate_planted(2, 5, 1.2, 0.0)


def test_planted_complete_graph():
    g, truth = generate_planted(2, 3, 1.0, 1.0)
    assert g.num_arcs == 30
    assert mixing(g, truth) == pytest.approx(9 / 15)
    assert truth.labels.tolist() == [0, 0, 0, 1, 1, 1]


def test_planted_is_seeded():
    a, _ = generate_planted(2, 30, 0.3, 0.01, seed=3)
    b, _ = generate_planted(2, 30, 0.3, 0.01, seed=3)
    c, _ = generate_planted(2, 30, 0.3, 0.01, seed=4)
    assert np.array_equal(a.src, b.src) and np.array_equal(a.dst, b.dst)
    assert not (a.num_arcs == c.num_arcs and np.array_equal(a.src, c.src) and np.array_equal(a.dst, c.dst))


def test_summary_recomputable():
    rows = [{"ami": 1.0, "modules": 2}, {"ami": 0.5, "modules": 4}]
    s = summarize(rows, keys=("ami", "modules"))
    assert s["ami"] == {"mean": 0.75, "std": 0.25}
    assert s["modules"] == {"mean": 3.0, "std": 1.0}


def barbell_spec(tmp_path, trials):
    g = barbell()
    write_edge_list(g, tmp_path / "barbell.txt")
    write_partition(g, Partition(np.array([0, 0, 0, 1, 1, 1])), tmp_path / "truth.txt")
    return ExperimentSpec(
        graph={"edges": str(tmp_path / "barbell.txt"), "communities": str(tmp_path / "truth.txt")},
        encoder={"arch": "linear", "s": 6},
        trials=trials,
    )


def test_single_trial_summary_equals_row(tmp_path):
    res = run_experiment(barbell_spec(tmp_path, 1))
    assert len(res.rows) == 1
    for key, stats in res.summary.items():
        assert stats == {"mean": res.rows[0][key], "std": 0.0}


def test_barbell_experiment_recovers_truth_on_average(tmp_path):
    spec = barbell_spec(tmp_path, 10)
    spec.output = str(tmp_path / "out" / "table")
    res = run_experiment(spec)
    assert [r["seed"] for r in res.rows] == list(range(10))
    assert res.summary["ami"]["mean"] >= 0.8
    again = run_experiment(spec)
    assert again.rows == res.rows
    doc = json.loads((tmp_path / "out" / "table.json").read_text())
    assert doc["rows"] == res.rows
    assert (tmp_path / "out" / "table.csv").read_text().splitlines()[0].startswith("trial,seed,ami")


def test_spec_files(tmp_path):
    (tmp_path / "s.toml").write_text(
        'trials = 2\n[graph]\ngenerator = "planted"\nblocks = 2\nsize = 5\np_in = 0.9\np_out = 0.1\n'
        '[encoder]\narch = "linear"\n[train]\nmax_epochs = 50\n'
    )
    spec = ExperimentSpec.load(tmp_path / "s.toml")
    assert spec.trials == 2 and spec.encoder == {"arch": "linear"}
    (tmp_path / "s.json").write_text(json.dumps({"graph": spec.graph, "trials": 2, "train": {"max_epochs": 50}}))
    assert ExperimentSpec.load(tmp_path / "s.json").graph == spec.graph
    res = run_experiment(spec)
    assert len(res.rows) == 2 and all(r["epochs"] <= 50 for r in res.rows)
    with pytest.raises(ValueError):
        ExperimentSpec(graph={}, trials=0)
