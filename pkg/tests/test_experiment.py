"""End-to-end experiment driver: config handling, artifact bundle,
determinism, sample-path export."""

import csv
import json
import os

import numpy as np
import pytest

from smdpsynth import (
    ConfigError, ExperimentConfig, MeanPlusSigma, ObservationStore, Quantile,
    build_pipeline, config_fingerprint, desk_config, exact_winning_region,
    export_sample_paths, paper_config, parse_functional, run_experiment,
    top_up_observations,
)

from conftest import grid4_product


SMALL = dict(learn_episodes=2000, reach_episodes=2000, paths=20, horizon=40,
             repetitions=1, seed=0)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg = desk_config(out_dir=str(out), **SMALL)
    return cfg, run_experiment(cfg)


# ---------------------------------------------------------------- config

def test_config_rejects_bad_fields():
    with pytest.raises(ConfigError):
        desk_config(repetitions=0)
    with pytest.raises(ConfigError):
        desk_config(k=-1)
    with pytest.raises(ConfigError):
        desk_config(gamma_r=1.0)
    with pytest.raises(ConfigError):
        desk_config(paths=-1)
    with pytest.raises(ConfigError):
        desk_config(functional={"kind": "mystery"})


def test_config_json_round_trip():
    cfg = desk_config(seed=7, min_observations=50)
    doc = json.loads(json.dumps(cfg.to_json_dict()))
    assert ExperimentConfig.from_json_dict(doc) == cfg


def test_config_rejects_unknown_fields():
    doc = desk_config().to_json_dict()
    doc["episodes"] = 10
    with pytest.raises(ConfigError, match="unknown config fields"):
        ExperimentConfig.from_json_dict(doc)
    with pytest.raises(ConfigError, match="scenario"):
        ExperimentConfig.from_json_dict({"formula": "G !c"})


def test_parse_functional_dispatch():
    f = parse_functional({"kind": "mean_plus_sigma", "lam": 0.5})
    assert isinstance(f, MeanPlusSigma) and f.lam == 0.5
    g = parse_functional({"kind": "quantile", "alpha": 0.9})
    assert isinstance(g, Quantile) and g.alpha == 0.9


def test_fingerprint_ignores_location_fields():
    a = desk_config(out_dir="x", workers=1).to_json_dict()
    b = desk_config(out_dir="y", workers=4).to_json_dict()
    c = desk_config(seed=1).to_json_dict()
    assert config_fingerprint(a) == config_fingerprint(b)
    assert config_fingerprint(a) != config_fingerprint(c)


def test_paper_preset_scales_up():
    cfg = paper_config()
    assert cfg.k == 20
    assert cfg.scenario["grid"]["width"] == 5


# ------------------------------------------------------------- artifacts

def test_bundle_files_exist(small_run):
    _, art = small_run
    assert sorted(art.files) == ["indk.csv", "paths.jsonl", "policy.json",
                                 "progress.csv", "summary.json"]
    for path in art.files.values():
        assert os.path.exists(path)


def test_summary_records_required_quantities(small_run):
    _, art = small_run
    s = art.summary
    assert s["oracle"]["w_size"] == 42 and s["oracle"]["w_p_size"] == 77
    rep = s["repetitions"][0]
    assert sorted(rep["w"]) == rep["w"] and len(rep["w"]) == 42
    assert rep["ind_final"] == 1.0
    assert rep["observations"] > 0
    assert rep["vi_residual"] < 1e-9
    agg = s["aggregate"]
    assert agg["w_exact_frac"] == 1.0
    assert agg["reach_gap_max_mean"] <= 0.02
    assert agg["monotone_violations"] == 0
    assert s["config"] == desk_config(out_dir=art.out_dir,
                                      **SMALL).to_json_dict()


def test_policy_json_provenance(small_run):
    cfg, art = small_run
    doc = json.load(open(art.files["policy.json"]))
    assert doc["provenance"]["config_sha256"] == \
        config_fingerprint(cfg.to_json_dict())
    assert doc["provenance"]["master_seed"] == cfg.seed
    assert doc["winning_states"] == art.summary["repetitions"][0]["w"]
    n = art.summary["n_product_states"]
    assert sorted(map(int, doc["policy"])) == list(range(n))


def test_indk_curve_monotone_from_below(small_run):
    _, art = small_run
    with open(art.files["indk.csv"]) as fh:
        rows = list(csv.DictReader(fh))
    vals = [float(r["ind"]) for r in rows]
    assert vals, "expected a nonempty agreement curve"
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    assert vals[0] < vals[-1] == 1.0


def test_paths_jsonl_shape(small_run):
    cfg, art = small_run
    lines = open(art.files["paths.jsonl"]).read().splitlines()
    header = json.loads(lines[0])
    assert header["record"] == "header" and header["paths"] == cfg.paths
    assert len(lines) == cfg.paths + 1
    for line in lines[1:]:
        rec = json.loads(line)
        assert rec["record"] == "path"
        assert len(rec["states"]) == cfg.horizon + 1
        assert len(rec["actions"]) == len(rec["dwells"]) == cfg.horizon
        assert all(t >= 0 for t in rec["dwells"])


def test_paths_stay_winning_after_entry(small_run):
    """Once a rollout reaches the winning region it never leaves it and
    never visits an accepting product state."""
    _, art = small_run
    cfg, _ = small_run
    _, p = build_pipeline(cfg)
    w, _ = exact_winning_region(p)
    lines = open(art.files["paths.jsonl"]).read().splitlines()
    entered = 0
    for line in lines[1:]:
        states = json.loads(line)["states"]
        inside = False
        for i in states:
            inside = inside or i in w
            if inside:
                assert i in w
                assert i not in p.accepting
        entered += inside
    assert entered == len(lines) - 1


# ----------------------------------------------------------- determinism

def test_same_seed_same_bytes(tmp_path):
    cfg = desk_config(out_dir=str(tmp_path / "a"), learn_episodes=1500,
                      reach_episodes=1000, paths=5, horizon=20, seed=2)
    art1 = run_experiment(cfg)
    first = open(art1.files["summary.json"], "rb").read()
    art2 = run_experiment(cfg)
    assert open(art2.files["summary.json"], "rb").read() == first

    moved = desk_config(out_dir=str(tmp_path / "b"), learn_episodes=1500,
                        reach_episodes=1000, paths=5, horizon=20, seed=2)
    art3 = run_experiment(moved)
    assert art3.summary["artifacts"] == art1.summary["artifacts"]
    for name in ("policy.json", "indk.csv", "paths.jsonl"):
        assert open(art3.files[name], "rb").read() == \
            open(art1.files[name], "rb").read()


def test_parallel_reps_match_serial(tmp_path):
    base = dict(learn_episodes=1500, reach_episodes=1000, paths=5,
                horizon=20, repetitions=2, seed=4)
    serial = run_experiment(desk_config(out_dir=str(tmp_path / "s"),
                                        workers=1, **base))
    parallel = run_experiment(desk_config(out_dir=str(tmp_path / "p"),
                                          workers=2, **base))
    assert serial.summary["artifacts"] == parallel.summary["artifacts"]
    assert serial.summary["aggregate"] == parallel.summary["aggregate"]
    assert serial.summary["repetitions"] == parallel.summary["repetitions"]


def test_distinct_seeds_distinct_reps(small_run):
    _, art = small_run
    reps = art.summary["repetitions"]
    assert len({r["learn_seed"] for r in reps} |
               {r["reach_seed"] for r in reps}) == 2 * len(reps)


# ------------------------------------------------------------ components

def test_export_paths_edge_cases():
    p = grid4_product()
    rng = np.random.default_rng(0)
    only_header = export_sample_paths(p, {}, 0, 10, rng)
    assert len(only_header) == 1 and only_header[0]["record"] == "header"

    pinned = export_sample_paths(p, {}, 3, 0, rng)
    for rec in pinned[1:]:
        assert rec["states"] == [p.initial]
        assert rec["actions"] == [] and rec["dwells"] == []
        assert rec["names"] == [p.m.names[p.states[p.initial][0]]]


def test_export_paths_accepts_callable_policy():
    p = grid4_product()
    rng = np.random.default_rng(1)
    recs = export_sample_paths(p, lambda i: p.enabled(i)[0], 2, 15, rng)
    assert all(len(r["actions"]) == 15 for r in recs[1:])


def test_top_up_covers_every_pair_and_target():
    p = grid4_product()
    _, w_p = exact_winning_region(p)
    store = ObservationStore()
    rng = np.random.default_rng(3)
    top_up_observations(p, w_p, store, 0, rng)
    assert len(store) == len(w_p)
    for i, a in w_p:
        assert store.successor_counts(i, a)

    top_up_observations(p, w_p, store, 500, rng)
    assert len(store) == 500
    top_up_observations(p, set(), store, 10 ** 6, rng)
    assert len(store) == 500


def test_min_observations_reaches_posterior(tmp_path):
    cfg = desk_config(out_dir=str(tmp_path), learn_episodes=1500,
                      reach_episodes=1000, paths=0, horizon=10,
                      min_observations=30_000, seed=6)
    art = run_experiment(cfg)
    rep = art.summary["repetitions"][0]
    assert rep["observations"] == 30_000
    assert art.summary["aggregate"]["risk_gap_rel_max_mean"] < 0.05
