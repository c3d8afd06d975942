import csv
import json
import math

import numpy as np
import pytest

from onlinecover.harness import (
    FRACTIONAL_COLUMNS,
    ROUNDING_COLUMNS,
    Distribution,
    ExperimentConfig,
    InstanceSpec,
    doubling_search,
    emit_report,
    generate_instance,
    parse_report,
    run_experiment,
)
from onlinecover.oracles import brute_force_opt

GEN = {"m": 3, "n": 4, "p": 1.0}


def test_generation_deterministic():
    spec = InstanceSpec(m=2, n=2, p=1, cost_dist="uniform:1:2", proc_dist="uniform:1:3")
    assert generate_instance(spec, 42).to_json() == generate_instance(spec, 42).to_json()
    assert generate_instance(spec, 42).to_json() != generate_instance(spec, 43).to_json()


def test_setcover_distribution():
    inst = generate_instance(InstanceSpec(m=4, n=6, proc_dist="setcover:0.3"), 5)
    vals = set(inst.proc_times.ravel().tolist())
    assert vals <= {1.0, math.inf}
    assert np.all(np.isfinite(inst.proc_times).any(axis=1))


def test_certified_stamp_on_frontier():
    inst = generate_instance(InstanceSpec(m=3, n=4, p=2, allow_large_p=True), 9)
    assert inst.guarantee_source == "certified"
    fr = brute_force_opt(inst)
    assert (inst.guarantee_cost, inst.guarantee_load) in [(pt.cost, pt.lp_norm) for pt in fr]


def test_heuristic_stamp():
    inst = generate_instance(InstanceSpec(m=3, n=5, enum_cap=10), 1)
    assert inst.guarantee_source == "heuristic"


def test_distribution_parse():
    assert Distribution.parse("loguniform:1:8").kind == "loguniform"
    for bad in ("normal:0:1", "uniform:3:1", "loguniform:0:1"):
        with pytest.raises(ValueError):
            Distribution.parse(bad)


def test_frac_pipeline(tmp_path):
    rep = run_experiment(ExperimentConfig("frac", generator=GEN, base_seed=2, out_dir=str(tmp_path)))
    assert rep["ok"] and rep["checks"]["cost_le_phi"] and rep["checks"]["objective_le_2phi"]
    rows = list(csv.DictReader(open(tmp_path / "fractional.csv")))
    assert tuple(rows[0].keys()) == FRACTIONAL_COLUMNS
    assert parse_report((tmp_path / "report.json").read_text()) == rep


def test_round_lp_cases_sum(tmp_path):
    cfg = ExperimentConfig("round-lp", generator={"m": 6, "n": 4}, alpha=4.0, trials=1000, out_dir=str(tmp_path))
    rep = run_experiment(cfg)
    rows = list(csv.DictReader(open(tmp_path / "rounding.csv")))
    assert tuple(rows[0].keys()) == ROUNDING_COLUMNS and len(rows) == 1000
    assert all(int(r["case1"]) + int(r["case2"]) + int(r["case3"]) == 4 for r in rows)
    assert rep["aggregate"]["alpha_mode"] == "exercise"


def test_default_alpha_mode():
    rep = run_experiment(ExperimentConfig("round-lp", generator=GEN, trials=5))
    assert rep["aggregate"]["alpha_mode"] == "default"
    assert rep["aggregate"]["alpha"] == pytest.approx(48 * math.log(rep["fractional"]["m"] * 4))


def test_round_l1():
    rep = run_experiment(ExperimentConfig("round-l1", generator=GEN, alpha=3.0, trials=50))
    assert rep["ok"] and rep["aggregate"]["certificates_ok"]


def test_workers_match_sequential():
    a = run_experiment(ExperimentConfig("round-lp", generator=GEN, alpha=4.0, trials=20))
    b = run_experiment(ExperimentConfig("round-lp", generator=GEN, alpha=4.0, trials=20, workers=2))
    for r in (a, b):
        r.pop("wall_clock_s")
        r["config"].pop("workers")
    assert a == b


def test_adversary_pipeline():
    rep = run_experiment(ExperimentConfig("adversary", d=2, r=2))
    assert rep["ok"] and rep["adversary"]["certificate_ok"]


def test_ocg_pipeline(tmp_path):
    spec = {"dim": 2, "rows": "0: 0=1 1=1\n", "objective": "linear", "weights": [1, 1], "x_star": [1, 0]}
    path = tmp_path / "ocg.json"
    path.write_text(json.dumps(spec))
    rep = run_experiment(ExperimentConfig("ocg", instance_path=str(path)))
    assert rep["ok"] and rep["ocg"]["guarantee"]["holds"]


def test_brute_and_greedy(tmp_path):
    rep = run_experiment(ExperimentConfig("brute", generator=GEN))
    assert rep["frontier"]
    rep = run_experiment(ExperimentConfig("greedy", generator=GEN))
    assert len(rep["greedy"]["assignment"]) == 4


def test_error_surfaces_with_module():
    inst_dir = ExperimentConfig("frac", generator={"m": 2, "n": 2, "cost_dist": "uniform:5:6"})
    from onlinecover import harness

    orig = harness.stamp_guarantee
    harness.stamp_guarantee = lambda inst, cap=0: inst.with_guarantee(1.0, 1.0, "bogus")
    try:
        rep = run_experiment(inst_dir)
    finally:
        harness.stamp_guarantee = orig
    assert not rep["ok"] and rep["error"]["type"] == "AllMachinesDiscarded"
    assert rep["error"]["module"] == "onlinecover.errors"


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig("nope"))
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig("frac", generator=GEN, trials=0))
    with pytest.raises(FileNotFoundError):
        run_experiment(ExperimentConfig("frac", instance_path=str(tmp_path / "missing.json")))


def test_doubling():
    inst = generate_instance(InstanceSpec(m=3, n=3), 0)
    res = doubling_search(inst)
    assert res["first_feasible"] is not None
    assert res["tiers"][-1]["feasible"] and all(not t["feasible"] for t in res["tiers"][:-1])


def test_report_roundtrip_and_determinism():
    cfg = lambda: ExperimentConfig("round-lp", generator=GEN, alpha=4.0, trials=30, base_seed=5)
    a, b = run_experiment(cfg()), run_experiment(cfg())
    assert parse_report(emit_report(a)) == a
    a.pop("wall_clock_s")
    b.pop("wall_clock_s")
    assert emit_report(a) == emit_report(b)
