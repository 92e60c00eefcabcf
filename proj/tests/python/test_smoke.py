import json
import math

import pytest

import needlesteer as ns


def test_builtins_listed():
    assert ns.builtin_names() == ["no_cr", "small_mid_cr", "large_mid_cr", "surface_crs", "tunnel_crs"]
    doc = json.loads(ns.scenario_json("tunnel_crs"))
    assert sum(r["kind"] == "CR" for r in doc["regions"]) == 8


def test_verify():
    assert ns.verify("no_cr")["verdict"] == "feasible"
    assert ns.verify("large_mid_cr")["verdict"] == "infeasible"
    assert ns.verify("large_mid_cr", known_crs="none")["verdict"] == "feasible"
    assert ns.verify("no_cr", budget=2)["verdict"] == "unknown_budget"


def test_synthesize_and_trace():
    res = ns.synthesize("small_mid_cr")
    assert res["status"] == "plan"
    assert len(res["positions"]) == len(res["plan"]) + 1
    trace = ns.model_trace("small_mid_cr", res["plan"])
    end = trace[-1]
    assert math.dist(end, (0.0, 0.0, 90.0)) <= 5.0


def test_run_records():
    rec = ns.run("no_cr", seed=3)
    assert rec["tr_reached"] and not rec["cr_hit"]
    assert rec["adjustments"] == 0
    assert rec["termination"] == "FinalTR"
    known = ns.run("large_mid_cr", known_crs="all")
    assert known["motion_plans"] == 0
    unknown = ns.run("large_mid_cr", known_crs="none")
    assert unknown["adjustments"] >= 1 and not unknown["cr_hit"]


def test_runs_are_deterministic():
    a = ns.experiment_csv(["tunnel_crs"], runs=3, noise=0.5, deflect="moderate")
    b = ns.experiment_csv(["tunnel_crs"], runs=3, noise=0.5, deflect="moderate", jobs=3)
    assert a == b
    assert a.startswith("scenario,crs_known,tr_reach_pct,cr_hit_pct")


def test_fit_and_deviation():
    r = 50.0
    pts = [(r * (1 - math.cos(t)), 0.0, r * math.sin(t)) for t in (i * 0.05 for i in range(30))]
    fit = ns.fit_circle(pts)
    assert fit["radius"] == pytest.approx(r, rel=1e-3)
    shifted = [(x + 1.0, y, z) for x, y, z in pts]
    lo, avg, hi = ns.trace_deviation(pts, pts)
    assert (lo, avg, hi) == (0.0, 0.0, 0.0)
    with pytest.raises(ns.InsufficientData):
        ns.fit_circle(pts[:2])
    assert ns.trace_deviation(pts, shifted)[2] <= 1.0 + 1e-9


def test_match_self():
    plan = ["PUSH"] * 16 + ["ROT 180"] + ["PUSH"] * 20
    ref = ns.model_trace("no_cr", plan)
    res = ns.match(ref)
    assert res["deviation"][1] <= 1.0
    assert all(res["reached"])


def test_plot_and_errors():
    log = ns.run_log("small_mid_cr", known_crs="none")
    svg = ns.render_svg(log)
    assert svg.startswith("<svg") and svg == ns.render_svg(log)
    with pytest.raises(ns.ParseError):
        ns.render_svg("not json\n")
    with pytest.raises(ns.ConfigError):
        ns.run("nowhere_scenario.json")
    with pytest.raises(ns.Error):
        ns.run("no_cr", deflect="lots")
