"""End-to-end acceptance checks over the bundled scenarios.

Each test records one PASS/FAIL line in the terminal summary. The run
directory of every simulation is kept under pytest's tmp path.
"""

import json
import os
import random
import statistics
import subprocess
import sys
import time
from pathlib import Path

import pytest

import registry
from oracles import brute_force_slope
from trendsbd.evaluation import jain_index
from trendsbd.mpcc import SubflowState, lia_increase
from trendsbd.netsim import CongestionState
from trendsbd.netsim.scenario import load_scenario
from trendsbd.pipeline import evaluate, read_report, simulate
from trendsbd.sbd import MergedGroup, regress_slope

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

PROPERTIES = (
    "smoothing_bounds", "group_monotonicity", "point_conservation", "regression_oracle",
    "regression_shift", "decide_symmetry", "decide_zero_epsilon", "pipeline_determinism",
    "packet_conservation", "queue_bounds", "rtt_lower_bound", "busy_departures", "sim_determinism",
)


def run(name, out, seed=None):
    scenario = load_scenario(SCENARIOS / f"{name}.json")
    t0 = time.perf_counter()
    simulate(scenario, out, seed)
    elapsed = time.perf_counter() - t0
    evaluate(out)
    return read_report(out), elapsed


def num(rep, key):
    v = rep.get(key, "")
    return float(v) if v not in ("", None) else None


def test_criterion_1_sqrt_law(tmp_path):
    rep, secs = run("p2p_sqrt_law", tmp_path)
    r2 = num(rep, "sqrt_law_r_squared")
    ok = r2 is not None and r2 >= 0.95 and secs < 10
    registry.record(1, ok, f"r_squared={r2} on [{rep.get('sqrt_law_segment_start_s')}, "
                           f"{rep.get('sqrt_law_segment_end_s')}] s, runtime {secs:.1f} s")
    assert r2 is not None and r2 >= 0.95
    assert secs < 10


def test_criterion_2_slope_law(tmp_path):
    rep, secs = run("reno30_slope_law", tmp_path)
    pred = num(rep, "slope_predicted_ms_per_s")
    med = num(rep, "slope_measured_median_ms_per_s")
    err = num(rep, "slope_rel_error")
    ok = err is not None and err <= 0.40 and secs < 60
    registry.record(2, ok, f"median dominant slope {med} ms/s vs predicted {pred} "
                           f"(rel error {err}), runtime {secs:.1f} s")
    assert pred == pytest.approx(18.0)
    assert secs < 60
    assert err is not None and err <= 0.40


def test_criterion_3_shared_detection(tmp_path):
    details, ok = [], True
    for name in ("dumbbell_droptail", "dumbbell_red"):
        rep, _ = run(name, tmp_path / name)
        first = num(rep, "time_to_first_positive_s:a0__b0")
        pos = num(rep, "positive_windows:a0__b0")
        good = first is not None and first <= 60 and pos is not None and pos >= 3
        ok &= good
        details.append(f"{name}: first positive {first} s, {pos:.0f} positive windows")
    registry.record(3, ok, "; ".join(details))
    assert ok


def test_criterion_4_disjoint_rejection(tmp_path):
    rep, _ = run("disjoint_unequal", tmp_path)
    frac = num(rep, "positive_fraction:a0__b0")
    n = num(rep, "windows_evaluated:a0__b0")
    ok = frac is not None and n and frac <= 0.10
    registry.record(4, ok, f"false-positive fraction {frac:.3f} over {n:.0f} windows")
    assert ok


def test_criterion_5_lia_fairness(tmp_path):
    ratios, jains = [], []
    for seed in range(1, 6):
        rep, _ = run("shared_bottleneck_mp", tmp_path / f"seed{seed}", seed)
        ratios.append(num(rep, "throughput_ratio"))
        jains.append(num(rep, "jain"))
    ratio, j = statistics.fmean(ratios), statistics.fmean(jains)
    ok = 0.7 <= ratio <= 1.3 and j >= 0.94
    registry.record(5, ok, f"mean ratio {ratio:.3f}, mean Jain {j:.4f} over seeds 1-5 "
                           f"(ratios {', '.join(f'{r:.3f}' for r in ratios)})")
    assert j >= 0.94
    assert 0.7 <= ratio <= 1.3


def test_criterion_6_uncoupled_gain(tmp_path):
    rep, _ = run("disjoint_symmetric_mp", tmp_path)
    r = num(rep, "throughput_ratio")
    ok = r is not None and r >= 1.5
    registry.record(6, ok, f"throughput ratio {r:.3f}, Jain {num(rep, 'jain'):.4f}")
    assert ok


def test_criterion_7_regression_oracle():
    rng = random.Random(7)
    worst = 0.0
    for _ in range(1000):
        n = rng.randint(5, 200)
        t = rng.uniform(0, 1e6)
        pts = []
        for _ in range(n):
            t += rng.uniform(0.5, 100)
            pts.append((round(t, 3), rng.uniform(1, 3000)))
        est = regress_slope(MergedGroup(tuple(pts)))
        ref = brute_force_slope(pts)
        worst = max(worst, abs(est.slope - ref) / abs(ref))
    ok = worst <= 1e-9
    registry.record(7, ok, f"worst relative error {worst:.2e} over 1000 groups")
    assert ok


def _property_results():
    if registry.OUTCOMES:
        return dict(registry.COUNTS), dict(registry.OUTCOMES)
    # run on its own: execute the property suite in a child session
    dump = Path(os.environ.get("TMPDIR", "/tmp")) / f"propcount-{os.getpid()}.json"
    env = {**os.environ, "PROPCOUNT_FILE": str(dump)}
    subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                    str(ROOT / "tests" / "test_properties.py")], env=env, cwd=ROOT, check=False)
    data = json.loads(dump.read_text())
    dump.unlink()
    return data["counts"], data["outcomes"]


def test_criterion_8_property_suite():
    counts, outcomes = _property_results()
    failed = sorted(k for k, v in outcomes.items() if v != "passed")
    short = sorted(p for p in PROPERTIES if counts.get(p, 0) < registry.CASES)
    ok = outcomes and not failed and not short
    low = min(counts.get(p, 0) for p in PROPERTIES)
    registry.record(8, ok, f"{len(outcomes)} property tests, {len(PROPERTIES)} properties, "
                           f"fewest cases {low}; failed {failed or 'none'}")
    assert ok


def test_criterion_9_degeneracy():
    rng = random.Random(9)
    mismatches = 0
    for _ in range(1000):
        w = rng.uniform(1, 5000)
        rtt = rng.uniform(0.1, 2000)
        sub = SubflowState("p", CongestionState(cwnd=w), rtt)
        mismatches += lia_increase([sub], "p") != 1.0 / w
    trivial = jain_index(5.0, 5.0) == 1.0 and jain_index(5.0, 0.0) == 0.5 and jain_index(0.0, 5.0) == 0.5
    ok = mismatches == 0 and trivial
    registry.record(9, ok, f"{mismatches} LIA/Reno mismatches over 1000 states; Jain trivial cases exact: {trivial}")
    assert ok
