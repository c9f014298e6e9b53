import itertools
import math
import random

import pytest

from oracles import brute_force_slope, hand_smooth, monotone_step_groups
from trendsbd.sbd import (
    FlowTrace,
    Group,
    MergedGroup,
    RttSample,
    SlopeEstimate,
    SmoothingState,
    TraceError,
    decide,
    extract_groups,
    merge_groups,
    pick_dominant_slope,
    regress_slope,
    smooth,
    smooth_series,
)


# -- smoothing ---------------------------------------------------------------

def test_smooth_constant_is_fixed_point():
    state, v = smooth(SmoothingState(0.9, 100.0), 100.0)
    assert v == 100.0
    assert state.s == 100.0


def test_smooth_step():
    _, v = smooth(SmoothingState(0.9, 100.0), 200.0)
    assert v == pytest.approx(190.0, rel=1e-12)


def test_smooth_first_sample_seeds():
    _, v = smooth(SmoothingState(0.9), 123.0)
    assert v == 123.0


def test_smooth_constant_trace():
    assert smooth_series([500.0] * 50) == [500.0] * 50


def test_smooth_rejects_nonpositive():
    with pytest.raises(TraceError):
        smooth(SmoothingState(0.9, 10.0), 0.0)
    with pytest.raises(TraceError):
        smooth_series([10.0, -1.0])


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_smoothing_state_alpha_range(alpha):
    with pytest.raises(ValueError):
        SmoothingState(alpha)


def test_smooth_series_matches_stepwise_and_hand_formula():
    rng = random.Random(7)
    rtts = [rng.uniform(50, 400) for _ in range(500)]
    state = SmoothingState(0.9)
    stepwise = []
    for r in rtts:
        state, v = smooth(state, r)
        stepwise.append(v)
    assert smooth_series(rtts, 0.9) == stepwise
    assert stepwise == pytest.approx(hand_smooth(rtts, 0.9), rel=1e-12)


# -- extraction --------------------------------------------------------------

def test_extract_groups_hand_trace():
    t = [0, 100, 200, 300, 400, 500]
    y = [100, 101, 102, 99, 100, 103]
    groups = extract_groups(t, y)
    assert [g.points for g in groups] == [((100, 101), (200, 102)), ((400, 100), (500, 103))]


def test_extract_groups_increasing_drops_index_zero():
    t = list(range(10))
    groups = extract_groups(t, [float(i) for i in t])
    assert len(groups) == 1
    assert [p[0] for p in groups[0].points] == t[1:]


def test_extract_groups_decreasing_is_empty():
    t = list(range(10))
    assert extract_groups(t, [100.0 - i for i in t]) == []


def test_extract_groups_empty():
    assert extract_groups([], []) == []


def test_extract_groups_matches_oracle():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(0, 60)
        t = sorted(rng.sample(range(100000), n))
        y = [rng.choice([1.0, 2.0, 3.0, 4.0]) for _ in range(n)]
        got = [list(g.points) for g in extract_groups(t, y)]
        assert got == monotone_step_groups(t, y)


# -- merging -----------------------------------------------------------------

def test_merge_hand_trace():
    a = Group(((900, 100.0), (950, 110.0), (1000, 120.0)))
    b = Group(((1030, 118.0), (1060, 132.0)))
    merged = merge_groups([a, b], 50)
    assert len(merged) == 1
    assert merged[0].points == a.points + b.points


def test_merge_single_group_unchanged():
    g = Group(((0, 1.0), (10, 2.0)))
    assert [m.points for m in merge_groups([g])] == [g.points]


def test_merge_large_gap_kept_separate():
    a = Group(((0, 100.0), (10, 101.0)))
    b = Group(((210, 150.0), (220, 160.0)))
    assert len(merge_groups([a, b], 50)) == 2


def test_merge_requires_rising_mean():
    a = Group(((0, 100.0), (10, 130.0)))
    b = Group(((30, 110.0), (40, 120.0)))  # mean 115 < 130
    assert len(merge_groups([a, b], 50)) == 2


def test_merge_is_transitive_and_keeps_last_group():
    gs = [Group(((10 * i, 10.0 * i), (10 * i + 5, 10.0 * i + 5))) for i in range(5)]
    merged = merge_groups(gs, 50)
    assert len(merged) == 1
    assert len(merged[0]) == 10


def test_merge_empty():
    assert merge_groups([]) == []


# -- regression --------------------------------------------------------------

def test_regress_collinear():
    est = regress_slope(MergedGroup(((0, 100.0), (1000, 118.0), (2000, 136.0))), min_points=3)
    assert est.slope == pytest.approx(18.0, rel=1e-12)
    assert (est.start, est.end, est.n_points) == (0, 2000, 3)


def test_regress_flat():
    pts = tuple((float(i * 10), 42.0) for i in range(8))
    assert regress_slope(MergedGroup(pts)).slope == 0.0


def test_regress_degenerate():
    assert regress_slope(MergedGroup(((5.0, 1.0),) * 6)) is None
    assert regress_slope(MergedGroup(((0, 1.0), (1, 2.0), (2, 3.0)))) is None  # below floor of 5


def test_regress_against_oracle_50_points():
    rng = random.Random(3)
    t = sorted(rng.uniform(0, 5000) for _ in range(50))
    pts = tuple((x, 100 + 0.05 * x + rng.gauss(0, 3)) for x in t)
    est = regress_slope(MergedGroup(pts))
    assert est.slope == pytest.approx(brute_force_slope(pts), rel=1e-9)


# -- dominant slope ----------------------------------------------------------

def _est(n, end, slope=1.0, start=None):
    return SlopeEstimate(slope, end - 100 if start is None else start, end, n)


def test_pick_max_points():
    ests = [_est(12, 1000), _est(40, 2000), _est(7, 3000)]
    assert pick_dominant_slope(ests, (0, 5000)).n_points == 40


def test_pick_empty_window():
    assert pick_dominant_slope([_est(12, 6000)], (0, 5000)) is None
    assert pick_dominant_slope([], (0, 5000)) is None


def test_pick_tie_earliest_end_stable_under_permutation():
    ests = [_est(20, 4000, 1.0), _est(20, 1500, 2.0), _est(20, 3000, 3.0), _est(5, 100, 4.0)]
    for perm in itertools.permutations(ests):
        assert pick_dominant_slope(perm, (0, 5000)).end == 1500


def test_pick_window_is_half_open():
    assert pick_dominant_slope([_est(9, 5000)], (0, 5000)) is None
    assert pick_dominant_slope([_est(9, 5000)], (5000, 10000)).end == 5000


# -- decision ----------------------------------------------------------------

def test_decide_table5_row1():
    a = SlopeEstimate(473.0, 9000.0, 9874.0, 30)
    b = SlopeEstimate(441.0, 9100.0, 9860.0, 28)
    v = decide(a, b, 0.2, 1000.0)
    assert v.error == pytest.approx(32 / 473, rel=1e-12)
    assert round(v.error, 4) == 0.0677
    assert v.shared


def test_decide_identical():
    a = SlopeEstimate(10.0, 0.0, 100.0, 6)
    v = decide(a, a)
    assert v.error == 0.0 and v.shared


def test_decide_time_gate():
    a = SlopeEstimate(100.0, 0.0, 1000.0, 10)
    b = SlopeEstimate(50.0, 6000.0, 7000.0, 10)
    v = decide(a, b, 0.2, 1000.0)
    assert not v.shared and v.error is None and v.flag == "time-gated"


def test_decide_small_gap_still_compared():
    a = SlopeEstimate(100.0, 0.0, 1000.0, 10)
    b = SlopeEstimate(95.0, 1800.0, 2500.0, 10)  # gap 800 ms <= tau
    v = decide(a, b, 0.2, 1000.0)
    assert v.shared and v.error == pytest.approx(0.05)


def test_decide_nonpositive_flagged():
    a = SlopeEstimate(0.0, 0.0, 1000.0, 10)
    b = SlopeEstimate(-3.0, 0.0, 1000.0, 10)
    v = decide(a, b)
    assert not v.shared and v.error is None and v.flag == "non-positive-slope"


def test_decide_threshold_inclusive():
    a = SlopeEstimate(100.0, 0.0, 1000.0, 10)
    b = SlopeEstimate(80.0, 0.0, 1000.0, 10)
    assert decide(a, b, 0.2).shared
    assert not decide(a, SlopeEstimate(79.0, 0.0, 1000.0, 10), 0.2).shared


# -- types -------------------------------------------------------------------

def test_rtt_sample_validation():
    with pytest.raises(TraceError):
        RttSample(0.0, 0.0)
    with pytest.raises(TraceError):
        RttSample(-1.0, 5.0)


def test_flow_trace_validation_and_slicing():
    tr = FlowTrace("a", [0, 1, 2, 3], [5, 6, 7, 8])
    assert len(tr) == 4 and tr.span() == (0.0, 3.0)
    assert tr.samples[2] == RttSample(2.0, 7.0)
    sub = tr.between(1, 3)
    assert sub.t == (1.0, 2.0) and sub.rtt == (6.0, 7.0)
    with pytest.raises(TraceError):
        FlowTrace("b", [0, 0], [1, 1])
    with pytest.raises(TraceError):
        FlowTrace("b", [0, 1], [1, 0])
    with pytest.raises(TraceError):
        FlowTrace("b", [0, 1], [1])
    assert FlowTrace.from_samples("a", tr.samples) == tr
    assert not math.isnan(tr.rtt[0])
