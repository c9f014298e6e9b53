import math

import pytest

from trendsbd.evaluation import (
    bin_max_occupancy,
    equilibrium_throughput,
    fairness,
    fit_sqrt_law,
    jain_index,
    longest_segment,
    positive_intervals,
    predicted_slope,
    queue_filling_segments,
    reno_throughput,
    sqrt_law_rtt,
    throughput_ratio,
)


def test_jain_trivial_cases():
    assert jain_index(10, 10) == 1.0
    assert jain_index(10, 0) == 0.5
    assert jain_index(0, 3) == 0.5


def test_jain_symmetry_and_scale():
    assert jain_index(3, 7) == pytest.approx(jain_index(7, 3))
    assert jain_index(3, 7) == pytest.approx(jain_index(30, 70))


def test_jain_undefined():
    with pytest.raises(ValueError):
        jain_index(0, 0)
    with pytest.raises(ValueError):
        jain_index(-1, 2)


def test_throughput_ratio():
    assert throughput_ratio(17.4, 10) == pytest.approx(1.74)
    assert throughput_ratio(5, 5) == 1.0
    assert throughput_ratio(0, 5) == 0.0
    assert throughput_ratio(6, 2) == throughput_ratio(60, 20)
    with pytest.raises(ZeroDivisionError):
        throughput_ratio(1, 0)


def test_fairness_report():
    rep = fairness([1.0, 2.0, 3.0], 2.0)
    assert rep.x_sp_mean == 2.0 and rep.n_single_flows == 3
    assert rep.j == 1.0 and rep.ratio == 1.0
    with pytest.raises(ValueError):
        fairness([], 1.0)


def test_sqrt_law_point():
    # sqrt(2 * 1 * 1 / 83.33 + 0.1^2)
    assert sqrt_law_rtt(1.0, 1, 83.33, 0.1) == pytest.approx(0.1844, abs=5e-5)


def test_fit_recovers_exact_model():
    n, cap, r_min = 3, 500.0, 0.08
    ts = [0.05 * i for i in range(200)]
    rs = [sqrt_law_rtt(t, n, cap, r_min) for t in ts]
    fit = fit_sqrt_law(ts, rs, n=n, capacity_pps=cap)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.params["two_n_over_c"] == pytest.approx(2 * n / cap, rel=1e-6)
    assert fit.params["r_min_sq"] == pytest.approx(r_min ** 2, rel=1e-6)
    assert fit.params["implied_n"] == pytest.approx(n, rel=1e-6)
    assert fit.model == "sqrt-law" and fit.segment == (0.0, ts[-1])


def test_fit_origin_shift():
    ts = [100 + 0.1 * i for i in range(50)]
    rs = [sqrt_law_rtt(t - 100, 1, 100.0, 0.2) for t in ts]
    assert fit_sqrt_law(ts, rs).params["r_min_sq"] == pytest.approx(0.04, rel=1e-6)


def test_fit_rejects_short_segment():
    with pytest.raises(ValueError, match="5 samples"):
        fit_sqrt_law([0, 1, 2, 3], [1, 1, 1, 1])


def test_fit_r_squared_in_range():
    ts = list(range(20))
    rs = [1 + 0.3 * ((-1) ** i) for i in ts]
    assert 0 <= fit_sqrt_law(ts, rs).r_squared <= 1


def test_predicted_slope():
    assert predicted_slope(30, 20, 1500) == pytest.approx(18.0)
    assert predicted_slope(0, 20) == 0.0
    assert predicted_slope(20, 20) == pytest.approx(2 * predicted_slope(10, 20))
    with pytest.raises(ValueError):
        predicted_slope(1, 0)


def test_equilibrium_throughput():
    assert equilibrium_throughput("reno", [(0.1, 0.01)]) == pytest.approx(10 * math.sqrt(198))
    one = equilibrium_throughput("reno", [(0.1, 0.01)])
    assert equilibrium_throughput("lia", [(0.1, 0.01)] * 2) == pytest.approx(one)
    assert equilibrium_throughput("uncoupled", [(0.1, 0.01)] * 2) == pytest.approx(2 * one)
    paths = [(0.05, 0.02), (0.2, 0.001), (0.1, 0.3)]
    assert equilibrium_throughput("lia", paths) <= equilibrium_throughput("uncoupled", paths)
    with pytest.raises(ValueError):
        reno_throughput(0.1, 0)
    with pytest.raises(ValueError):
        equilibrium_throughput("vegas", [(0.1, 0.01)])


def test_positive_intervals_coalesce():
    rows = [((0, 5000), True), ((5000, 10000), True), ((10000, 15000), False), ((15000, 20000), True)]
    s = positive_intervals(rows)
    assert s.intervals == ((0, 10000), (15000, 20000))
    assert s.time_to_first == 5000
    assert s.positives == 3 and s.evaluated == 4


def test_positive_intervals_empty():
    s = positive_intervals([((0, 5000), False)])
    assert s.intervals == () and s.time_to_first is None
    assert positive_intervals([]).positive_fraction == 0.0


def test_positive_intervals_order_checked():
    with pytest.raises(ValueError):
        positive_intervals([((5000, 10000), True), ((0, 5000), True)])


def test_queue_filling_segments():
    # rise 0..30 over 3 s, drain, short rise, then a plateau
    q_t, q_len = [], []
    for i in range(300):
        q_t.append(i * 0.01)
        q_len.append(i // 10)
    for i in range(50):
        q_t.append(3.0 + i * 0.01)
        q_len.append(29 - i // 2)
    for i in range(100):
        q_t.append(3.5 + i * 0.01)
        q_len.append(5 + i // 10)
    binned = bin_max_occupancy(q_t, q_len)
    segs = queue_filling_segments(binned)
    assert segs == [(0.0, 2.9)]
    assert longest_segment(segs) == (0.0, 2.9)
    assert queue_filling_segments(binned, min_duration_s=0.5)[-1] == (3.5, 4.4)
    assert longest_segment([]) is None
