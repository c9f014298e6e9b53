"""Fairness metrics, analytic throughput and delay-growth oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..netsim.config import MTU


@dataclass(frozen=True)
class FairnessReport:
    j: float
    x_sp_mean: float  # Mbps
    x_mp: float  # Mbps
    n_single_flows: int

    @property
    def ratio(self) -> float:
        return throughput_ratio(self.x_mp, self.x_sp_mean)


@dataclass(frozen=True)
class FitReport:
    model: str  # "sqrt-law" or "linear"
    params: dict
    r_squared: float
    segment: tuple[float, float]


def jain_index(x_sp_mean: float, x_mp: float) -> float:
    """Two-party Jain index of the multipath rate against the mean single-path rate."""
    if x_sp_mean < 0 or x_mp < 0:
        raise ValueError("rates must be non-negative")
    den = 2.0 * (x_sp_mean * x_sp_mean + x_mp * x_mp)
    if den == 0:
        raise ValueError("Jain index is undefined when both rates are zero")
    return (x_sp_mean + x_mp) ** 2 / den


def throughput_ratio(x_mp: float, x_sp_mean: float) -> float:
    if not x_sp_mean > 0:
        raise ZeroDivisionError("mean single-path rate must be positive")
    return x_mp / x_sp_mean


def fairness(single_rates: Sequence[float], x_mp: float) -> FairnessReport:
    if not single_rates:
        raise ValueError("need at least one single-path rate")
    mean = math.fsum(single_rates) / len(single_rates)
    return FairnessReport(jain_index(mean, x_mp), mean, x_mp, len(single_rates))


def sqrt_law_rtt(t: float, n: float, capacity_pps: float, r_min: float) -> float:
    """RTT in seconds ``t`` seconds into a queue-filling episode."""
    return math.sqrt(2.0 * n * t / capacity_pps + r_min * r_min)


def _r_squared(y, fitted) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def fit_sqrt_law(times_s: Sequence[float], rtts_s: Sequence[float], n: Optional[float] = None,
                 capacity_pps: Optional[float] = None) -> FitReport:
    """Least-squares line through (t, r^2), t measured from the segment start.

    The slope estimates 2n/C and the intercept r_min^2. When ``n`` or
    ``capacity_pps`` is given the other is reported as implied by the slope.
    """
    if len(times_s) != len(rtts_s):
        raise ValueError("times and rtts differ in length")
    if len(times_s) < 5:
        raise ValueError(f"segment needs at least 5 samples, got {len(times_s)}")
    t = np.asarray(times_s, dtype=float)
    t = t - t[0]
    r2 = np.asarray(rtts_s, dtype=float) ** 2
    if np.ptp(t) == 0:
        raise ValueError("segment timestamps are all equal")
    slope, intercept = np.polyfit(t, r2, 1)
    params = {"two_n_over_c": float(slope), "r_min_sq": float(intercept)}
    if capacity_pps is not None:
        params["implied_n"] = float(slope) * capacity_pps / 2.0
    if n is not None and slope > 0:
        params["implied_capacity_pps"] = 2.0 * n / float(slope)
    return FitReport("sqrt-law", params, _r_squared(r2, slope * t + intercept),
                     (float(times_s[0]), float(times_s[-1])))


def predicted_slope(n: float, capacity_mbps: float, mss: int = MTU) -> float:
    """Linearised delay growth n/C in ms/s, with C in packets per second."""
    if not capacity_mbps > 0:
        raise ValueError("capacity must be positive")
    return 1000.0 * n / (capacity_mbps * 1e6 / (8 * mss))


def reno_throughput(rtt_s: float, p: float) -> float:
    if not 0 < p < 1:
        raise ValueError(f"loss probability must lie in (0, 1), got {p}")
    if not rtt_s > 0:
        raise ValueError("rtt must be positive")
    return math.sqrt(2.0 * (1.0 - p) / p) / rtt_s


def equilibrium_throughput(variant: str, paths: Sequence[tuple[float, float]]) -> float:
    """Packets per second for (rtt_s, p) per path.

    ``reno`` takes a single path, ``lia`` the best path, ``uncoupled`` the sum.
    """
    if not paths:
        raise ValueError("need at least one path")
    rates = [reno_throughput(rtt, p) for rtt, p in paths]
    if variant == "reno":
        if len(rates) != 1:
            raise ValueError("reno is single-path")
        return rates[0]
    if variant == "lia":
        return max(rates)
    if variant == "uncoupled":
        return math.fsum(rates)
    raise ValueError(f"unknown variant {variant!r}")
