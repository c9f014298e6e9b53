"""Trend-line shared bottleneck detection primitives.

Every function here is pure. Times are milliseconds, delays milliseconds,
slopes ms/s.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

DEFAULT_ALPHA = 0.9
DEFAULT_DELTA_MS = 50.0
DEFAULT_EPSILON = 0.2
DEFAULT_TAU_MS = 1000.0
DEFAULT_WINDOW_MS = 5000.0
DEFAULT_MIN_GROUP_POINTS = 5


class TraceError(ValueError):
    """Raised for malformed RTT traces."""


@dataclass(frozen=True, slots=True)
class RttSample:
    t: float
    rtt: float

    def __post_init__(self):
        if not self.rtt > 0:
            raise TraceError(f"rtt must be positive, got {self.rtt!r}")
        if self.t < 0:
            raise TraceError(f"timestamp must be non-negative, got {self.t!r}")


class FlowTrace:
    """Per-flow series of (ack arrival time, round-trip delay).

    Stored column-wise; ``samples`` materialises RttSample objects on demand.
    """

    __slots__ = ("flow_id", "t", "rtt")

    def __init__(self, flow_id, t: Iterable[float] = (), rtt: Iterable[float] = ()):
        t = tuple(float(x) for x in t)
        rtt = tuple(float(x) for x in rtt)
        if len(t) != len(rtt):
            raise TraceError(f"trace {flow_id!r}: {len(t)} timestamps but {len(rtt)} delays")
        prev = -math.inf
        for x in t:
            if not x > prev:
                raise TraceError(
                    f"trace {flow_id!r}: timestamps must be strictly increasing "
                    f"({x!r} after {prev!r})"
                )
            prev = x
        if t and t[0] < 0:
            raise TraceError(f"trace {flow_id!r}: negative timestamp {t[0]!r}")
        for r in rtt:
            if not r > 0:
                raise TraceError(f"trace {flow_id!r}: rtt must be positive, got {r!r}")
        self.flow_id = flow_id
        self.t = t
        self.rtt = rtt

    @classmethod
    def from_samples(cls, flow_id, samples: Iterable[RttSample]) -> "FlowTrace":
        samples = list(samples)
        return cls(flow_id, [s.t for s in samples], [s.rtt for s in samples])

    @property
    def samples(self) -> tuple[RttSample, ...]:
        return tuple(RttSample(a, b) for a, b in zip(self.t, self.rtt))

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, FlowTrace):
            return NotImplemented
        return (self.flow_id, self.t, self.rtt) == (other.flow_id, other.t, other.rtt)

    def __repr__(self):
        return f"FlowTrace({self.flow_id!r}, n={len(self.t)})"

    def span(self) -> tuple[float, float]:
        if not self.t:
            raise TraceError(f"trace {self.flow_id!r} is empty")
        return self.t[0], self.t[-1]

    def between(self, start: float, end: float) -> "FlowTrace":
        """Samples with start <= t < end."""
        lo = bisect_left(self.t, start)
        hi = bisect_left(self.t, end)
        out = FlowTrace.__new__(FlowTrace)
        out.flow_id, out.t, out.rtt = self.flow_id, self.t[lo:hi], self.rtt[lo:hi]
        return out


@dataclass(frozen=True, slots=True)
class SmoothingState:
    alpha: float = DEFAULT_ALPHA
    s: Optional[float] = None  # None until the first sample seeds it

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")


@dataclass(frozen=True)
class Group:
    points: tuple[tuple[float, float], ...]

    @property
    def start(self) -> float:
        return self.points[0][0]

    @property
    def end(self) -> float:
        return self.points[-1][0]

    def mean_delay(self) -> float:
        return math.fsum(y for _, y in self.points) / len(self.points)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class MergedGroup:
    points: tuple[tuple[float, float], ...]

    @property
    def start(self) -> float:
        return self.points[0][0]

    @property
    def end(self) -> float:
        return self.points[-1][0]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, slots=True)
class SlopeEstimate:
    slope: float  # ms/s
    start: float
    end: float
    n_points: int


@dataclass(frozen=True)
class SbdVerdict:
    shared: bool
    error: Optional[float]
    slope_a: SlopeEstimate
    slope_b: SlopeEstimate
    # "" for an evaluated comparison, otherwise why error is undefined
    flag: str = field(default="")


def smooth(state: SmoothingState, rtt: float) -> tuple[SmoothingState, float]:
    """One step of the exponential smoothing filter.

    The first sample seeds the filter with the raw value.
    """
    if not rtt > 0:
        raise TraceError(f"rtt must be positive, got {rtt!r}")
    if state.s is None:
        value = float(rtt)
    else:
        s = state.s
        value = s + state.alpha * (rtt - s)
        # keep rounding from escaping the [s, rtt] hull
        lo, hi = (s, rtt) if s <= rtt else (rtt, s)
        value = min(max(value, lo), hi)
    return SmoothingState(state.alpha, value), value


def smooth_series(rtts: Iterable[float], alpha: float = DEFAULT_ALPHA) -> list[float]:
    """Apply ``smooth`` across a whole series (inlined for speed)."""
    SmoothingState(alpha)  # validates alpha
    out = []
    s = None
    for r in rtts:
        if not r > 0:
            raise TraceError(f"rtt must be positive, got {r!r}")
        if s is None:
            s = float(r)
        else:
            v = s + alpha * (r - s)
            if s <= r:
                s = r if v > r else (s if v < s else v)
            else:
                s = s if v > s else (r if v < r else v)
        out.append(s)
    return out


def smooth_trace(trace: FlowTrace, alpha: float = DEFAULT_ALPHA) -> FlowTrace:
    out = FlowTrace.__new__(FlowTrace)
    out.flow_id, out.t, out.rtt = trace.flow_id, trace.t, tuple(smooth_series(trace.rtt, alpha))
    return out


def extract_groups(times: Sequence[float], delays: Sequence[float]) -> list[Group]:
    """Max-filter extraction of queue-building runs from a smoothed trace.

    A sample joins the current group when its delay is not below the
    previous sample's delay. Index 0 only seeds the comparison and never
    enters a group.
    """
    if len(times) != len(delays):
        raise ValueError("times and delays differ in length")
    n = len(delays)
    if n == 0:
        return []
    groups: list[list[tuple[float, float]]] = []
    last = delays[0]
    last_index = 0
    for i in range(1, n):
        y = delays[i]
        if y >= last:
            if last_index == 0 or i - last_index > 1:
                groups.append([])
            groups[-1].append((times[i], y))
            last_index = i
        last = y
    return [Group(tuple(g)) for g in groups]


def extract_trace_groups(trace: FlowTrace) -> list[Group]:
    return extract_groups(trace.t, trace.rtt)


def merge_groups(groups: Sequence[Group], delta: float = DEFAULT_DELTA_MS) -> list[MergedGroup]:
    """Join adjacent groups that continue the same queue-building episode.

    Group i+1 is appended to group i when group i's last delay is below
    group i+1's mean delay and the time gap between them is below delta.
    Chains merge transitively; every point is kept.
    """
    if not groups:
        return []
    merged: list[list[tuple[float, float]]] = [list(groups[0].points)]
    for prev, nxt in zip(groups, groups[1:]):
        gap = nxt.start - prev.end
        if prev.points[-1][1] < nxt.mean_delay() and gap < delta:
            merged[-1].extend(nxt.points)
        else:
            merged.append(list(nxt.points))
    return [MergedGroup(tuple(m)) for m in merged]


def regress_slope(
    group: MergedGroup | Group, min_points: int = DEFAULT_MIN_GROUP_POINTS
) -> Optional[SlopeEstimate]:
    """Least-squares delay slope in ms/s, or None for degenerate groups."""
    pts = group.points
    n = len(pts)
    if n < max(min_points, 2):
        return None
    x0 = pts[0][0]
    xs = [x - x0 for x, _ in pts]
    ys = [y for _, y in pts]
    x_mean = math.fsum(xs) / n
    y_mean = math.fsum(ys) / n
    sxx = math.fsum((x - x_mean) ** 2 for x in xs)
    if sxx == 0.0:
        return None
    sxy = math.fsum((x - x_mean) * (y - y_mean) for x, y in zip(xs, ys))
    return SlopeEstimate(1000.0 * sxy / sxx, pts[0][0], pts[-1][0], n)


def pick_dominant_slope(
    estimates: Iterable[SlopeEstimate], window: tuple[float, float]
) -> Optional[SlopeEstimate]:
    """Estimate with the most points among those ending in [start, end).

    Ties go to the earliest-ending estimate, then the earliest start.
    """
    start, end = window
    candidates = [e for e in estimates if start <= e.end < end]
    if not candidates:
        return None
    return min(candidates, key=lambda e: (-e.n_points, e.end, e.start, e.slope))


def decide(
    a: SlopeEstimate,
    b: SlopeEstimate,
    epsilon: float = DEFAULT_EPSILON,
    tau: float = DEFAULT_TAU_MS,
) -> SbdVerdict:
    s = max(a.start, b.start)
    e = min(a.end, b.end)
    if e - s < 0 and abs(e - s) > tau:
        return SbdVerdict(False, None, a, b, flag="time-gated")
    top = max(a.slope, b.slope)
    if not top > 0:
        return SbdVerdict(False, None, a, b, flag="non-positive-slope")
    error = abs(a.slope - b.slope) / top
    return SbdVerdict(error <= epsilon, error, a, b)
