"""Windowed pairwise detector: smooth, extract, merge, regress, pick, decide."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .core import (
    DEFAULT_ALPHA,
    DEFAULT_DELTA_MS,
    DEFAULT_EPSILON,
    DEFAULT_MIN_GROUP_POINTS,
    DEFAULT_TAU_MS,
    DEFAULT_WINDOW_MS,
    FlowTrace,
    SbdVerdict,
    SlopeEstimate,
    decide,
    extract_groups,
    merge_groups,
    pick_dominant_slope,
    regress_slope,
    smooth_series,
)

Window = tuple[float, float]


class ConfigError(ValueError):
    """Raised for invalid detector configuration."""


@dataclass(frozen=True)
class DetectorConfig:
    alpha: float = DEFAULT_ALPHA
    delta_ms: float = DEFAULT_DELTA_MS
    epsilon: float = DEFAULT_EPSILON
    tau_ms: float = DEFAULT_TAU_MS
    window_ms: float = DEFAULT_WINDOW_MS
    min_group_points: int = DEFAULT_MIN_GROUP_POINTS

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha: must lie in (0, 1], got {self.alpha!r}")
        if self.delta_ms < 0:
            raise ConfigError(f"delta_ms: must be non-negative, got {self.delta_ms!r}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon: must be non-negative, got {self.epsilon!r}")
        if self.tau_ms < 0:
            raise ConfigError(f"tau_ms: must be non-negative, got {self.tau_ms!r}")
        if not self.window_ms > 0:
            raise ConfigError(f"window_ms: must be positive, got {self.window_ms!r}")
        if int(self.min_group_points) != self.min_group_points or self.min_group_points < 2:
            raise ConfigError(
                f"min_group_points: must be an integer >= 2, got {self.min_group_points!r}"
            )

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown detector config key")
        kwargs = {}
        for name, value in data.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}: expected a number, got {value!r}")
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "DetectorConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def flow_slopes(trace: FlowTrace, config: DetectorConfig = DetectorConfig()) -> list[SlopeEstimate]:
    """Positive slope estimates for every merged queue-building group of a trace.

    Non-positive slopes are dropped: they carry no queue-building signal and
    make the relative error undefined.
    """
    smoothed = smooth_series(trace.rtt, config.alpha)
    groups = extract_groups(trace.t, smoothed)
    out = []
    for group in merge_groups(groups, config.delta_ms):
        est = regress_slope(group, config.min_group_points)
        if est is not None and est.slope > 0:
            out.append(est)
    return out


def detection_windows(start: float, end: float, width: float) -> list[Window]:
    """Epoch-aligned tumbling windows covering [start, end]."""
    if end < start:
        return []
    k0 = math.floor(start / width)
    k1 = math.floor(end / width)
    return [(k * width, (k + 1) * width) for k in range(k0, k1 + 1)]


def decide_windows(
    slopes_a: list[SlopeEstimate],
    slopes_b: list[SlopeEstimate],
    windows: list[Window],
    config: DetectorConfig = DetectorConfig(),
) -> list[tuple[Window, SbdVerdict]]:
    out = []
    for w in windows:
        a = pick_dominant_slope(slopes_a, w)
        b = pick_dominant_slope(slopes_b, w)
        if a is None or b is None:
            continue
        out.append((w, decide(a, b, config.epsilon, config.tau_ms)))
    return out


def run_detector(
    trace_a: FlowTrace,
    trace_b: FlowTrace,
    config: DetectorConfig = DetectorConfig(),
) -> list[tuple[Window, SbdVerdict]]:
    """Per-window verdicts over the span where both traces have samples.

    Windows where either flow lacks a dominant slope produce no verdict.
    """
    if not len(trace_a) or not len(trace_b):
        return []
    start = max(trace_a.t[0], trace_b.t[0])
    end = min(trace_a.t[-1], trace_b.t[-1])
    if end < start:
        return []
    windows = detection_windows(start, end, config.window_ms)
    return decide_windows(flow_slopes(trace_a, config), flow_slopes(trace_b, config), windows, config)


def latest_verdict(
    trace_a: FlowTrace,
    trace_b: FlowTrace,
    now: float,
    config: DetectorConfig = DetectorConfig(),
    lookback_windows: int = 2,
) -> Optional[SbdVerdict]:
    """Verdict for the window that just closed at ``now`` (online use).

    Only the last few windows of each trace are processed so the cost per
    call stays bounded as traces grow.
    """
    w = config.window_ms
    window = (now - w, now)
    lo = now - lookback_windows * w
    a = trace_a.between(lo, now)
    b = trace_b.between(lo, now)
    if not len(a) or not len(b):
        return None
    res = decide_windows(flow_slopes(a, config), flow_slopes(b, config), [window], config)
    return res[0][1] if res else None
