"""Detection intervals and queue-filling ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass(frozen=True)
class DetectionSummary:
    intervals: tuple[tuple[float, float], ...]  # ms
    time_to_first: Optional[float]  # ms, end of the first positive window
    positives: int
    evaluated: int

    @property
    def positive_fraction(self) -> float:
        return self.positives / self.evaluated if self.evaluated else 0.0


def positive_intervals(verdicts: Sequence) -> DetectionSummary:
    """Coalesce consecutive positive windows.

    ``verdicts`` holds ((start_ms, end_ms), verdict) pairs in time order;
    ``verdict`` may be an SbdVerdict or a plain bool.
    """
    intervals = []
    first = None
    positives = 0
    prev_end = None
    for (start, end), v in verdicts:
        if prev_end is not None and start < prev_end:
            raise ValueError("verdicts must be time-ordered and non-overlapping")
        prev_end = end
        shared = v if isinstance(v, bool) else v.shared
        if not shared:
            continue
        positives += 1
        if first is None:
            first = end
        if intervals and intervals[-1][1] == start:
            intervals[-1] = (intervals[-1][0], end)
        else:
            intervals.append((start, end))
    return DetectionSummary(tuple(intervals), first, positives, len(verdicts))


def bin_max_occupancy(q_t: Sequence[float], q_len: Sequence[int],
                      bin_s: float = 0.1) -> list[tuple[int, int]]:
    """(bin index, largest occupancy seen by an arrival in that bin)."""
    if len(q_t) != len(q_len):
        raise ValueError("q_t and q_len differ in length")
    bins = {}
    for t, q in zip(q_t, q_len):
        b = math.floor(round(t / bin_s, 9))  # 2.9 / 0.1 must land in bin 29
        if q > bins.get(b, -1):
            bins[b] = q
    return sorted(bins.items())


def queue_filling_segments(binned: Sequence[tuple[int, int]], bin_s: float = 0.1,
                           min_duration_s: float = 2.0) -> list[tuple[float, float]]:
    """Intervals (s) over which the queue builds up.

    ``binned`` comes from ``bin_max_occupancy``. Within a run the per-bin
    maximum never falls and bins are contiguous; each run is cut where it
    first reaches its peak and kept if it rose and spans ``min_duration_s``.
    """
    out = []
    if not binned:
        return out

    def close(run):
        peak = max(q for _, q in run)
        end = next(i for i, (_, q) in enumerate(run) if q == peak)
        (b0, q0), (b1, q1) = run[0], run[end]
        if q1 > q0 and (b1 - b0) * bin_s >= min_duration_s:
            out.append((round(b0 * bin_s, 9), round(b1 * bin_s, 9)))

    run = [binned[0]]
    for prev, cur in zip(binned, binned[1:]):
        if cur[0] == prev[0] + 1 and cur[1] >= prev[1]:
            run.append(cur)
        else:
            close(run)
            run = [cur]
    close(run)
    return out


def longest_segment(segments: Sequence[tuple[float, float]]) -> Optional[tuple[float, float]]:
    return max(segments, key=lambda s: (s[1] - s[0], -s[0]), default=None)
