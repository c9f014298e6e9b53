"""Multipath sender: uncoupled Reno per subflow until the detector reports a
shared bottleneck, then LIA coupling until no positive verdict has been seen
for the fallback interval."""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Optional, Sequence

from ..netsim.config import CouplingConfig
from ..netsim.tcp import SLOW_START, CongestionState, on_timeout, reno_on_ack
from ..sbd.core import FlowTrace, SbdVerdict
from ..sbd.detector import DetectorConfig, latest_verdict

log = logging.getLogger(__name__)

UNCOUPLED = "uncoupled"
COUPLED = "coupled"


class SubflowState:
    """A subflow's window state as seen by the coupling law.

    ``rtt`` (ms) defaults to the live smoothed RTT of ``cc``.
    """

    __slots__ = ("path_id", "cc", "_rtt")

    def __init__(self, path_id, cc: CongestionState, rtt: Optional[float] = None):
        if cc.cwnd < 1:
            raise ValueError(f"subflow {path_id}: cwnd must be >= 1")
        self.path_id = path_id
        self.cc = cc
        self._rtt = rtt

    @property
    def rtt(self) -> Optional[float]:
        return self._rtt if self._rtt is not None else self.cc.srtt


@dataclass(frozen=True)
class CouplingMode:
    mode: str = UNCOUPLED
    last_positive: Optional[float] = None  # ms
    fallback_after: float = 100_000.0  # ms

    def __post_init__(self):
        if self.mode not in (UNCOUPLED, COUPLED):
            raise ValueError(f"mode must be {UNCOUPLED!r} or {COUPLED!r}, got {self.mode!r}")
        if self.mode == COUPLED and self.last_positive is None:
            raise ValueError("coupled mode needs last_positive")

    @property
    def coupled(self) -> bool:
        return self.mode == COUPLED


def lia_increase(subflows: Sequence[SubflowState], acked_path) -> float:
    """Per-ack window increment of the acked subflow under LIA.

    max_k(w_k/rtt_k^2) / (sum_k w_k/rtt_k)^2, capped at the single-path
    increment 1/w_r.
    """
    best = 0.0
    total = 0.0
    acked = None
    for s in subflows:
        rtt = s.rtt
        if rtt is None or not rtt > 0:
            raise ValueError(f"subflow {s.path_id}: rtt must be measured and positive")
        w = s.cc.cwnd
        total += w / rtt
        q = w / (rtt * rtt)
        if q > best:
            best = q
        if s.path_id == acked_path:
            acked = s
    if acked is None:
        raise KeyError(f"unknown subflow {acked_path!r}")
    if len(subflows) == 1:
        # the ratio equals 1/w only up to rounding; one subflow is plain Reno
        return 1.0 / acked.cc.cwnd
    inc = best / (total * total)
    cap = 1.0 / acked.cc.cwnd
    return inc if inc < cap else cap


def lia_decrease(subflow: SubflowState) -> CongestionState:
    """Halve the losing subflow's window (floor 1); other subflows untouched."""
    cc = subflow.cc
    cc.cwnd = max(1.0, cc.cwnd / 2.0)
    cc.ssthresh = cc.cwnd
    cc.phase = "congestion-avoidance"
    return cc


def on_sbd_signal(mode: CouplingMode, verdict: Optional[SbdVerdict], now: float) -> CouplingMode:
    if verdict is not None and verdict.shared:
        return replace(mode, mode=COUPLED, last_positive=now)
    return mode


def on_tick(mode: CouplingMode, now: float) -> CouplingMode:
    if mode.coupled and now - mode.last_positive > mode.fallback_after:
        return replace(mode, mode=UNCOUPLED)
    return mode


class LiaSubflowControl:
    """Congestion control plug-in for one subflow of a session."""

    name = "multipath-subflow"

    def __init__(self, session: "MultipathSession", path_id):
        self.session = session
        self.path_id = path_id

    def on_ack(self, state: CongestionState, now: float) -> None:
        if state.phase == SLOW_START or not self.session.coupled:
            reno_on_ack(state)
            return
        live = self.session.measured_subflows()
        state.cwnd += lia_increase(live, self.path_id)

    def on_loss(self, state: CongestionState, now: float) -> None:
        lia_decrease(self.session.states[self.path_id])

    def on_timeout(self, state: CongestionState, now: float) -> None:
        on_timeout(state)


class MultipathSession:
    """Subflows of one multipath connection plus the coupling state machine.

    Every ``window_ms`` the detector runs on each subflow pair over the
    window that just closed; any shared verdict couples the session.
    """

    def __init__(self, session_id, flows, coupling: CouplingConfig = CouplingConfig(),
                 detector: Optional[DetectorConfig] = None):
        self.session_id = session_id
        self.flows = list(flows)
        self.coupling = coupling
        self.detector = detector or DetectorConfig(
            epsilon=coupling.epsilon, tau_ms=coupling.tau_ms, window_ms=coupling.window_ms
        )
        self.mode = CouplingMode(fallback_after=coupling.fallback_s * 1000.0)
        if coupling.policy == COUPLED:
            self.mode = CouplingMode(COUPLED, 0.0, float("inf"))
        self.states = {}
        for f in self.flows:
            f.cc = LiaSubflowControl(self, f.flow_id)
            self.states[f.flow_id] = SubflowState(f.flow_id, f.state)
        self.verdicts = []  # (window, SbdVerdict)
        self.transitions = [(0.0, self.mode.mode)]
        self.sim = None

    @property
    def coupled(self) -> bool:
        return self.mode.mode == COUPLED

    def measured_subflows(self) -> list[SubflowState]:
        return [s for s in self.states.values() if s.cc.srtt]

    def attach(self, sim) -> None:
        self.sim = sim
        if self.coupling.policy == "sbd" and len(self.flows) > 1:
            sim.schedule(self.coupling.window_ms / 1000.0, self._tick, None)

    def _recent_trace(self, flow, lo: float, hi: float) -> FlowTrace:
        i = bisect_left(flow.trace_t, lo)
        j = bisect_left(flow.trace_t, hi)
        tr = FlowTrace.__new__(FlowTrace)
        tr.flow_id, tr.t, tr.rtt = flow.flow_id, tuple(flow.trace_t[i:j]), tuple(flow.trace_rtt[i:j])
        return tr

    def _tick(self, _):
        sim = self.sim
        now_ms = round(sim.now * 1000.0, 3)
        w = self.detector.window_ms
        before = self.mode.mode
        for fa, fb in combinations(self.flows, 2):
            a = self._recent_trace(fa, now_ms - 2 * w, now_ms)
            b = self._recent_trace(fb, now_ms - 2 * w, now_ms)
            verdict = latest_verdict(a, b, now_ms, self.detector)
            if verdict is not None:
                self.verdicts.append(((now_ms - w, now_ms), verdict))
                self.mode = on_sbd_signal(self.mode, verdict, now_ms)
        self.mode = on_tick(self.mode, now_ms)
        if self.mode.mode != before:
            log.debug("session %s: %s -> %s at %.1f s", self.session_id, before, self.mode.mode, sim.now)
            self.transitions.append((now_ms, self.mode.mode))
        sim.schedule(sim.now + w / 1000.0, self._tick, None)

    def aggregate_bins(self) -> list[int]:
        n = max((len(f.bins) for f in self.flows), default=0)
        out = [0] * n
        for f in self.flows:
            for i, b in enumerate(f.bins):
                out[i] += b * f.mss
        return out
