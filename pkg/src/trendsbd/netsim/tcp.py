"""TCP congestion control rules and the packet-level flow endpoint."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

SLOW_START = "slow-start"
CONGESTION_AVOIDANCE = "congestion-avoidance"

INITIAL_CWND = 2.0
MIN_RTO = 1.0  # seconds
MAX_RTO = 60.0

CUBIC_C = 0.4
CUBIC_BETA = 0.3


@dataclass(slots=True)
class CongestionState:
    """Window state of one sender. Windows in packets, times in ms."""

    cwnd: float = INITIAL_CWND
    ssthresh: float = math.inf
    srtt: Optional[float] = None
    min_rtt: Optional[float] = None
    phase: str = SLOW_START

    def __post_init__(self):
        if self.cwnd < 1:
            raise ValueError(f"cwnd must be >= 1, got {self.cwnd}")


def reno_on_ack(state: CongestionState) -> CongestionState:
    """Per-ack growth: +1 in slow start, +1/cwnd in congestion avoidance.

    Updates ``state`` in place and returns it.
    """
    if state.phase == SLOW_START:
        state.cwnd += 1.0
        if state.cwnd >= state.ssthresh:
            state.phase = CONGESTION_AVOIDANCE
    else:
        state.cwnd += 1.0 / state.cwnd
    return state


def reno_on_loss(state: CongestionState) -> CongestionState:
    state.cwnd = max(1.0, state.cwnd / 2.0)
    state.ssthresh = state.cwnd
    state.phase = CONGESTION_AVOIDANCE
    return state


def on_timeout(state: CongestionState) -> CongestionState:
    """Retransmission timeout: remember half the window, restart from 1."""
    state.ssthresh = max(2.0, state.cwnd / 2.0)
    state.cwnd = 1.0
    state.phase = SLOW_START
    return state


def update_rtt(state: CongestionState, sample_ms: float) -> None:
    if state.srtt is None:
        state.srtt = sample_ms
    else:
        state.srtt += 0.125 * (sample_ms - state.srtt)
    if state.min_rtt is None or sample_ms < state.min_rtt:
        state.min_rtt = sample_ms
    if state.srtt < state.min_rtt:
        state.srtt = state.min_rtt


def cubic_k(w_max: float, beta: float = CUBIC_BETA, c: float = CUBIC_C) -> float:
    return (w_max * beta / c) ** (1.0 / 3.0)


def cubic_window(
    state: Optional[CongestionState],
    t_since_loss: float,
    w_max: float,
    beta: float = CUBIC_BETA,
    c: float = CUBIC_C,
) -> float:
    """Cubic target window ``t_since_loss`` seconds after the last reduction."""
    k = cubic_k(w_max, beta, c)
    return c * (t_since_loss - k) ** 3 + w_max


class Reno:
    name = "reno"

    def on_ack(self, state: CongestionState, now: float) -> None:
        reno_on_ack(state)

    def on_loss(self, state: CongestionState, now: float) -> None:
        reno_on_loss(state)

    def on_timeout(self, state: CongestionState, now: float) -> None:
        on_timeout(state)


class Cubic:
    """CUBIC window growth with the TCP-friendly floor."""

    name = "cubic"

    def __init__(self, beta: float = CUBIC_BETA, c: float = CUBIC_C):
        self.beta = beta
        self.c = c
        self.w_max = 0.0
        self.epoch = None
        self.w_reduced = 0.0

    def on_ack(self, state: CongestionState, now: float) -> None:
        if state.phase == SLOW_START:
            reno_on_ack(state)
            return
        if self.epoch is None:
            self.epoch = now
            self.w_max = max(self.w_max, state.cwnd)
            self.w_reduced = state.cwnd
        rtt = (state.srtt or 0.0) / 1000.0
        t = now - self.epoch
        target = cubic_window(state, t + rtt, self.w_max, self.beta, self.c)
        b = self.beta
        w_est = self.w_reduced + 3 * b / (2 - b) * (t / rtt if rtt > 0 else 0.0)
        if target < w_est:
            target = w_est
        if target > state.cwnd:
            state.cwnd += (target - state.cwnd) / state.cwnd
        else:
            state.cwnd += 0.01 / state.cwnd

    def on_loss(self, state: CongestionState, now: float) -> None:
        self.w_max = state.cwnd
        state.cwnd = max(1.0, state.cwnd * (1 - self.beta))
        state.ssthresh = state.cwnd
        state.phase = CONGESTION_AVOIDANCE
        self.epoch = now
        self.w_reduced = state.cwnd

    def on_timeout(self, state: CongestionState, now: float) -> None:
        self.w_max = state.cwnd
        on_timeout(state)
        self.epoch = None


class Packet:
    __slots__ = ("flow", "seq", "ts", "size", "hop", "is_ack", "ack_no")

    def __init__(self, flow, seq, ts, size, is_ack=False, ack_no=0):
        self.flow = flow
        self.seq = seq
        self.ts = ts
        self.size = size
        self.hop = 0
        self.is_ack = is_ack
        self.ack_no = ack_no


class TcpFlow:
    """Bulk-transfer sender and receiver of one connection.

    Loss recovery: three duplicate acks halve the window once per window of
    data (NewReno partial acks retransmit the next hole); a timeout at
    max(1 s, 4 srtt) restarts from one packet with exponential backoff.
    The receiver acks every packet, echoing the data packet's send time.
    """

    def __init__(self, sim, flow_id, fwd, rev, cc, mss, bin_width=0.1, jitter=0.0):
        self.sim = sim
        self.flow_id = flow_id
        self.fwd = fwd
        self.rev = rev
        self.cc = cc
        self.mss = mss
        self.state = CongestionState()
        self.active = False
        self.start_time = None
        # random send offset in [0, jitter) s, order preserving; breaks
        # deterministic drop-tail phase lock between flows
        self.jitter = jitter
        self.rng = None
        self._last_emit = 0.0
        # sender
        self.next_seq = 0
        self.una = 0
        self.sacked = set()
        self.dupacks = 0
        self.in_recovery = False
        self.recover = 0
        self.rto = MIN_RTO
        self.backoff = 1
        self.rto_deadline = math.inf
        self.timer_pending = False
        # receiver
        self.rcv_next = 0
        self.rcv_ooo = set()
        # accounting
        self.sent = 0
        self.retransmits = 0
        self.dropped = 0
        self.acks_dropped = 0
        self.losses = 0
        self.timeouts = 0
        self.delivered = 0
        self.bin_width = bin_width
        self.bins = []  # delivered packets per bin
        self.trace_t = []
        self.trace_rtt = []
        self.on_rtt_sample = None

    # -- sender -----------------------------------------------------------

    def start(self, _=None):
        self.active = True
        self.start_time = self.sim.now
        self._fill_window()

    def _emit(self, seq):
        now = self.sim.now
        self.sent += 1
        if self.rto_deadline == math.inf:
            self._arm_timer(now)
        pkt = Packet(self, seq, now, self.mss)
        if self.jitter > 0.0:
            t = now + self.rng.random() * self.jitter
            if t < self._last_emit:
                t = self._last_emit
            self._last_emit = t
            self.sim.schedule(t, self._transmit, pkt)
        else:
            self.fwd[0].send(pkt)

    def _transmit(self, pkt):
        pkt.ts = self.sim.now
        self.fwd[0].send(pkt)

    def _fill_window(self):
        cwnd = self.state.cwnd
        while self.next_seq - self.una - len(self.sacked) < cwnd:
            seq = self.next_seq
            self.next_seq = seq + 1
            self._emit(seq)

    def _retransmit(self, seq):
        self.retransmits += 1
        self._emit(seq)

    def _arm_timer(self, now):
        self.rto_deadline = now + self.rto * self.backoff
        if not self.timer_pending:
            self.timer_pending = True
            self.sim.schedule(self.rto_deadline, self._on_timer, None)

    def _on_timer(self, _):
        self.timer_pending = False
        if self.una >= self.next_seq or self.rto_deadline == math.inf:
            return
        now = self.sim.now
        if now < self.rto_deadline:
            self.timer_pending = True
            self.sim.schedule(self.rto_deadline, self._on_timer, None)
            return
        self.timeouts += 1
        self.cc.on_timeout(self.state, now)
        self.backoff = min(self.backoff * 2, int(MAX_RTO / MIN_RTO))
        self.in_recovery = True
        self.recover = self.next_seq
        self.dupacks = 0
        self._arm_timer(now)
        self._retransmit(self.una)

    def on_ack(self, pkt):
        now = self.sim.now
        st = self.state
        rtt_ms = (now - pkt.ts) * 1000.0
        t_ms = round(now * 1000.0, 3)
        rtt_ms_q = round(rtt_ms, 3)
        if not self.trace_t or t_ms > self.trace_t[-1]:
            self.trace_t.append(t_ms)
            self.trace_rtt.append(rtt_ms_q)
            if self.on_rtt_sample is not None:
                self.on_rtt_sample(self, t_ms, rtt_ms_q)
        update_rtt(st, rtt_ms)
        self.rto = max(MIN_RTO, 4.0 * st.srtt / 1000.0)

        cum = pkt.ack_no
        if cum > self.una:
            sacked = self.sacked
            if sacked:
                for q in range(self.una, cum):
                    sacked.discard(q)
            self.una = cum
            self.dupacks = 0
            self.backoff = 1
            if pkt.seq >= cum:
                sacked.add(pkt.seq)
            if self.in_recovery:
                if cum >= self.recover:
                    self.in_recovery = False
                else:
                    self._retransmit(cum)
            else:
                self.cc.on_ack(st, now)
            if self.una < self.next_seq:
                self._arm_timer(now)
            else:
                self.rto_deadline = math.inf
        elif cum == self.una and self.una < self.next_seq:
            if pkt.seq > cum:
                self.sacked.add(pkt.seq)
            self.dupacks += 1
            if self.dupacks == 3 and not self.in_recovery:
                self.losses += 1
                self.cc.on_loss(st, now)
                self.in_recovery = True
                self.recover = self.next_seq
                self._retransmit(self.una)
        self._fill_window()

    # -- receiver ---------------------------------------------------------

    def on_data(self, pkt):
        seq = pkt.seq
        nxt = self.rcv_next
        if seq == nxt:
            nxt += 1
            ooo = self.rcv_ooo
            while nxt in ooo:
                ooo.remove(nxt)
                nxt += 1
            newly = nxt - self.rcv_next
            self.rcv_next = nxt
            self.delivered += newly
            b = int(self.sim.now / self.bin_width)
            bins = self.bins
            if b >= len(bins):
                bins.extend([0] * (b + 1 - len(bins)))
            bins[b] += newly
        elif seq > nxt:
            self.rcv_ooo.add(seq)
        self.rev[0].send(Packet(self, seq, pkt.ts, 40, True, self.rcv_next))
