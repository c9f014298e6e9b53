"""Discrete-event packet simulator.

Each directed link is a FIFO server. A packet's departure time is fixed
when it is admitted (``max(now, busy_until) + size/bandwidth``), so a hop
costs one event: the arrival at the far end after propagation. Queue
occupancy at time t is the number of admitted packets whose departure
time is still ahead of t.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from .config import ACK_SIZE, FlowSpec, TopologyError, TopologySpec
from .queues import DropTail, Red
from .tcp import Cubic, Reno, TcpFlow

log = logging.getLogger(__name__)


class Channel:
    """One direction of a link: FIFO queue, serialisation, propagation."""

    def __init__(self, sim, label, src, dst, config, rng, record=False):
        self.sim = sim
        self.label = label
        self.src = src
        self.dst = dst
        self.config = config
        self.sec_per_byte = 8.0 / (config.bandwidth * 1e6)
        self.prop = config.prop_delay / 1000.0
        self.capacity = config.queue_capacity
        if config.aqm == "red":
            self.aqm = Red(config.red, rng, tx_time=1500 * self.sec_per_byte)
        else:
            self.aqm = DropTail(config.queue_capacity)
        self.is_red = config.aqm == "red"
        self.busy_until = 0.0
        self.busy_start = 0.0  # start of the current busy period
        self.departures = deque()
        self.arrived = 0
        self.accepted = 0
        self.departed = 0
        self.dropped = 0
        self.bytes_accepted = 0
        self.record = record
        self.q_t = []  # occupancy seen by each arrival, when recording
        self.q_len = []
        self.drop_t = []

    @property
    def capacity_pps(self) -> float:
        return self.config.bandwidth * 1e6 / (8 * 1500)

    def occupancy(self, now: Optional[float] = None) -> int:
        now = self.sim.now if now is None else now
        deps = self.departures
        while deps and deps[0] <= now:
            deps.popleft()
            self.departed += 1
        return len(deps)

    def send(self, pkt):
        sim = self.sim
        now = sim.now
        deps = self.departures
        while deps and deps[0] <= now:
            deps.popleft()
            self.departed += 1
        qlen = len(deps)
        self.arrived += 1
        if self.is_red and qlen == 0:
            self.aqm.idle_since = self.busy_until
        if self.record:
            self.q_t.append(now)
            self.q_len.append(qlen)
        # RED keeps its own limit; the link capacity stays a hard bound
        if not self.aqm.admit(qlen, now) or qlen >= self.capacity:
            self.dropped += 1
            if pkt.is_ack:
                pkt.flow.acks_dropped += 1
            else:
                pkt.flow.dropped += 1
            if self.record:
                self.drop_t.append(now)
            return
        self.accepted += 1
        self.bytes_accepted += pkt.size
        busy = self.busy_until
        if busy <= now:
            self.busy_start = now
            busy = now
        done = busy + pkt.size * self.sec_per_byte
        self.busy_until = done
        deps.append(done)
        sim.schedule(done + self.prop, sim.hop_arrival, pkt)

    def check_conservation(self, now: Optional[float] = None) -> bool:
        q = self.occupancy(now)
        return self.arrived == self.departed + self.dropped + q and self.accepted == self.departed + q


@dataclass
class FlowStats:
    flow_id: str
    delivered_bytes: int
    loss_rate: float
    mean_rate: float  # Mbps over the flow's active time
    rtt_trace: object  # FlowTrace
    sent_packets: int = 0
    dropped_packets: int = 0
    timeouts: int = 0
    bins: list = field(default_factory=list)  # delivered bytes per bin
    bin_width: float = 0.1  # seconds
    start_time: float = 0.0  # seconds

    def rate_series(self) -> list[tuple[float, float]]:
        """(bin start in s, Mbps) per bin."""
        w = self.bin_width
        return [(i * w, b * 8 / w / 1e6) for i, b in enumerate(self.bins)]

    def mean_rate_between(self, t0: float, t1: float) -> float:
        """Mean delivered rate in Mbps over the bins in [t0, t1) seconds."""
        w = self.bin_width
        i0 = int(round(t0 / w))
        i1 = int(round(t1 / w))
        if i1 <= i0:
            return 0.0
        total = sum(self.bins[i0:i1])
        return total * 8 / ((i1 - i0) * w) / 1e6


class Simulation:
    """An instantiated topology; call ``run`` once."""

    def __init__(self, spec: TopologySpec, send_jitter: float = 1.0):
        self.spec = spec
        self.send_jitter = send_jitter
        self.now = 0.0
        self._heap = []
        self._counter = itertools.count()
        self.channels = {}  # (src, dst) -> Channel
        self.channels_by_label = {}
        self.flows = {}  # flow id -> TcpFlow
        self.flow_specs = {f.flow_id: f for f in spec.flows}
        self.routes = {}
        self.sessions = {}
        self.rng = random.Random(0)
        self._ran = False
        self.events_processed = 0

    def schedule(self, t, fn, arg):
        heapq.heappush(self._heap, (t, next(self._counter), fn, arg))

    def hop_arrival(self, pkt):
        flow = pkt.flow
        hop = pkt.hop + 1
        if pkt.is_ack:
            route = flow.rev
            if hop < len(route):
                pkt.hop = hop
                route[hop].send(pkt)
            else:
                flow.on_ack(pkt)
        else:
            route = flow.fwd
            if hop < len(route):
                pkt.hop = hop
                route[hop].send(pkt)
            else:
                flow.on_data(pkt)

    def channel(self, label: str, reverse: bool = False) -> Channel:
        return self.channels_by_label[(label, reverse)]

    def run(self, duration: float, seed: int = 0) -> dict:
        """Simulate ``duration`` ms; returns FlowStats per flow id."""
        if not duration > 0:
            raise ValueError(f"duration must be positive, got {duration!r}")
        if self._ran:
            raise RuntimeError("a Simulation runs once; build a new one")
        self._ran = True
        self.rng.seed(seed)
        for ch in self._channel_list:
            if ch.is_red:
                ch.aqm.rng = random.Random(self.rng.getrandbits(64))
        for fid, flow in self.flows.items():
            flow.rng = random.Random(self.rng.getrandbits(64))
        for fid, flow in self.flows.items():
            spec = self.flow_specs[fid]
            if spec.start_time is None:
                t0 = self.rng.uniform(0.0, 1.0)
            else:
                t0 = spec.start_time / 1000.0
            self.schedule(t0, flow.start, None)
        for session in self.sessions.values():
            session.attach(self)
        end = duration / 1000.0
        self.end_time = end
        heap = self._heap
        pop = heapq.heappop
        n = 0
        while heap and heap[0][0] <= end:
            t, _, fn, arg = pop(heap)
            self.now = t
            fn(arg)
            n += 1
        self.now = end
        self.events_processed = n
        log.debug("simulated %.1f s, %d events", end, n)
        return self.stats()

    def stats(self) -> dict:
        from ..sbd.core import FlowTrace

        out = {}
        end = self.now
        for fid, flow in self.flows.items():
            trace = FlowTrace.__new__(FlowTrace)
            trace.flow_id, trace.t, trace.rtt = fid, tuple(flow.trace_t), tuple(flow.trace_rtt)
            active = end - flow.start_time if flow.start_time is not None else 0.0
            delivered = flow.delivered * flow.mss
            out[fid] = FlowStats(
                flow_id=fid,
                delivered_bytes=delivered,
                loss_rate=flow.dropped / flow.sent if flow.sent else 0.0,
                mean_rate=delivered * 8 / active / 1e6 if active > 0 else 0.0,
                rtt_trace=trace,
                sent_packets=flow.sent,
                dropped_packets=flow.dropped,
                timeouts=flow.timeouts,
                bins=[b * flow.mss for b in flow.bins],
                bin_width=flow.bin_width,
                start_time=flow.start_time or 0.0,
            )
        return out

    def path_prop_delay(self, flow_id: str) -> float:
        """Sum of one-way propagation delays along a flow's route, ms."""
        return sum(ch.config.prop_delay for ch in self.flows[flow_id].fwd)


def _make_cc(spec: FlowSpec):
    if spec.cc == "reno":
        return Reno()
    if spec.cc == "cubic":
        return Cubic()
    raise TopologyError(f"flow {spec.flow_id}: cc {spec.cc!r} is built by its session")


def build_topology(spec: TopologySpec, send_jitter: float = 1.0) -> Simulation:
    """Instantiate channels, routes, flow endpoints, and multipath sessions.

    Each sender offsets transmissions by a seeded random delay below
    ``send_jitter`` MSS service times on its slowest link; 0 disables it.
    """
    if send_jitter < 0:
        raise TopologyError(f"send_jitter must be non-negative, got {send_jitter!r}")
    sim = Simulation(spec, send_jitter)
    graph = nx.Graph()
    graph.add_nodes_from(spec.nodes)
    channels = []
    for link in spec.links:
        if graph.has_edge(link.a, link.b):
            raise TopologyError(f"link {link.label}: duplicate link between {link.a} and {link.b}")
        graph.add_edge(link.a, link.b)
        record = link.label in spec.monitor
        fwd = Channel(sim, link.label, link.a, link.b, link.config, sim.rng, record=record)
        rev = Channel(sim, link.label, link.b, link.a, link.config, sim.rng)
        sim.channels[(link.a, link.b)] = fwd
        sim.channels[(link.b, link.a)] = rev
        sim.channels_by_label[(link.label, False)] = fwd
        sim.channels_by_label[(link.label, True)] = rev
        channels += [fwd, rev]
    sim._channel_list = channels

    subflows = {}
    for f in spec.flows:
        if f.path is not None:
            path = list(f.path)
            for a, b in zip(path, path[1:]):
                if not graph.has_edge(a, b):
                    raise TopologyError(f"flow {f.flow_id}: no link between {a} and {b}")
        else:
            try:
                path = nx.shortest_path(graph, f.src, f.dst)
            except nx.NetworkXNoPath:
                raise TopologyError(f"flow {f.flow_id}: no route from {f.src} to {f.dst}") from None
        if len(path) < 2:
            raise TopologyError(f"flow {f.flow_id}: source and destination coincide")
        fwd = [sim.channels[(a, b)] for a, b in zip(path, path[1:])]
        rev = [sim.channels[(b, a)] for a, b in reversed(list(zip(path, path[1:])))]
        sim.routes[f.flow_id] = tuple(path)
        jitter = send_jitter * max(f.mss * ch.sec_per_byte for ch in fwd)
        if f.cc == "multipath-subflow":
            flow = TcpFlow(sim, f.flow_id, fwd, rev, None, f.mss, jitter=jitter)
            subflows.setdefault(f.session, []).append(flow)
        else:
            flow = TcpFlow(sim, f.flow_id, fwd, rev, _make_cc(f), f.mss, jitter=jitter)
        sim.flows[f.flow_id] = flow

    if spec.sessions:
        from ..mpcc.controller import MultipathSession

        for sid, coupling in spec.sessions.items():
            members = subflows.get(sid, [])
            if not members:
                raise TopologyError(f"session {sid!r} has no subflows")
            sim.sessions[sid] = MultipathSession(sid, members, coupling)
    return sim


def run(sim: Simulation, duration: float, seed: int = 0) -> dict:
    return sim.run(duration, seed)
