"""Topology, link, and flow descriptions for the simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

MTU = 1500  # bytes; also the default MSS
ACK_SIZE = 40  # bytes


class TopologyError(ValueError):
    """Raised when a topology cannot be built."""


def queue_packets_from_delay(bandwidth_mbps: float, delay_ms: float, mtu: int = MTU) -> int:
    """Packets that drain in ``delay_ms`` at ``bandwidth_mbps``, at least 1."""
    bytes_ = bandwidth_mbps * 1e6 / 8 * delay_ms / 1000
    return max(1, math.floor(bytes_ / mtu + 1e-9))


@dataclass(frozen=True)
class RedParams:
    """RED thresholds in packets.

    ``weight`` is the EWMA gain applied to the instantaneous queue.
    """

    min_th: float
    max_th: float
    queue_limit: int
    max_p: float = 0.1
    weight: float = 0.002

    def __post_init__(self):
        if not 0 < self.min_th < self.max_th <= self.queue_limit:
            raise TopologyError(
                f"RED thresholds need 0 < min_th < max_th <= queue_limit, got "
                f"{self.min_th}, {self.max_th}, {self.queue_limit}"
            )
        if not 0 < self.max_p <= 1:
            raise TopologyError(f"RED max_p must lie in (0, 1], got {self.max_p}")
        if not 0 < self.weight <= 1:
            raise TopologyError(f"RED weight must lie in (0, 1], got {self.weight}")

    @classmethod
    def from_ms(cls, bandwidth_mbps, min_th_ms, max_th_ms, limit_ms, **kw) -> "RedParams":
        return cls(
            queue_packets_from_delay(bandwidth_mbps, min_th_ms),
            queue_packets_from_delay(bandwidth_mbps, max_th_ms),
            queue_packets_from_delay(bandwidth_mbps, limit_ms),
            **kw,
        )


@dataclass(frozen=True)
class LinkConfig:
    bandwidth: float  # Mbps
    prop_delay: float  # one-way, ms
    queue_capacity: int  # packets
    aqm: str = "droptail"
    red: Optional[RedParams] = None

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise TopologyError(f"bandwidth must be positive, got {self.bandwidth!r}")
        if self.prop_delay < 0:
            raise TopologyError(f"prop_delay must be non-negative, got {self.prop_delay!r}")
        if int(self.queue_capacity) != self.queue_capacity or self.queue_capacity < 1:
            raise TopologyError(f"queue_capacity must be a positive integer, got {self.queue_capacity!r}")
        if self.aqm not in ("droptail", "red"):
            raise TopologyError(f"aqm must be 'droptail' or 'red', got {self.aqm!r}")
        if self.aqm == "red" and self.red is None:
            raise TopologyError("aqm 'red' needs RED parameters")

    @classmethod
    def from_delay_queue(cls, bandwidth, prop_delay, queue_delay_ms, **kw) -> "LinkConfig":
        return cls(bandwidth, prop_delay, queue_packets_from_delay(bandwidth, queue_delay_ms), **kw)


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    config: LinkConfig
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or f"{self.a}-{self.b}"


CC_TAGS = ("reno", "cubic", "multipath-subflow")


@dataclass(frozen=True)
class FlowSpec:
    flow_id: str
    src: str
    dst: str
    cc: str = "reno"
    start_time: Optional[float] = None  # ms; None draws from [0, 1 s)
    mss: int = MTU
    path: Optional[tuple[str, ...]] = None  # explicit node path, else shortest path
    session: Optional[str] = None  # multipath session for subflows

    def __post_init__(self):
        if self.cc not in CC_TAGS:
            raise TopologyError(f"flow {self.flow_id}: unknown cc {self.cc!r}")
        if self.start_time is not None and self.start_time < 0:
            raise TopologyError(f"flow {self.flow_id}: start_time must be >= 0")
        if self.cc == "multipath-subflow" and self.session is None:
            raise TopologyError(f"flow {self.flow_id}: multipath subflow needs a session")
        if self.path is not None:
            object.__setattr__(self, "path", tuple(self.path))
            if self.path[0] != self.src or self.path[-1] != self.dst:
                raise TopologyError(f"flow {self.flow_id}: path must run from src to dst")


@dataclass(frozen=True)
class CouplingConfig:
    fallback_s: float = 100.0
    epsilon: float = 0.2
    tau_ms: float = 1000.0
    window_ms: float = 5000.0
    # "sbd" follows detector verdicts; "coupled"/"uncoupled" pin the mode
    policy: str = "sbd"

    def __post_init__(self):
        if self.policy not in ("sbd", "coupled", "uncoupled"):
            raise TopologyError(f"coupling policy must be sbd|coupled|uncoupled, got {self.policy!r}")
        if not self.window_ms > 0 or self.fallback_s < 0:
            raise TopologyError("coupling window_ms must be positive and fallback_s non-negative")


@dataclass(frozen=True)
class TopologySpec:
    nodes: tuple[str, ...]
    links: tuple[LinkSpec, ...]
    flows: tuple[FlowSpec, ...] = ()
    sessions: dict = field(default_factory=dict)  # session id -> CouplingConfig
    monitor: tuple[str, ...] = ()  # link labels whose forward queue is recorded

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "monitor", tuple(self.monitor))
        ids = [f.flow_id for f in self.flows]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})[0]
            raise TopologyError(f"duplicate flow id {dup!r}")
        nodes = set(self.nodes)
        for link in self.links:
            for n in (link.a, link.b):
                if n not in nodes:
                    raise TopologyError(f"link {link.label}: unknown node {n!r}")
        for f in self.flows:
            for n in (f.src, f.dst):
                if n not in nodes:
                    raise TopologyError(f"flow {f.flow_id}: unknown node {n!r}")
            if f.session is not None and f.session not in self.sessions:
                raise TopologyError(f"flow {f.flow_id}: unknown session {f.session!r}")
        labels = [l.label for l in self.links]
        for m in self.monitor:
            if m not in labels:
                raise TopologyError(f"monitor: unknown link {m!r}")


def line_topology(
    hops: Sequence[LinkConfig], n_flows: int, cc: str = "reno", start_times=None
) -> TopologySpec:
    """Chain n0 - n1 - ... with every flow running end to end."""
    nodes = tuple(f"n{i}" for i in range(len(hops) + 1))
    links = tuple(LinkSpec(nodes[i], nodes[i + 1], c, name=f"L{i}") for i, c in enumerate(hops))
    flows = tuple(
        FlowSpec(f"f{i}", nodes[0], nodes[-1], cc,
                 None if start_times is None else start_times[i])
        for i in range(n_flows)
    )
    return TopologySpec(nodes, links, flows)
