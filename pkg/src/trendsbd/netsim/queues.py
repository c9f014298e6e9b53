"""Queue admission disciplines.

The simulator's links call ``admit(qlen, now)`` on an AQM object before
accepting a packet; ``droptail_enqueue``/``red_enqueue`` wrap the same
decisions around an explicit packet queue.
"""

from __future__ import annotations

import random
from collections import deque

from .config import RedParams


class DropTail:
    __slots__ = ("capacity",)

    def __init__(self, capacity: int):
        self.capacity = capacity

    def admit(self, qlen: int, now: float) -> bool:
        return qlen < self.capacity


def red_drop_probability(avg: float, red: RedParams) -> float:
    if avg < red.min_th:
        return 0.0
    if avg >= red.max_th:
        return 1.0
    return red.max_p * (avg - red.min_th) / (red.max_th - red.min_th)


class Red:
    """Random early detection on an EWMA of the instantaneous queue.

    While the queue sits empty the average decays as if ``idle/tx_time``
    zero-length samples had arrived.
    """

    __slots__ = ("params", "rng", "avg", "tx_time", "idle_since", "_keep")

    def __init__(self, params: RedParams, rng: random.Random, tx_time: float = 0.0):
        self.params = params
        self.rng = rng
        self.avg = 0.0
        self.tx_time = tx_time
        self.idle_since = None
        self._keep = 1.0 - params.weight

    def update_average(self, qlen: int, now: float) -> float:
        w = self.params.weight
        if qlen == 0 and self.idle_since is not None and self.tx_time > 0:
            m = (now - self.idle_since) / self.tx_time
            self.avg *= self._keep ** m
        self.avg = (1 - w) * self.avg + w * qlen
        return self.avg

    def decide(self) -> bool:
        """Admission for the current average; consumes at most one draw."""
        p = red_drop_probability(self.avg, self.params)
        if p <= 0.0:
            return True
        if p >= 1.0:
            return False
        return self.rng.random() >= p

    def admit(self, qlen: int, now: float) -> bool:
        self.update_average(qlen, now)
        if qlen >= self.params.queue_limit:
            return False
        return self.decide()

    def mark_idle(self, now: float):
        self.idle_since = now


class PacketQueue:
    """A plain FIFO with a discipline attached."""

    def __init__(self, capacity: int, aqm=None):
        self.capacity = capacity
        self.aqm = aqm if aqm is not None else DropTail(capacity)
        self.items = deque()
        self.dropped = 0

    def __len__(self):
        return len(self.items)

    def pop(self):
        return self.items.popleft()


def droptail_enqueue(queue: PacketQueue, pkt) -> bool:
    """Accept unless the queue already holds ``capacity`` packets."""
    if len(queue.items) >= queue.capacity:
        queue.dropped += 1
        return False
    queue.items.append(pkt)
    return True


def red_enqueue(queue: PacketQueue, pkt, red: RedParams, rng: random.Random, now: float = 0.0) -> bool:
    """RED admission on ``queue``; its ``aqm`` holds the running average."""
    if not isinstance(queue.aqm, Red):
        queue.aqm = Red(red, rng)
    if queue.aqm.admit(len(queue.items), now):
        queue.items.append(pkt)
        return True
    queue.dropped += 1
    return False
