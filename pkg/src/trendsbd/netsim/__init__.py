from .config import (
    ACK_SIZE,
    MTU,
    CouplingConfig,
    FlowSpec,
    LinkConfig,
    LinkSpec,
    RedParams,
    TopologyError,
    TopologySpec,
    line_topology,
    queue_packets_from_delay,
)
from .engine import Channel, FlowStats, Simulation, build_topology, run
from .queues import DropTail, PacketQueue, Red, droptail_enqueue, red_drop_probability, red_enqueue
from .tcp import (
    CONGESTION_AVOIDANCE,
    SLOW_START,
    CongestionState,
    Cubic,
    Reno,
    cubic_k,
    cubic_window,
    on_timeout,
    reno_on_ack,
    reno_on_loss,
)
