"""JSON scenario files.

A scenario names nodes, links, flows (optionally expanded with ``count``),
multipath sessions, run length, seed, detector settings, and evaluation
hints. Every diagnostic carries the path of the offending key, such as
``links[2].bandwidth_mbps``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..sbd.detector import ConfigError, DetectorConfig
from .config import (
    CC_TAGS,
    CouplingConfig,
    FlowSpec,
    LinkConfig,
    LinkSpec,
    RedParams,
    TopologyError,
    TopologySpec,
    queue_packets_from_delay,
)

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """A scenario file that does not parse or validate."""


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: TopologySpec
    duration_ms: float
    seed: int
    detector: DetectorConfig = DetectorConfig()
    detect_pairs: tuple[tuple[str, str], ...] = ()
    send_jitter: float = 1.0
    evaluation: dict = field(default_factory=dict)
    digest: str = ""  # sha256 of the source text

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario(self.name, self.topology, self.duration_ms, seed, self.detector,
                        self.detect_pairs, self.send_jitter, self.evaluation, self.digest)


_TOP_KEYS = {
    "schema_version", "name", "nodes", "links", "flows", "sessions", "duration_ms", "seed",
    "detector", "detect_pairs", "monitor", "send_jitter", "evaluation",
}
_LINK_KEYS = {"name", "a", "b", "bandwidth_mbps", "delay_ms", "queue", "aqm", "red"}
_RED_KEYS = {"min_th", "max_th", "queue_limit", "min_th_ms", "max_th_ms", "limit_ms", "max_p", "weight"}
_FLOW_KEYS = {"id", "src", "dst", "cc", "start_ms", "mss", "path", "session", "count"}
_SESSION_KEYS = {"coupling"}
_COUPLING_KEYS = {"fallback_s", "epsilon", "tau_ms", "window_ms", "policy"}
_EVAL_KEYS = {"multipath_session", "single_flows", "window_s", "sqrt_law", "slope_law", "kind"}


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    for k in obj:
        if k not in allowed:
            raise ScenarioError(f"{where}.{k}: unknown key" if where else f"{k}: unknown key")
    for k in required:
        if k not in obj:
            raise ScenarioError(f"{where}.{k}: missing" if where else f"{k}: missing")


def _num(obj, key, where, default=None, positive=False, nonneg=False):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{where}.{key}: missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ScenarioError(f"{where}.{key}: must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ScenarioError(f"{where}.{key}: must be non-negative, got {v!r}")
    return v


def _str(obj, key, where, default=None):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{where}.{key}: missing")
        return default
    v = obj[key]
    if not isinstance(v, str) or not v:
        raise ScenarioError(f"{where}.{key}: expected a non-empty string, got {v!r}")
    return v


def _red(obj, bw, where) -> RedParams:
    _check_keys(obj, _RED_KEYS, where)
    extra = {}
    if "max_p" in obj:
        extra["max_p"] = _num(obj, "max_p", where, positive=True)
    if "weight" in obj:
        extra["weight"] = _num(obj, "weight", where, positive=True)
    if "min_th_ms" in obj:
        args = [_num(obj, k, where, positive=True) for k in ("min_th_ms", "max_th_ms", "limit_ms")]
        return RedParams.from_ms(bw, *args, **extra)
    return RedParams(_num(obj, "min_th", where, positive=True), _num(obj, "max_th", where, positive=True),
                     int(_num(obj, "queue_limit", where, positive=True)), **extra)


def _link(obj, i) -> LinkSpec:
    where = f"links[{i}]"
    _check_keys(obj, _LINK_KEYS, where, ("a", "b", "bandwidth_mbps", "delay_ms", "queue"))
    bw = _num(obj, "bandwidth_mbps", where, positive=True)
    delay = _num(obj, "delay_ms", where, nonneg=True)
    q = obj["queue"]
    qw = f"{where}.queue"
    _check_keys(q, {"pkts", "delay_ms"}, qw)
    if len(q) != 1:
        raise ScenarioError(f"{qw}: give exactly one of pkts, delay_ms")
    if "pkts" in q:
        pkts = _num(q, "pkts", qw, positive=True)
        if int(pkts) != pkts:
            raise ScenarioError(f"{qw}.pkts: must be an integer, got {pkts!r}")
        pkts = int(pkts)
    else:
        pkts = queue_packets_from_delay(bw, _num(q, "delay_ms", qw, positive=True))
    aqm = _str(obj, "aqm", where, "droptail")
    red = None
    if aqm == "red":
        if "red" not in obj:
            raise ScenarioError(f"{where}.red: missing (aqm is red)")
        try:
            red = _red(obj["red"], bw, f"{where}.red")
        except TopologyError as exc:
            raise ScenarioError(f"{where}.red: {exc}") from None
    elif "red" in obj:
        raise ScenarioError(f"{where}.red: only valid with aqm red")
    try:
        cfg = LinkConfig(bw, delay, pkts, aqm, red)
    except TopologyError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    return LinkSpec(_str(obj, "a", where), _str(obj, "b", where), cfg, obj.get("name"))


def _flows(obj, i) -> list[FlowSpec]:
    where = f"flows[{i}]"
    _check_keys(obj, _FLOW_KEYS, where, ("id", "src", "dst"))
    fid = _str(obj, "id", where)
    cc = _str(obj, "cc", where, "reno")
    if cc not in CC_TAGS:
        raise ScenarioError(f"{where}.cc: unknown congestion control {cc!r}")
    start = _num(obj, "start_ms", where, nonneg=True) if "start_ms" in obj else None
    mss = int(_num(obj, "mss", where, 1500, positive=True))
    path = obj.get("path")
    if path is not None and (not isinstance(path, list) or not all(isinstance(p, str) for p in path)):
        raise ScenarioError(f"{where}.path: expected a list of node ids")
    count = _num(obj, "count", where, 1, positive=True)
    if int(count) != count:
        raise ScenarioError(f"{where}.count: must be an integer")
    ids = [fid] if "count" not in obj else [f"{fid}{k}" for k in range(int(count))]
    try:
        return [
            FlowSpec(x, _str(obj, "src", where), _str(obj, "dst", where), cc, start, mss,
                     tuple(path) if path else None, obj.get("session"))
            for x in ids
        ]
    except TopologyError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _coupling(obj, where) -> CouplingConfig:
    _check_keys(obj, _COUPLING_KEYS, where)
    kw = {k: _num(obj, k, where) for k in ("fallback_s", "epsilon", "tau_ms", "window_ms") if k in obj}
    if "policy" in obj:
        kw["policy"] = _str(obj, "policy", where)
    try:
        return CouplingConfig(**kw)
    except TopologyError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def parse_scenario(data: Any, source_digest: str = "") -> Scenario:
    _check_keys(data, _TOP_KEYS, "", ("schema_version", "nodes", "links", "duration_ms"))
    version = data["schema_version"]
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported version {version!r} (expected {SCHEMA_VERSION})")
    nodes = data["nodes"]
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise ScenarioError("nodes: expected a list of node ids")
    if not isinstance(data["links"], list):
        raise ScenarioError("links: expected a list")
    links = [_link(l, i) for i, l in enumerate(data["links"])]
    flows = []
    for i, f in enumerate(data.get("flows", [])):
        flows += _flows(f, i)
    sessions = {}
    raw_sessions = data.get("sessions", {})
    if not isinstance(raw_sessions, dict):
        raise ScenarioError("sessions: expected an object")
    for sid, s in raw_sessions.items():
        _check_keys(s, _SESSION_KEYS, f"sessions.{sid}")
        sessions[sid] = _coupling(s.get("coupling", {}), f"sessions.{sid}.coupling")
    monitor = data.get("monitor", [])
    if not isinstance(monitor, list):
        raise ScenarioError("monitor: expected a list of link names")
    try:
        topo = TopologySpec(tuple(nodes), tuple(links), tuple(flows), sessions, tuple(monitor))
    except TopologyError as exc:
        raise ScenarioError(str(exc)) from None
    duration = _num(data, "duration_ms", "", positive=True)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError(f"seed: expected a non-negative integer, got {seed!r}")
    try:
        detector = DetectorConfig.from_dict(data.get("detector", {}))
    except ConfigError as exc:
        raise ScenarioError(f"detector: {exc}") from None
    ids = {f.flow_id for f in flows}
    pairs = []
    for i, p in enumerate(data.get("detect_pairs", [])):
        if not (isinstance(p, list) and len(p) == 2):
            raise ScenarioError(f"detect_pairs[{i}]: expected [flow_a, flow_b]")
        for x in p:
            if x not in ids:
                raise ScenarioError(f"detect_pairs[{i}]: unknown flow {x!r}")
        pairs.append((p[0], p[1]))
    jitter = _num(data, "send_jitter", "", 1.0, nonneg=True) if "send_jitter" in data else 1.0
    evaluation = data.get("evaluation", {})
    _check_keys(evaluation, _EVAL_KEYS, "evaluation")
    return Scenario(str(data.get("name", "scenario")), topo, duration, seed, detector,
                    tuple(pairs), float(jitter), evaluation, source_digest)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_scenario(data, hashlib.sha256(text.encode()).hexdigest())
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
