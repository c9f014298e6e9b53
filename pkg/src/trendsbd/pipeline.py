"""Run directories: simulate a scenario, evaluate it, aggregate reports.

Layout of a run directory::

    traces/<flow>.csv          t_ms,rtt_ms per ack
    summary.csv                flow_id,delivered_bytes,mean_rate_mbps,loss_rate
    series/rate_<flow>.csv     t_s,mbps per 100 ms bin
    series/queue_<link>.csv    t_s,max_pkts per 100 ms bin (monitored links)
    verdicts/<a>__<b>.csv      offline detector verdicts for each detect pair
    sessions/<id>_verdicts.csv online verdicts seen by a multipath session
    sessions/<id>_modes.csv    t_ms,mode transitions
    run.json                   metadata consumed by evaluate
    manifest.json              scenario hash, seed, version, output digests
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import re
import statistics
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .evaluation import (
    bin_max_occupancy,
    fairness,
    fit_sqrt_law,
    longest_segment,
    positive_intervals,
    predicted_slope,
    queue_filling_segments,
)
from .netsim.engine import build_topology
from .netsim.scenario import Scenario
from .sbd.core import FlowTrace, pick_dominant_slope
from .sbd.detector import DetectorConfig, detection_windows, flow_slopes, run_detector
from .sbd.traceio import read_trace, read_verdicts, write_trace, write_verdicts

log = logging.getLogger(__name__)

BIN_S = 0.1
SUMMARY_HEADER = ("flow_id", "delivered_bytes", "mean_rate_mbps", "loss_rate")
REPORT_HEADER = ("metric", "scenario", "value")
_SAFE_ID = re.compile(r"^[A-Za-z0-9_.\-]+$")


class RunError(RuntimeError):
    """A run directory is missing inputs or cannot be produced."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if x is None:
        return ""
    return repr(float(x))


def _write_rows(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def simulate(scenario: Scenario, out_dir, seed: Optional[int] = None) -> list[Path]:
    """Run ``scenario`` and write a run directory; returns written files."""
    if seed is not None:
        scenario = scenario.with_seed(seed)
    for f in scenario.topology.flows:
        if not _SAFE_ID.match(f.flow_id):
            raise RunError(f"flow id {f.flow_id!r} is not usable as a file name")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = build_topology(scenario.topology, scenario.send_jitter)
    stats = sim.run(scenario.duration_ms, scenario.seed)
    log.info("simulated %s: %d events", scenario.name, sim.events_processed)
    written = []

    (out / "traces").mkdir(exist_ok=True)
    for fid, st in stats.items():
        written.append(write_trace(st.rtt_trace, out / "traces" / f"{fid}.csv"))
    written.append(_write_rows(out / "summary.csv", SUMMARY_HEADER, [
        (fid, st.delivered_bytes, _num(st.mean_rate), _num(st.loss_rate)) for fid, st in stats.items()
    ]))

    n_bins = int(math.ceil(scenario.duration_ms / 1000.0 / BIN_S - 1e-9))
    for fid, st in stats.items():
        bins = list(st.bins[:n_bins]) + [0] * (n_bins - len(st.bins))
        written.append(_write_rows(out / "series" / f"rate_{fid}.csv", ("t_s", "mbps"), [
            (_num(round(i * BIN_S, 6)), _num(b * 8 / BIN_S / 1e6)) for i, b in enumerate(bins)
        ]))
    for label in scenario.topology.monitor:
        ch = sim.channel(label)
        binned = bin_max_occupancy(ch.q_t, ch.q_len, BIN_S)
        written.append(_write_rows(out / "series" / f"queue_{label}.csv", ("t_s", "max_pkts"), [
            (_num(round(b * BIN_S, 6)), q) for b, q in binned
        ]))

    for a, b in scenario.detect_pairs:
        rows = run_detector(stats[a].rtt_trace, stats[b].rtt_trace, scenario.detector)
        (out / "verdicts").mkdir(exist_ok=True)
        written.append(write_verdicts(rows, out / "verdicts" / f"{a}__{b}.csv"))

    for sid, session in sim.sessions.items():
        (out / "sessions").mkdir(exist_ok=True)
        written.append(write_verdicts(session.verdicts, out / "sessions" / f"{sid}_verdicts.csv"))
        written.append(_write_rows(out / "sessions" / f"{sid}_modes.csv", ("t_ms", "mode"),
                                   [(_num(t), m) for t, m in session.transitions]))

    meta = {
        "name": scenario.name,
        "seed": scenario.seed,
        "duration_ms": scenario.duration_ms,
        "scenario_sha256": scenario.digest,
        "version": __version__,
        "flows": {
            f.flow_id: {
                "session": f.session,
                "route": list(sim.routes[f.flow_id]),
                "prop_ms": sim.path_prop_delay(f.flow_id),
            }
            for f in scenario.topology.flows
        },
        "links": {
            l.label: {"bandwidth_mbps": l.config.bandwidth, "queue_pkts": l.config.queue_capacity}
            for l in scenario.topology.links
        },
        "detect_pairs": [list(p) for p in scenario.detect_pairs],
        "detector": scenario.detector.to_dict(),
        "sessions": sorted(sim.sessions),
        "evaluation": scenario.evaluation,
    }
    run_json = out / "run.json"
    run_json.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(run_json)
    write_manifest(out, written, scenario.digest, scenario.seed)
    return written


def write_manifest(out: Path, files: Sequence[Path], digest: str, seed) -> Path:
    outputs = {p.relative_to(out).as_posix(): _sha256(p) for p in sorted(files)}
    manifest = {
        "scenario_sha256": digest,
        "seed": seed,
        "version": __version__,
        "outputs": outputs,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _load_meta(run_dir: Path) -> dict:
    path = run_dir / "run.json"
    if not path.is_file():
        raise RunError(f"{run_dir}: no run.json (not a run directory)")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RunError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def read_rate_series(path: Path) -> list[float]:
    if not path.is_file():
        raise RunError(f"{path}: missing rate series")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [float(r[1]) for r in reader]


def mean_rate(series: Sequence[float], t0_s: float, t1_s: float) -> float:
    """Mean of the 100 ms bin rates in [t0, t1)."""
    i0 = int(round(t0_s / BIN_S))
    i1 = int(round(t1_s / BIN_S))
    chunk = list(series[i0:i1]) + [0.0] * max(0, (i1 - i0) - len(series[i0:i1]))
    return math.fsum(chunk) / len(chunk) if chunk else 0.0


def _verdict_pairs(rows) -> list:
    return [((r["window_start_ms"], r["window_end_ms"]), r["shared"]) for r in rows]


def dominant_slopes(trace: FlowTrace, config: DetectorConfig, after_ms: float = 0.0) -> list[float]:
    """Dominant positive slope of each detection window from ``after_ms`` on."""
    if len(trace) == 0:
        return []
    ests = flow_slopes(trace, config)
    out = []
    for w in detection_windows(0.0, trace.t[-1], config.window_ms):
        if w[0] < after_ms:
            continue
        best = pick_dominant_slope(ests, w)
        if best is not None:
            out.append(best.slope)
    return out


def evaluate(run_dir) -> list[tuple[str, str, str]]:
    """Compute the metrics of one run; writes report.csv and report.txt."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise RunError(f"{run_dir}: not a directory")
    meta = _load_meta(run_dir)
    name = meta["name"]
    ev = meta.get("evaluation", {})
    duration_s = meta["duration_ms"] / 1000.0
    detector = DetectorConfig.from_dict(meta.get("detector", {}))
    metrics: list[tuple[str, object]] = []

    firsts = []
    for a, b in meta.get("detect_pairs", []):
        path = run_dir / "verdicts" / f"{a}__{b}.csv"
        if not path.is_file():
            raise RunError(f"{path}: missing verdicts")
        summary = positive_intervals(_verdict_pairs(read_verdicts(path)))
        key = f"{a}__{b}"
        metrics += [
            (f"windows_evaluated:{key}", summary.evaluated),
            (f"positive_windows:{key}", summary.positives),
            (f"positive_fraction:{key}", summary.positive_fraction),
            (f"positive_intervals:{key}", len(summary.intervals)),
            (f"time_to_first_positive_s:{key}",
             None if summary.time_to_first is None else summary.time_to_first / 1000.0),
        ]
        if summary.time_to_first is not None:
            firsts.append(summary.time_to_first / 1000.0)
    for sid in meta.get("sessions", []):
        path = run_dir / "sessions" / f"{sid}_verdicts.csv"
        if not path.is_file():
            raise RunError(f"{path}: missing session verdicts")
        summary = positive_intervals(_verdict_pairs(read_verdicts(path)))
        metrics += [
            (f"session_positive_windows:{sid}", summary.positives),
            (f"session_time_to_first_positive_s:{sid}",
             None if summary.time_to_first is None else summary.time_to_first / 1000.0),
        ]
        if summary.time_to_first is not None:
            firsts.append(summary.time_to_first / 1000.0)
    metrics.append(("time_to_first_positive_s", min(firsts) if firsts else None))

    sid = ev.get("multipath_session")
    if sid is not None:
        t0, t1 = ev.get("window_s", [max(0.0, duration_s - 100.0), duration_s])
        flows = meta["flows"]
        members = sorted(f for f, m in flows.items() if m["session"] == sid)
        if not members:
            raise RunError(f"{run_dir}: session {sid!r} has no subflows")
        singles = ev.get("single_flows") or sorted(f for f, m in flows.items() if m["session"] is None)
        rate = {f: mean_rate(read_rate_series(run_dir / "series" / f"rate_{f}.csv"), t0, t1)
                for f in members + list(singles)}
        x_mp = math.fsum(rate[f] for f in members)
        rep = fairness([rate[f] for f in singles], x_mp)
        metrics += [
            ("x_mp_mbps", rep.x_mp),
            ("x_sp_mean_mbps", rep.x_sp_mean),
            ("n_single_flows", rep.n_single_flows),
            ("jain", rep.j),
            ("throughput_ratio", rep.ratio if rep.x_sp_mean > 0 else None),
        ]

    sq = ev.get("sqrt_law")
    if sq is not None:
        link, flow = sq["link"], sq["flow"]
        qpath = run_dir / "series" / f"queue_{link}.csv"
        if not qpath.is_file():
            raise RunError(f"{qpath}: link {link!r} was not monitored")
        with qpath.open(newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            binned = [(int(round(float(t) / BIN_S)), int(q)) for t, q in reader]
        seg = longest_segment(queue_filling_segments(binned, BIN_S))
        if seg is None:
            metrics.append(("sqrt_law_r_squared", None))
        else:
            trace = read_trace(run_dir / "traces" / f"{flow}.csv").between(seg[0] * 1000, seg[1] * 1000)
            cap = meta["links"][link]["bandwidth_mbps"] * 1e6 / (8 * 1500)
            fit = fit_sqrt_law([t / 1000 for t in trace.t], [r / 1000 for r in trace.rtt],
                               n=sq.get("n"), capacity_pps=cap)
            metrics += [
                ("sqrt_law_segment_start_s", seg[0]),
                ("sqrt_law_segment_end_s", seg[1]),
                ("sqrt_law_r_squared", fit.r_squared),
                ("sqrt_law_two_n_over_c", fit.params["two_n_over_c"]),
                ("sqrt_law_implied_n", fit.params["implied_n"]),
            ]

    sl = ev.get("slope_law")
    if sl is not None:
        pred = predicted_slope(sl["n"], meta["links"][sl["link"]]["bandwidth_mbps"])
        slopes = []
        for flow in sl["flows"]:
            trace = read_trace(run_dir / "traces" / f"{flow}.csv")
            slopes += dominant_slopes(trace, detector, sl.get("after_s", 20.0) * 1000.0)
        med = statistics.median(slopes) if slopes else None
        metrics += [
            ("slope_predicted_ms_per_s", pred),
            ("slope_measured_median_ms_per_s", med),
            ("slope_windows", len(slopes)),
            ("slope_rel_error", None if med is None else abs(med - pred) / pred),
        ]

    rows = [(m, name, _num(v) if not isinstance(v, str) else v) for m, v in metrics]
    _write_rows(run_dir / "report.csv", REPORT_HEADER, rows)
    width = max((len(m) for m, _, _ in rows), default=0)
    (run_dir / "report.txt").write_text(
        f"{name}\n" + "".join(f"  {m.ljust(width)}  {v or '-'}\n" for m, _, v in rows)
    )
    return rows


def read_report(run_dir) -> dict:
    path = Path(run_dir) / "report.csv"
    if not path.is_file():
        raise RunError(f"{path}: missing; run evaluate first")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_HEADER:
            raise RunError(f"{path}:1: unexpected report header")
        rows = list(reader)
    return {"scenario": rows[0]["scenario"] if rows else Path(run_dir).name,
            **{r["metric"]: r["value"] for r in rows}}


REPORT_COLUMNS = ("scenario", "jain", "throughput_ratio", "time_to_first_positive_s")


def report(run_dirs: Sequence) -> list[tuple[str, ...]]:
    """One row per run: scenario, J, R, time to first positive."""
    if not run_dirs:
        raise RunError("report needs at least one run directory")
    table = []
    for d in run_dirs:
        rec = read_report(d)
        table.append(tuple(rec.get(c, "") for c in REPORT_COLUMNS))
    return table
