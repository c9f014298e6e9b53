"""CSV trace files (``t_ms,rtt_ms``) and verdict tables."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable

from .core import FlowTrace, SbdVerdict, TraceError

TRACE_HEADER = ("t_ms", "rtt_ms")
VERDICT_HEADER = ("window_start_ms", "window_end_ms", "shared", "error", "slope_a", "slope_b")


def write_trace(trace: FlowTrace, path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for t, r in zip(trace.t, trace.rtt):
        buf.write(f"{t!r},{r!r}\n")
    path.write_text(buf.getvalue())
    return path


def read_trace(path, flow_id=None) -> FlowTrace:
    path = Path(path)
    if flow_id is None:
        flow_id = path.stem
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceError(f"{path}: {exc.strerror or exc}") from exc
    lines = text.splitlines()
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != TRACE_HEADER:
        raise TraceError(f"{path}:1: expected header 't_ms,rtt_ms'")
    t, rtt = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
        try:
            t.append(float(parts[0]))
            rtt.append(float(parts[1]))
        except ValueError as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from exc
    try:
        return FlowTrace(flow_id, t, rtt)
    except TraceError as exc:
        raise TraceError(f"{path}: {exc}") from exc


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def format_verdicts(rows: Iterable[tuple[tuple[float, float], SbdVerdict]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VERDICT_HEADER)
    for (w0, w1), v in rows:
        w.writerow(
            [_fmt(w0), _fmt(w1), "true" if v.shared else "false",
             _fmt(v.error), _fmt(v.slope_a.slope), _fmt(v.slope_b.slope)]
        )
    return buf.getvalue()


def write_verdicts(rows: Iterable[tuple[tuple[float, float], SbdVerdict]], path) -> Path:
    path = Path(path)
    path.write_text(format_verdicts(rows))
    return path


def read_verdicts(path) -> list[dict]:
    """Verdict rows as dicts with typed values."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != VERDICT_HEADER:
            raise TraceError(f"{path}:1: unexpected verdict header")
        rows = []
        for rec in reader:
            rows.append(
                {
                    "window_start_ms": float(rec["window_start_ms"]),
                    "window_end_ms": float(rec["window_end_ms"]),
                    "shared": rec["shared"] == "true",
                    "error": float(rec["error"]) if rec["error"] else None,
                    "slope_a": float(rec["slope_a"]),
                    "slope_b": float(rec["slope_b"]),
                }
            )
    return rows
