from .core import (
    FlowTrace,
    Group,
    MergedGroup,
    RttSample,
    SbdVerdict,
    SlopeEstimate,
    SmoothingState,
    TraceError,
    decide,
    extract_groups,
    extract_trace_groups,
    merge_groups,
    pick_dominant_slope,
    regress_slope,
    smooth,
    smooth_series,
    smooth_trace,
)
from .detector import (
    ConfigError,
    DetectorConfig,
    detection_windows,
    flow_slopes,
    latest_verdict,
    run_detector,
)
from .traceio import format_verdicts, read_trace, read_verdicts, write_trace, write_verdicts
