from .episodes import DetectionSummary, bin_max_occupancy, longest_segment, positive_intervals, queue_filling_segments
from .metrics import (
    FairnessReport,
    FitReport,
    equilibrium_throughput,
    fairness,
    fit_sqrt_law,
    jain_index,
    predicted_slope,
    reno_throughput,
    sqrt_law_rtt,
    throughput_ratio,
)
