"""Simulated quantum-correlation polarimetric scanner.

Photon pairs are generated with thermal statistics, routed through Jones-calculus
optics and a detector model, time-tagged, and correlated to give coincidence rates
and g2(0) at each analyzer angle or scan pixel.
"""

from .analysis import (
    DipFit,
    FitError,
    SinusoidFit,
    UndefinedSNRError,
    fit_gaussian_dip,
    fit_sinusoid,
    max_sensitivity,
    metrics_table,
    normalized_contrast,
    snr,
)
from .correlator import (
    CorrelationResult,
    G2Histogram,
    UndefinedResultError,
    correlate,
    count_coincidences,
    g2_histogram,
    g2_zero,
)
from .optics import H, V, JonesMatrix, PolarizationState, SpiralRetarderSample, waveplate_matrix
from .scan import ScanGrid, ScanImage, SweepTable, expected_rates, line_profile, run_point, scan_image, sweep_analyzer
from .scenario import DetectorModel, Scenario, SourceModel
from .source import StreamOrderError, TimeTagStream, detect, generate_raw_pairs, synthesize_channels

__version__ = "0.1.0"

__all__ = [
    "CorrelationResult", "DetectorModel", "DipFit", "FitError", "G2Histogram", "H", "JonesMatrix",
    "PolarizationState", "ScanGrid", "ScanImage", "Scenario", "SinusoidFit", "SourceModel",
    "SpiralRetarderSample", "StreamOrderError", "SweepTable", "TimeTagStream", "UndefinedResultError",
    "UndefinedSNRError", "V", "correlate", "count_coincidences", "detect", "expected_rates",
    "fit_gaussian_dip", "fit_sinusoid", "g2_histogram", "g2_zero", "generate_raw_pairs", "line_profile",
    "max_sensitivity", "metrics_table", "normalized_contrast", "run_point", "scan_image", "snr",
    "sweep_analyzer", "synthesize_channels", "waveplate_matrix",
]
