"""Changepoint detection with valid p-values after selection.

Two detectors (binary segmentation, l0 segmentation) and, for each, the
set of perturbations of the data that leave the detection unchanged.  The
test statistic is Gaussian truncated to that set.
"""

from .binseg import binseg, cusum
from .core import (
    ChangepointError,
    ChangepointFit,
    Contrast,
    DegenerateBoundaryError,
    IntervalUnion,
    InvariantError,
    PerturbationPath,
    SegmentationExhausted,
    TimeSeries,
    make_raw_contrast,
    make_spanning_contrast,
    make_window_contrast,
    perturbation_path,
)
from .infer_bs import bs_phi_interval, bs_polyhedron, bs_S
from .infer_l0 import l0_C_const, l0_cost_sets, l0_S
from .l0 import l0_lambda_for_k, l0_segment
from .pvalue import TestResult, estimate_sigma, naive_p, selective_p
from .pwq import BivariatePW, PiecewiseQuadratic, pw_min, pw_sublevel

__version__ = "0.1.0"

__all__ = [
    "binseg",
    "BivariatePW",
    "bs_phi_interval",
    "bs_polyhedron",
    "bs_S",
    "ChangepointError",
    "ChangepointFit",
    "Contrast",
    "cusum",
    "DegenerateBoundaryError",
    "estimate_sigma",
    "IntervalUnion",
    "InvariantError",
    "l0_C_const",
    "l0_cost_sets",
    "l0_lambda_for_k",
    "l0_S",
    "l0_segment",
    "make_raw_contrast",
    "make_spanning_contrast",
    "make_window_contrast",
    "naive_p",
    "perturbation_path",
    "PerturbationPath",
    "PiecewiseQuadratic",
    "pw_min",
    "pw_sublevel",
    "SegmentationExhausted",
    "selective_p",
    "TestResult",
    "TimeSeries",
]
