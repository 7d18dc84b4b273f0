"""rdlab: a regression-discontinuity visual-inference laboratory.

Calibrate data generating processes from microdata, simulate RD datasets
with known discontinuities, render binned scatter plots under controlled
graphical parameters, run econometric discontinuity tests, administer
classification experiments, and evaluate visual versus econometric
inference through power functions and decision-theoretic risks.
"""

from . import binning, dgp, econometrics, evaluation, montecarlo, plotting, synthetic
from .dgp import Dataset, Dgp, Microdata, calibrate_dgp, sample_dataset
from .errors import (
    BandwidthError,
    CalibrationError,
    DomainError,
    FitError,
    InsufficientData,
    RdlabError,
    SessionStateError,
    StudyFull,
)
from .plotting import GraphicalParams, RenderedGraph, render_lineup, render_rd_plot
from .rng import derive_seed, rng_from

__version__ = "0.1.0"

__all__ = [
    "BandwidthError",
    "CalibrationError",
    "Dataset",
    "Dgp",
    "DomainError",
    "FitError",
    "GraphicalParams",
    "InsufficientData",
    "Microdata",
    "RdlabError",
    "RenderedGraph",
    "SessionStateError",
    "StudyFull",
    "binning",
    "calibrate_dgp",
    "derive_seed",
    "dgp",
    "econometrics",
    "evaluation",
    "montecarlo",
    "plotting",
    "render_lineup",
    "render_rd_plot",
    "rng_from",
    "sample_dataset",
    "synthetic",
]
