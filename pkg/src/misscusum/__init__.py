"""Changepoint estimation for high-dimensional time series with missing data.

The data are a ``p x n`` matrix with a 0/1 mask of observed entries. A
mean change shared by a sparse set of coordinates is located by
projecting the MissCUSUM transform of the observed data onto a sparse
direction found by soft-thresholded power iteration.
"""

from .cusum import CusumMatrix, GammaVector, cusum, gamma_vector, miss_cusum, noiseless_peak
from .data import MaskedMatrix, ObservationCounts, build_masked, fully_observed, observation_counts
from .detect import (
    ChangepointEstimate,
    LambdaRule,
    Variant,
    estimate_sigma,
    median_argmax,
    miss_inspect,
    miss_inspect_split,
    split_columns,
)
from .errors import AllInvalid, DegeneratePenalty, MissCusumError, ZeroVector
from .io import read_csv, write_csv
from .projection import (
    ProjectionEstimate,
    SolverConfig,
    default_lambda,
    estimate_projection,
    soft_threshold,
    two_to_inf_norm,
)
from .segmentation import Changepoint, SegmentationResult, binary_segmentation
from .simulation import (
    CampaignCell,
    ModelSpec,
    oracle_direction,
    run_campaign,
    simulate,
    sine_angle,
    weighted_norm,
)

__version__ = "0.1.0"
