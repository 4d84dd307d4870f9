"""Finite-data Bell identities, matched versus unmatched acquisition, and
consistency checks for hypothesised correlation functions."""

__version__ = "0.1.0"

from .corrcore import (
    BinaryStream,
    CorrelationEstimate,
    FeasibleInterval,
    IdentityReport,
    MatchedStreamSet,
    bell_identity_four,
    bell_identity_three,
    check_inequality_four,
    check_inequality_three,
    correlate,
    fourth_correlation_bounds,
    third_correlation_bounds,
)
from .models import (
    CorrelationFunction,
    LhvModel,
    SingletSource,
    TelegraphProcess,
    bell_linear_model,
    nonlocal_toy_model,
)

__all__ = [
    "BinaryStream",
    "CorrelationEstimate",
    "CorrelationFunction",
    "FeasibleInterval",
    "IdentityReport",
    "LhvModel",
    "MatchedStreamSet",
    "SingletSource",
    "TelegraphProcess",
    "bell_identity_four",
    "bell_identity_three",
    "bell_linear_model",
    "check_inequality_four",
    "check_inequality_three",
    "correlate",
    "fourth_correlation_bounds",
    "nonlocal_toy_model",
    "third_correlation_bounds",
]
