"""Driving-style classification from trajectory kinematics.

The package extracts a three-tier kinematic feature vector from speed,
acceleration and jerk traces, renders the features into a natural-language
driving description (remote LLM or deterministic offline fallback), embeds
the text into a fixed 768-dimensional vector, and classifies the pair with
a dual-channel network trained by hand-written backpropagation.
"""

from .errors import (
    ConfigError,
    DataError,
    DriveStyleError,
    NumericError,
    ServiceError,
)
from .features import (
    DEFAULT_SIGNALS,
    FeatureExtractor,
    FeatureNormalizer,
    FeatureVector,
    NormStats,
    extract_features,
    feature_dimension,
    feature_names,
)
from .ingest import (
    CleanConfig,
    StyleLabel,
    TrajectorySegment,
    clean_segments,
    parse_segment,
    write_segment,
)

__version__ = "0.1.0"

__all__ = [
    "CleanConfig",
    "ConfigError",
    "DEFAULT_SIGNALS",
    "DataError",
    "DriveStyleError",
    "FeatureExtractor",
    "FeatureNormalizer",
    "FeatureVector",
    "NormStats",
    "NumericError",
    "ServiceError",
    "StyleLabel",
    "TrajectorySegment",
    "clean_segments",
    "extract_features",
    "feature_dimension",
    "feature_names",
    "parse_segment",
    "write_segment",
    "__version__",
]
