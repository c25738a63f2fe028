"""seglab: binary segmentation experiments with class-weighted losses.

Core pieces: dataset ingest (whole-slide tiling, lesion resizing, synthetic
blobs), class-weight schemes for the cross-entropy loss, U-Net / U-Net++
segmenters with squeeze-and-excitation decoders, an autoencoder that
regularizes predicted masks during training, a multi-seed training engine
with cosine learning-rate annealing, and confidence-interval reporting.

The package is wrapped by a small HTTP service (``seglab.service``) and a
thin-client CLI (``seglab.cli``).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataFormatError,
    SegLabError,
    ShapeError,
    TrainingDiverged,
    WeightLoadError,
)

__all__ = [
    "__version__",
    "SegLabError",
    "ConfigError",
    "DataFormatError",
    "ShapeError",
    "TrainingDiverged",
    "WeightLoadError",
]
