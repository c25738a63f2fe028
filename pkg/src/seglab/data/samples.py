"""Core sample containers shared by the ingest pipeline."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DataFormatError, ShapeError

VALID_SPLITS = ("train", "val", "test")


def validate_binary_mask(mask: np.ndarray, context: str = "mask") -> None:
    """Raise unless every element of `mask` is 0 or 1."""
    if mask.ndim != 2:
        raise ShapeError(f"{context} must be 2-D, got shape {mask.shape}")
    bad = (mask != 0) & (mask != 1)
    if bad.any():
        values = np.unique(mask[bad])[:5]
        raise DataFormatError(f"{context} must be binary; found values {values.tolist()}")


@dataclass
class ImageSample:
    """One training sample: an intensity grid plus its binary mask.

    image is H×W (single channel) or H×W×C with values in [0,1];
    mask is H×W with values in {0,1}. `tile` is the (row, col) position
    when the sample was cut from a larger slide, None for whole images.
    """

    image: np.ndarray
    mask: np.ndarray
    source_id: str
    tile: Optional[tuple] = None
    split: Optional[str] = None

    def __post_init__(self):
        if self.image.ndim not in (2, 3):
            raise ShapeError(f"image must be 2-D or 3-D, got shape {self.image.shape}")
        if self.image.shape[:2] != self.mask.shape:
            raise ShapeError(
                f"image spatial dims {self.image.shape[:2]} != mask dims {self.mask.shape}"
            )
        validate_binary_mask(self.mask)
        if self.split is not None and self.split not in VALID_SPLITS:
            raise DataFormatError(f"unknown split {self.split!r}; expected one of {VALID_SPLITS}")

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.image.ndim == 2 else self.image.shape[2]

    @property
    def origin(self) -> tuple:
        if self.tile is None:
            return (self.source_id, "whole")
        return (self.source_id, self.tile[0], self.tile[1])

    @property
    def sample_id(self) -> str:
        if self.tile is None:
            return f"{self.source_id}_whole"
        return f"{self.source_id}_r{self.tile[0]}_c{self.tile[1]}"


@dataclass
class RawSlide:
    """A raw multi-channel slide before channel extraction.

    channels holds 2-D intensity grids; the histopathology format carries
    8 stain channels with DAPI first.
    """

    channels: list = field(default_factory=list)
    source_id: str = ""

    def __post_init__(self):
        if not self.channels:
            raise DataFormatError("slide has no channels")
        if len(self.channels) not in (1, 3, 8):
            raise DataFormatError(
                f"slide channel count must be 1, 3 or 8, got {len(self.channels)}"
            )
        shape = self.channels[0].shape
        for i, ch in enumerate(self.channels):
            if ch.ndim != 2:
                raise ShapeError(f"channel {i} must be 2-D, got shape {ch.shape}")
            if ch.shape != shape:
                raise ShapeError(f"channel {i} shape {ch.shape} != channel 0 shape {shape}")

    @property
    def height(self) -> int:
        return self.channels[0].shape[0]

    @property
    def width(self) -> int:
        return self.channels[0].shape[1]
