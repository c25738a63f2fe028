"""Loading multi-channel slide TIFFs and extracting the segmentation channel."""

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataFormatError
from .samples import RawSlide

DAPI_CHANNELS = 8


def normalize_intensity(arr: np.ndarray) -> np.ndarray:
    """Map an integer intensity grid to float32 in [0,1] by its dtype maximum."""
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    if arr.dtype == np.uint16:
        return arr.astype(np.float32) / 65535.0
    if np.issubdtype(arr.dtype, np.floating):
        out = arr.astype(np.float32)
        if out.size and (out.min() < 0.0 or out.max() > 1.0):
            raise DataFormatError(
                f"float image values outside [0,1]: min {out.min()}, max {out.max()}"
            )
        return out
    raise DataFormatError(f"unsupported image dtype {arr.dtype}")


def load_slide_tiff(path) -> RawSlide:
    """Read a multi-page TIFF into a RawSlide, one channel per page."""
    path = Path(path)
    channels = []
    with Image.open(path) as im:
        n = getattr(im, "n_frames", 1)
        for i in range(n):
            im.seek(i)
            channels.append(np.asarray(im))
    return RawSlide(channels=channels, source_id=path.stem)


def extract_dapi_channel(slide: RawSlide) -> np.ndarray:
    """Return the DAPI channel (first of the 8-channel stain ordering), unmodified."""
    if len(slide.channels) != DAPI_CHANNELS:
        raise DataFormatError(
            f"expected an {DAPI_CHANNELS}-channel slide, got {len(slide.channels)} channels"
        )
    return slide.channels[0]


def load_binary_mask_png(path) -> np.ndarray:
    """Read a 0/255 PNG mask as a {0,1} uint8 grid."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 127).astype(np.uint8)
