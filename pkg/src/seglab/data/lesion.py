"""Lesion-photo preprocessing: two-stage resize to the training resolution."""

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ShapeError
from .samples import ImageSample
from .slides import load_binary_mask_png, normalize_intensity

INTERMEDIATE_SIZE = 480
FINAL_SIZE = 224


def _resize_image(image: np.ndarray, size: int) -> np.ndarray:
    # PIL 'F' mode resizes one float channel at a time
    if image.ndim == 2:
        im = Image.fromarray(image.astype(np.float32), mode="F")
        return np.asarray(im.resize((size, size), Image.BILINEAR), dtype=np.float32)
    chans = [
        np.asarray(
            Image.fromarray(image[:, :, c].astype(np.float32), mode="F").resize(
                (size, size), Image.BILINEAR
            ),
            dtype=np.float32,
        )
        for c in range(image.shape[2])
    ]
    return np.stack(chans, axis=2)


def _resize_mask(mask: np.ndarray, size: int) -> np.ndarray:
    im = Image.fromarray(mask.astype(np.uint8), mode="L")
    out = np.asarray(im.resize((size, size), Image.NEAREST))
    # nearest keeps {0,1}; the threshold guards any future resampler change
    return (out > 0.5).astype(np.uint8)


def resize_lesion_image(
    image: np.ndarray,
    mask: np.ndarray,
    source_id: str = "lesion",
    intermediate: int = INTERMEDIATE_SIZE,
    final: int = FINAL_SIZE,
) -> ImageSample:
    """Resize an arbitrary-size lesion photo to the training resolution.

    The image goes through bilinear interpolation to intermediate×intermediate
    and then a second bilinear resize to final×final. The mask is resampled
    with nearest-neighbor at both steps and re-binarized at 0.5.
    """
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise ShapeError(f"degenerate image size {image.shape[:2]}; need at least 2x2")
    if image.shape[:2] != mask.shape:
        raise ShapeError(f"image dims {image.shape[:2]} != mask dims {mask.shape}")
    img = _resize_image(_resize_image(image, intermediate), final)
    msk = _resize_mask(_resize_mask(mask, intermediate), final)
    return ImageSample(image=img, mask=msk, source_id=source_id, tile=None)


def load_lesion_pair(image_path, mask_path):
    """Load a lesion photo (RGB) and its 0/255 PNG mask as ([0,1] floats, {0,1})."""
    with Image.open(Path(image_path)) as im:
        image = normalize_intensity(np.asarray(im.convert("RGB")))
    mask = load_binary_mask_png(mask_path)
    return image, mask
