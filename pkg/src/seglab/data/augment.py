"""Training-time augmentation: flips plus red-channel normalization.

Geometric ops transform image and mask together; intensity ops touch the
image only, so masks stay strictly binary. Each sample draws from its own
RNG seeded by (run seed, epoch, sample index), making results independent
of iteration order.
"""

import numpy as np

from ..errors import ConfigError
from .samples import ImageSample

CHAIN_OPS = ("hflip", "vflip", "rnorm")


def standardize_channel(arr: np.ndarray) -> np.ndarray:
    """Shift/scale a grid to zero mean and unit variance (population std).

    A constant grid has zero variance; it maps to all zeros.
    """
    arr = arr.astype(np.float64)
    std = arr.std()
    if std == 0.0:
        return np.zeros_like(arr, dtype=np.float32)
    return ((arr - arr.mean()) / std).astype(np.float32)


def minmax_rescale(image: np.ndarray) -> np.ndarray:
    """Rescale all channels jointly to [0,1]; a constant image maps to zeros."""
    lo, hi = float(image.min()), float(image.max())
    if hi == lo:
        return np.zeros_like(image, dtype=np.float32)
    return ((image - lo) / (hi - lo)).astype(np.float32)


def rnorm(image: np.ndarray) -> np.ndarray:
    """Red-channel normalization.

    Standardizes the red channel (channel 0) to zero mean/unit variance,
    then min-max rescales all channels back to [0,1] so downstream code
    keeps its intensity contract. Single-channel images degenerate to
    whole-image standardization followed by the same rescale.
    """
    if image.ndim == 2:
        return minmax_rescale(standardize_channel(image))
    out = image.astype(np.float32).copy()
    out[:, :, 0] = standardize_channel(image[:, :, 0])
    return minmax_rescale(out)


def _flip(sample: ImageSample, axis: int) -> ImageSample:
    return ImageSample(
        image=np.flip(sample.image, axis=axis).copy(),
        mask=np.flip(sample.mask, axis=axis).copy(),
        source_id=sample.source_id,
        tile=sample.tile,
        split=sample.split,
    )


def apply_augmentations(sample: ImageSample, chain, rng) -> ImageSample:
    """Apply the configured augmentation chain to one sample.

    chain is a sequence over {hflip, vflip, rnorm}; flips fire with
    probability 0.5, rnorm is deterministic. Empty chain returns the
    sample unchanged.
    """
    out = sample
    for op in chain:
        if op == "hflip":
            if rng.random() < 0.5:
                out = _flip(out, axis=1)
        elif op == "vflip":
            if rng.random() < 0.5:
                out = _flip(out, axis=0)
        elif op == "rnorm":
            out = ImageSample(
                image=rnorm(out.image),
                mask=out.mask,
                source_id=out.source_id,
                tile=out.tile,
                split=out.split,
            )
        else:
            raise ConfigError(f"unknown augmentation op {op!r}; expected one of {CHAIN_OPS}")
    return out


def sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """RNG for one (sample, epoch): stable regardless of batch order."""
    return np.random.default_rng((seed, epoch, index))
