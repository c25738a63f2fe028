"""Synthetic blob dataset: random ellipses on a noisy background.

Desk-scale stand-in for the real datasets; foreground and background are
both always present, so every weighting scheme is well defined.
"""

import numpy as np

from .samples import ImageSample


def _ellipse_mask(size: int, rng: np.random.Generator) -> np.ndarray:
    cy, cx = rng.uniform(0.35 * size, 0.65 * size, size=2)
    a = rng.uniform(0.15 * size, 0.30 * size)  # semi-axes
    b = rng.uniform(0.15 * size, 0.30 * size)
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    y, x = yy - cy, xx - cx
    ct, st = np.cos(theta), np.sin(theta)
    u = x * ct + y * st
    v = -x * st + y * ct
    return (((u / a) ** 2 + (v / b) ** 2) <= 1.0).astype(np.uint8)


def generate_blob_dataset(
    count: int = 32,
    image_size: int = 64,
    seed: int = 1234,
    noise: float = 0.05,
) -> list:
    """Generate `count` single-channel ellipse images with exact masks.

    Intensity: background 0.15, blob 0.85, additive Gaussian noise,
    clipped to [0,1]. Deterministic per (seed, index).
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if image_size < 8:
        raise ValueError(f"image_size must be at least 8, got {image_size}")
    samples = []
    for i in range(count):
        rng = np.random.default_rng((seed, i))
        mask = _ellipse_mask(image_size, rng)
        image = 0.15 + 0.7 * mask.astype(np.float32)
        image = image + rng.normal(0.0, noise, size=mask.shape).astype(np.float32)
        image = np.clip(image, 0.0, 1.0).astype(np.float32)
        samples.append(ImageSample(image=image, mask=mask, source_id=f"blob{i:04d}", tile=None))
    return samples
