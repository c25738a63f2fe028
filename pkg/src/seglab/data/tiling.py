"""Non-overlapping tiling of large images into fixed-size training patches."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .samples import ImageSample, validate_binary_mask


@dataclass(frozen=True)
class TileGrid:
    """Geometry of a tiling: grid extents plus the zero padding applied."""

    tile_size: int
    rows: int
    cols: int
    pad_bottom: int
    pad_right: int

    def __post_init__(self):
        if self.tile_size <= 0 or self.rows <= 0 or self.cols <= 0:
            raise ShapeError(
                f"grid needs positive tile_size/rows/cols, got "
                f"{self.tile_size}/{self.rows}/{self.cols}"
            )
        if self.pad_bottom >= self.tile_size or self.pad_right >= self.tile_size:
            raise ShapeError("padding must be smaller than the tile size")
        if self.pad_bottom < 0 or self.pad_right < 0:
            raise ShapeError("padding must be non-negative")


def _pad_to_multiple(arr: np.ndarray, tile_size: int) -> np.ndarray:
    h, w = arr.shape[:2]
    pad_b = (-h) % tile_size
    pad_r = (-w) % tile_size
    if pad_b == 0 and pad_r == 0:
        return arr
    widths = [(0, pad_b), (0, pad_r)] + [(0, 0)] * (arr.ndim - 2)
    return np.pad(arr, widths, mode="constant", constant_values=0)


def tile_image(image: np.ndarray, mask: np.ndarray, tile_size: int, source_id: str = "img"):
    """Cut an image/mask pair into non-overlapping tile_size×tile_size tiles.

    The pair is zero-padded at the bottom and right edges up to the next
    multiple of tile_size, then cut row-major. Returns (samples, grid)
    where samples are ImageSample tiles and grid records the geometry
    needed to reassemble the original.
    """
    if tile_size <= 0:
        raise ShapeError(f"tile_size must be positive, got {tile_size}")
    if image.size == 0 or mask.size == 0:
        raise ShapeError("cannot tile an empty image")
    if image.ndim not in (2, 3):
        raise ShapeError(f"image must be 2-D or 3-D, got shape {image.shape}")
    if image.shape[:2] != mask.shape:
        raise ShapeError(f"image dims {image.shape[:2]} != mask dims {mask.shape}")
    validate_binary_mask(mask)

    h, w = mask.shape
    rows = math.ceil(h / tile_size)
    cols = math.ceil(w / tile_size)
    grid = TileGrid(
        tile_size=tile_size,
        rows=rows,
        cols=cols,
        pad_bottom=(-h) % tile_size,
        pad_right=(-w) % tile_size,
    )

    padded_img = _pad_to_multiple(image, tile_size)
    padded_mask = _pad_to_multiple(mask, tile_size)

    samples = []
    for r in range(rows):
        for c in range(cols):
            ys = slice(r * tile_size, (r + 1) * tile_size)
            xs = slice(c * tile_size, (c + 1) * tile_size)
            samples.append(
                ImageSample(
                    image=padded_img[ys, xs].copy(),
                    mask=padded_mask[ys, xs].copy(),
                    source_id=source_id,
                    tile=(r, c),
                )
            )
    return samples, grid


def assemble_tiles(samples, grid: TileGrid, height: int, width: int):
    """Reassemble tiles row-major and crop away the padding.

    Inverse of tile_image: bit-exact for both image and mask.
    """
    if len(samples) != grid.rows * grid.cols:
        raise ShapeError(f"expected {grid.rows * grid.cols} tiles, got {len(samples)}")
    by_pos = {s.tile: s for s in samples}
    first = samples[0].image
    t = grid.tile_size
    full_h, full_w = grid.rows * t, grid.cols * t
    img_shape = (full_h, full_w) if first.ndim == 2 else (full_h, full_w, first.shape[2])
    image = np.zeros(img_shape, dtype=first.dtype)
    mask = np.zeros((full_h, full_w), dtype=samples[0].mask.dtype)
    for r in range(grid.rows):
        for c in range(grid.cols):
            tile = by_pos[(r, c)]
            image[r * t : (r + 1) * t, c * t : (c + 1) * t] = tile.image
            mask[r * t : (r + 1) * t, c * t : (c + 1) * t] = tile.mask
    return image[:height, :width], mask[:height, :width]
