from .samples import ImageSample, RawSlide
from .tiling import TileGrid, assemble_tiles, tile_image
from .slides import (
    extract_dapi_channel,
    load_binary_mask_png,
    load_slide_tiff,
    normalize_intensity,
)
from .lesion import load_lesion_pair, resize_lesion_image
from .split import ISIC_SPLIT_SIZES, isic_positional_split, split_dataset
from .augment import (
    CHAIN_OPS,
    apply_augmentations,
    minmax_rescale,
    rnorm,
    sample_rng,
    standardize_channel,
)
from .synthetic import generate_blob_dataset
from .cache import (
    CacheEntry,
    ManifestEntry,
    load_cached_sample,
    read_manifest,
    read_split_manifest,
    save_sample_png,
    write_split_manifest,
)
from .torch_dataset import SegmentationDataset

__all__ = [
    "ImageSample",
    "RawSlide",
    "TileGrid",
    "tile_image",
    "assemble_tiles",
    "load_slide_tiff",
    "extract_dapi_channel",
    "normalize_intensity",
    "load_binary_mask_png",
    "load_lesion_pair",
    "resize_lesion_image",
    "split_dataset",
    "isic_positional_split",
    "ISIC_SPLIT_SIZES",
    "CHAIN_OPS",
    "apply_augmentations",
    "standardize_channel",
    "minmax_rescale",
    "rnorm",
    "sample_rng",
    "generate_blob_dataset",
    "ManifestEntry",
    "CacheEntry",
    "read_manifest",
    "save_sample_png",
    "load_cached_sample",
    "write_split_manifest",
    "read_split_manifest",
    "SegmentationDataset",
]
