"""Dataset manifests and the on-disk PNG sample cache.

Input manifest: one tab-separated record per source sample
    image_path <TAB> mask_path <TAB> dataset [<TAB> split]
Relative paths resolve against a data root. A leading header row naming
the columns is permitted and skipped.

Cache layout: every prepared sample becomes a paired PNG
    {sample_id}.png / {sample_id}_mask.png
where tiled samples use sample_id = {source_id}_r{row}_c{col}. The split
manifest lists (path, split, dataset), one tab-separated row per sample.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from ..errors import DataFormatError
from .samples import ImageSample
from .split import SPLIT_NAMES

_MANIFEST_HEADER_TOKENS = {"image", "image_path", "img"}


@dataclass(frozen=True)
class ManifestEntry:
    image_path: Path
    mask_path: Path
    dataset: str
    split: Optional[str] = None


@dataclass(frozen=True)
class CacheEntry:
    image_path: Path
    split: str
    dataset: str

    @property
    def mask_path(self) -> Path:
        return self.image_path.with_name(self.image_path.stem + "_mask.png")


def read_manifest(path, data_root=None) -> list:
    """Parse the input manifest into entries, resolving relative paths."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"manifest file not found: {path}")
    root = Path(data_root) if data_root else path.parent
    entries = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if ln == 1 and parts[0].lower() in _MANIFEST_HEADER_TOKENS:
            continue
        if len(parts) not in (3, 4):
            raise DataFormatError(
                f"{path}:{ln}: expected 3 or 4 tab-separated fields, got {len(parts)}"
            )
        split = parts[3] if len(parts) == 4 and parts[3] else None
        if split is not None and split not in SPLIT_NAMES:
            raise DataFormatError(
                f"{path}:{ln}: unknown split {split!r}; expected one of {SPLIT_NAMES}"
            )

        def _resolve(p):
            p = Path(p)
            return p if p.is_absolute() else root / p

        entries.append(
            ManifestEntry(
                image_path=_resolve(parts[0]),
                mask_path=_resolve(parts[1]),
                dataset=parts[2],
                split=split,
            )
        )
    if not entries:
        raise DataFormatError(f"manifest {path} lists no samples")
    return entries


def save_sample_png(sample: ImageSample, out_dir) -> Path:
    """Write one sample as paired 8-bit PNGs; returns the image path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    img = np.clip(np.round(np.asarray(sample.image, dtype=np.float64) * 255.0), 0, 255).astype(
        np.uint8
    )
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        pil_img = Image.fromarray(img, mode="L")
    elif img.shape[2] == 3:
        pil_img = Image.fromarray(img, mode="RGB")
    else:
        raise DataFormatError(f"cannot cache image with {img.shape[2]} channels as PNG")
    img_path = out_dir / f"{sample.sample_id}.png"
    pil_img.save(img_path)
    Image.fromarray((sample.mask * 255).astype(np.uint8), mode="L").save(
        out_dir / f"{sample.sample_id}_mask.png"
    )
    return img_path


def load_cached_sample(entry: CacheEntry) -> ImageSample:
    """Read one paired-PNG cache entry back into an ImageSample."""
    with Image.open(entry.image_path) as im:
        if im.mode == "L":
            image = np.asarray(im, dtype=np.float32) / 255.0
        else:
            image = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    with Image.open(entry.mask_path) as mm:
        mask = (np.asarray(mm.convert("L")) > 127).astype(np.uint8)
    stem = entry.image_path.stem
    if "_r" in stem and "_c" in stem and stem.rsplit("_", 2)[-2].startswith("r"):
        source_id, r_tok, c_tok = stem.rsplit("_", 2)
        tile = (int(r_tok[1:]), int(c_tok[1:]))
    else:
        source_id = stem.removesuffix("_whole")
        tile = None
    return ImageSample(
        image=image, mask=mask, source_id=source_id, tile=tile, split=entry.split
    )


def write_split_manifest(path, entries) -> Path:
    """Write the three-column (path, split, dataset) split manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{e.image_path}\t{e.split}\t{e.dataset}" for e in entries]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_split_manifest(path) -> list:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"split manifest not found: {path}")
    entries = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataFormatError(f"{path}:{ln}: expected 3 tab-separated fields")
        img, split, dataset = parts
        if split not in SPLIT_NAMES:
            raise DataFormatError(f"{path}:{ln}: unknown split {split!r}")
        entries.append(CacheEntry(image_path=Path(img), split=split, dataset=dataset))
    if not entries:
        raise DataFormatError(f"split manifest {path} is empty")
    return entries
