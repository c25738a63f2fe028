"""Deterministic train/val/test partitioning."""

import math
import random

DEFAULT_RATIOS = (0.70, 0.10, 0.20)
SPLIT_NAMES = ("train", "val", "test")

# official ISIC-2017 partition sizes, applied positionally when the
# manifest carries no explicit split tags
ISIC_SPLIT_SIZES = (2000, 150, 600)


def split_dataset(keys, ratios=DEFAULT_RATIOS, seed: int = 0) -> dict:
    """Assign each key to train/val/test deterministically.

    Keys are shuffled by `seed`, then sizes are floor-allocated from the
    ratios with the remainder going to train. Returns {key: split_name}.
    Pass source-slide ids (not tile ids) to split whole slides so tiles
    from one slide never straddle splits.
    """
    keys = list(keys)
    if len(keys) != len(set(keys)):
        raise ValueError("split keys must be unique")
    if len(keys) < 3:
        raise ValueError(f"need at least 3 items to split, got {len(keys)}")
    if len(ratios) != 3:
        raise ValueError(f"expected 3 ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")

    order = sorted(keys)
    random.Random(seed).shuffle(order)
    n = len(order)
    counts = [math.floor(n * r) for r in ratios]
    counts[0] += n - sum(counts)

    assignment = {}
    start = 0
    for name, count in zip(SPLIT_NAMES, counts):
        for key in order[start : start + count]:
            assignment[key] = name
        start += count
    return assignment


def isic_positional_split(n_entries: int) -> list:
    """The fixed official ISIC-2017 split, applied by manifest position."""
    if n_entries != sum(ISIC_SPLIT_SIZES):
        raise ValueError(
            f"positional ISIC split needs exactly {sum(ISIC_SPLIT_SIZES)} entries, "
            f"got {n_entries}; tag each manifest row with its official split instead"
        )
    out = []
    for name, count in zip(SPLIT_NAMES, ISIC_SPLIT_SIZES):
        out.extend([name] * count)
    return out
