"""Cross-entropy class weights from dataset pixel statistics.

Three schemes over the binary (background=0, foreground=1) statistics:

- distribution: each class weighted by its own pixel fraction,
  w_c = alpha_c / total.
- cdw (cross distribution weights): the fractions swapped, so the
  foreground weight is the background's pixel fraction and vice versa.
- median_frequency: w_c = med_freq / n_c with n_c = alpha_c / beta_c,
  where beta_c counts the pixels of all images containing class c and
  med_freq is the median of the n_c (mean of the two in the binary case).
"""

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DataFormatError

BACKGROUND, FOREGROUND = 0, 1
SCHEMES = ("distribution", "cdw", "median_frequency")

# floor substituted for zero counts when zero_floor is enabled
ZERO_FLOOR = 1e-8


@dataclass(frozen=True)
class DatasetStats:
    """Per-class pixel tallies for a set of binary masks.

    pixels_per_class maps class -> alpha_c (pixels of that class);
    presence_total_per_class maps class -> beta_c (total pixels of all
    images in which the class appears at least once).
    """

    pixels_per_class: Mapping[int, int]
    presence_total_per_class: Mapping[int, int]
    total_pixels: int
    image_count: int

    def __post_init__(self):
        alpha_sum = sum(self.pixels_per_class.values())
        if alpha_sum != self.total_pixels:
            raise ValueError(
                f"class pixel counts sum to {alpha_sum}, expected total {self.total_pixels}"
            )
        for c, beta in self.presence_total_per_class.items():
            alpha = self.pixels_per_class.get(c, 0)
            if beta < alpha:
                raise ValueError(f"class {c}: beta {beta} < alpha {alpha}")

    def swapped(self) -> "DatasetStats":
        """The same statistics with the two classes' roles exchanged."""
        return DatasetStats(
            pixels_per_class={
                BACKGROUND: self.pixels_per_class[FOREGROUND],
                FOREGROUND: self.pixels_per_class[BACKGROUND],
            },
            presence_total_per_class={
                BACKGROUND: self.presence_total_per_class[FOREGROUND],
                FOREGROUND: self.presence_total_per_class[BACKGROUND],
            },
            total_pixels=self.total_pixels,
            image_count=self.image_count,
        )


@dataclass(frozen=True)
class ClassFrequency:
    """Presence-conditioned class frequencies n_c and their median."""

    n_c: Mapping[int, float]
    med_freq: float


@dataclass(frozen=True)
class WeightPair:
    """The two cross-entropy class weights in fixed (background, foreground) order."""

    w_background: float
    w_foreground: float
    scheme: str

    def __post_init__(self):
        if self.w_background <= 0 or self.w_foreground <= 0:
            raise ValueError(
                f"weights must be positive, got ({self.w_background}, {self.w_foreground})"
            )
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    def as_tuple(self):
        return (self.w_background, self.w_foreground)


def compute_pixel_stats(masks) -> DatasetStats:
    """Count alpha/beta statistics over a list of binary masks."""
    masks = list(masks)
    if not masks:
        raise ValueError("cannot compute pixel stats over an empty mask list")
    alpha = {BACKGROUND: 0, FOREGROUND: 0}
    beta = {BACKGROUND: 0, FOREGROUND: 0}
    total = 0
    for i, mask in enumerate(masks):
        arr = np.asarray(mask)
        if ((arr != 0) & (arr != 1)).any():
            raise DataFormatError(f"mask {i} is not binary")
        fg = int(np.count_nonzero(arr))
        size = int(arr.size)
        alpha[FOREGROUND] += fg
        alpha[BACKGROUND] += size - fg
        total += size
        if fg > 0:
            beta[FOREGROUND] += size
        if fg < size:
            beta[BACKGROUND] += size
    return DatasetStats(
        pixels_per_class=alpha,
        presence_total_per_class=beta,
        total_pixels=total,
        image_count=len(masks),
    )


def _class_pixel(stats: DatasetStats, cls: int, zero_floor: bool) -> float:
    alpha = stats.pixels_per_class.get(cls, 0)
    if alpha == 0:
        if zero_floor:
            return ZERO_FLOOR
        name = "background" if cls == BACKGROUND else "foreground"
        raise ValueError(f"class {name!r} has zero pixels; cannot compute weights")
    return float(alpha)


def distribution_weights(stats: DatasetStats, zero_floor: bool = False) -> WeightPair:
    """Each class weighted by its own pixel fraction (the distribution baseline)."""
    a_bg = _class_pixel(stats, BACKGROUND, zero_floor)
    a_fg = _class_pixel(stats, FOREGROUND, zero_floor)
    total = float(stats.total_pixels)
    return WeightPair(w_background=a_bg / total, w_foreground=a_fg / total,
                      scheme="distribution")


def cdw_weights(stats: DatasetStats, zero_floor: bool = False) -> WeightPair:
    """Cross distribution weights: each class takes the other's pixel fraction."""
    base = distribution_weights(stats, zero_floor=zero_floor)
    return WeightPair(
        w_background=base.w_foreground, w_foreground=base.w_background, scheme="cdw"
    )


def class_frequencies(stats: DatasetStats, zero_floor: bool = False) -> ClassFrequency:
    """Presence-conditioned frequencies n_c = alpha_c/beta_c and their median."""
    n_by_class = {}
    for cls in (BACKGROUND, FOREGROUND):
        alpha = _class_pixel(stats, cls, zero_floor)
        beta = float(stats.presence_total_per_class.get(cls, 0))
        if beta == 0:
            if zero_floor:
                beta = ZERO_FLOOR
            else:
                name = "background" if cls == BACKGROUND else "foreground"
                raise ValueError(f"class {name!r} appears in no image (beta = 0)")
        n_c = min(alpha / beta, 1.0) if zero_floor else alpha / beta
        if not 0.0 < n_c <= 1.0:
            raise ValueError(f"n_{cls} = {n_c} outside (0,1]")
        n_by_class[cls] = float(n_c)
    # median of two values is their arithmetic mean
    med = 0.5 * (n_by_class[BACKGROUND] + n_by_class[FOREGROUND])
    return ClassFrequency(n_c=n_by_class, med_freq=med)


def median_frequency_weights(stats: DatasetStats, zero_floor: bool = False) -> WeightPair:
    """Median-frequency weights w_c = med_freq / n_c."""
    freq = class_frequencies(stats, zero_floor=zero_floor)
    return WeightPair(
        w_background=freq.med_freq / freq.n_c[BACKGROUND],
        w_foreground=freq.med_freq / freq.n_c[FOREGROUND],
        scheme="median_frequency",
    )


def compute_weights(stats: DatasetStats, scheme: str, zero_floor: bool = False) -> WeightPair:
    """Dispatch to one of the three weighting schemes by name."""
    if scheme == "distribution":
        return distribution_weights(stats, zero_floor)
    if scheme == "cdw":
        return cdw_weights(stats, zero_floor)
    if scheme == "median_frequency":
        return median_frequency_weights(stats, zero_floor)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def all_scheme_weights(stats: DatasetStats, zero_floor: bool = False) -> dict:
    """All three schemes' pairs, keyed by scheme name."""
    return {scheme: compute_weights(stats, scheme, zero_floor) for scheme in SCHEMES}
