"""Cosine-annealed learning-rate schedule, stepped once per epoch."""

import math
import warnings


def cosine_lr(t, lr_max: float = 3.6e-4, lr_min: float = 3.4e-4, t_max: int = 50) -> float:
    """Cosine annealing from lr_max at t=0 down to lr_min at t=t_max.

    eta(t) = lr_min + (lr_max - lr_min) * (1 + cos(pi*t/t_max)) / 2,
    evaluated as a convex combination so both endpoints are exact in
    floating point. t beyond t_max clamps to lr_min with a warning.
    """
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if lr_min > lr_max:
        raise ValueError(f"lr_min {lr_min} exceeds lr_max {lr_max}")
    if t < 0:
        raise ValueError(f"epoch index must be non-negative, got {t}")
    if t > t_max:
        warnings.warn(
            f"epoch {t} beyond schedule horizon t_max={t_max}; clamping to lr_min",
            stacklevel=2,
        )
        return lr_min
    w = 0.5 * (1.0 + math.cos(math.pi * t / t_max))
    return w * lr_max + (1.0 - w) * lr_min
