"""Mask autoencoder: a train-time regularizer over predicted masks.

The segmenter's softmax foreground-probability map is flattened row-major,
pushed through stacked linear layers (encoder then mirrored decoder), and
squashed back to [0,1]. During training its reconstruction is scored
against the ground truth with MSE; it never participates in inference.
"""

from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .errors import ConfigError, ShapeError

VARIANTS = ("none", "relu", "gelu")

# default encoder widths by input size; always compressive
DIMS_LARGE = (2048, 512)  # for 480x480 tiles
DIMS_SMALL = (1024, 256)  # for 224x224 lesions
LARGE_INPUT_DIM = 480 * 480


@dataclass(frozen=True)
class AutoencoderConfig:
    """variant selects the activation; "none" disables the unit entirely."""

    variant: str = "none"
    dims: Optional[tuple] = None  # encoder widths; None picks a size-based default
    lambda_mse: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.lambda_mse < 0:
            raise ConfigError(f"lambda_mse must be non-negative, got {self.lambda_mse}")


def default_dims(input_dim: int) -> tuple:
    return DIMS_LARGE if input_dim >= LARGE_INPUT_DIM else DIMS_SMALL


class MaskAutoencoder(nn.Module):
    """Stacked-linear autoencoder over flattened B×H×W probability maps."""

    def __init__(self, input_dim: int, dims, activation: str):
        super().__init__()
        act_cls = {"relu": nn.ReLU, "gelu": nn.GELU}[activation]
        self.input_dim = input_dim
        enc = []
        prev = input_dim
        for d in dims:
            enc += [nn.Linear(prev, d), act_cls()]
            prev = d
        dec = []
        for d in reversed(dims[:-1]):
            dec += [nn.Linear(prev, d), act_cls()]
            prev = d
        dec += [nn.Linear(prev, input_dim), nn.Sigmoid()]
        self.encoder = nn.Sequential(*enc)
        self.decoder = nn.Sequential(*dec)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 3:
            raise ShapeError(f"expected a B×H×W map, got shape {tuple(x.shape)}")
        b, h, w = x.shape
        if h * w != self.input_dim:
            raise ShapeError(
                f"input has {h * w} pixels per image but the unit was built for {self.input_dim}"
            )
        flat = x.reshape(b, h * w)
        return self.decoder(self.encoder(flat)).reshape(b, h, w)


def build_autoencoder(config: AutoencoderConfig, input_dim: int) -> Optional[MaskAutoencoder]:
    """Build the unit for one image geometry; variant "none" yields None.

    The trainer treats a None handle as "regularizer disabled" and the
    loss degenerates to weighted cross-entropy alone.
    """
    if config.variant == "none":
        return None
    if input_dim < 2:
        raise ConfigError(f"input_dim must be at least 2, got {input_dim}")
    dims = config.dims if config.dims is not None else default_dims(input_dim)
    if not dims:
        raise ConfigError("dims must list at least one encoder width")
    if any(d < 1 for d in dims):
        raise ConfigError(f"dims must be positive, got {dims}")
    if dims[0] >= input_dim:
        raise ConfigError(
            f"the unit must compress: first width {dims[0]} >= input_dim {input_dim}"
        )
    return MaskAutoencoder(input_dim=input_dim, dims=tuple(dims), activation=config.variant)


def reconstruct_mask(app: MaskAutoencoder, soft_mask: torch.Tensor) -> torch.Tensor:
    """Run the unit over a foreground-probability map; output in [0,1]."""
    return app(soft_mask)
