"""U-Net and U-Net++ segmenters over the shared encoder contract."""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from ..errors import ConfigError, ShapeError
from .blocks import DecoderBlock
from .encoders import ENCODER_NAMES, build_encoder, encoder_stage_filters, load_encoder_weights

ARCHITECTURES = ("unet", "unetpp")
ENCODER_DEPTH = 3  # three downsampling stages; inputs divisible by 2^3


@dataclass(frozen=True)
class SegModelConfig:
    """Everything needed to build a segmenter."""

    architecture: str = "unet"
    encoder: str = "resnet18"
    encoder_depth: int = ENCODER_DEPTH
    encoder_filters: tuple = (128, 256, 512)
    decoder_channels: tuple = (256, 128, 64)
    se_reduction: int = 16
    pretrained_weights: Optional[str] = None
    num_classes: int = 2
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "encoder_filters", tuple(self.encoder_filters))
        object.__setattr__(self, "decoder_channels", tuple(self.decoder_channels))


def validate_model_config(config: SegModelConfig):
    if config.architecture not in ARCHITECTURES:
        raise ConfigError(
            f"unknown architecture {config.architecture!r}; expected one of {ARCHITECTURES}"
        )
    if config.encoder not in ENCODER_NAMES:
        raise ConfigError(f"unknown encoder {config.encoder!r}; expected one of {ENCODER_NAMES}")
    if config.encoder_depth != ENCODER_DEPTH:
        raise ConfigError(f"encoder_depth is fixed at {ENCODER_DEPTH}, got {config.encoder_depth}")
    expected = encoder_stage_filters(config.encoder)
    if config.encoder_filters != expected:
        raise ConfigError(
            f"encoder {config.encoder!r} presents stage filters {expected}, "
            f"got encoder_filters={config.encoder_filters}"
        )
    if len(config.decoder_channels) != ENCODER_DEPTH:
        raise ConfigError(
            f"decoder_channels must list {ENCODER_DEPTH} widths, got {config.decoder_channels}"
        )
    if any(c < 1 for c in config.decoder_channels):
        raise ConfigError(f"decoder_channels must be positive, got {config.decoder_channels}")
    if config.num_classes != 2:
        raise ConfigError(f"num_classes is fixed at 2, got {config.num_classes}")
    if config.in_channels not in (1, 3):
        raise ConfigError(f"in_channels must be 1 or 3, got {config.in_channels}")
    for width in config.decoder_channels:
        # every decoder stage ends in a squeeze-excite bottleneck
        if width < config.se_reduction or width % config.se_reduction:
            raise ConfigError(
                f"decoder width {width} is not divisible by "
                f"se_reduction {config.se_reduction}"
            )


class UNetDecoder(nn.Module):
    """Plain skip pathway: one block per resolution octave."""

    def __init__(self, enc_channels, dec_channels, se_reduction):
        super().__init__()
        c0, c1, c2, c3 = enc_channels
        d2, d1, d0 = dec_channels
        self.block2 = DecoderBlock(c3, c2, d2, se_reduction)
        self.block1 = DecoderBlock(d2, c1, d1, se_reduction)
        self.block0 = DecoderBlock(d1, c0, d0, se_reduction)

    def forward(self, f0, f1, f2, f3):
        x = self.block2(f3, f2)
        x = self.block1(x, f1)
        return self.block0(x, f0)


class UNetPPDecoder(nn.Module):
    """Nested dense skip pathway.

    Node x_{i,j} upsamples x_{i+1,j-1} and concatenates every earlier
    node on its own row, x_{i,0..j-1}, with x_{i,0} the encoder feature.
    """

    def __init__(self, enc_channels, dec_channels, se_reduction):
        super().__init__()
        c0, c1, c2, c3 = enc_channels
        d2, d1, d0 = dec_channels
        r = se_reduction
        self.x21 = DecoderBlock(c3, c2, d2, r)
        self.x11 = DecoderBlock(c2, c1, d1, r)
        self.x01 = DecoderBlock(c1, c0, d0, r)
        self.x12 = DecoderBlock(d2, c1 + d1, d1, r)
        self.x02 = DecoderBlock(d1, c0 + d0, d0, r)
        self.x03 = DecoderBlock(d1, c0 + 2 * d0, d0, r)

    def forward(self, f0, f1, f2, f3):
        x21 = self.x21(f3, f2)
        x11 = self.x11(f2, f1)
        x01 = self.x01(f1, f0)
        x12 = self.x12(x21, f1, x11)
        x02 = self.x02(x11, f0, x01)
        return self.x03(x12, f0, x01, x02)


class Segmenter(nn.Module):
    """Encoder + decoder + 1x1 logits head; logits carry no activation."""

    def __init__(self, config: SegModelConfig):
        super().__init__()
        validate_model_config(config)
        self.config = config
        self.encoder = build_encoder(config.encoder, in_channels=config.in_channels)
        decoder_cls = UNetDecoder if config.architecture == "unet" else UNetPPDecoder
        self.decoder = decoder_cls(
            self.encoder.out_channels, config.decoder_channels, config.se_reduction
        )
        self.head = nn.Conv2d(config.decoder_channels[-1], config.num_classes, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4:
            raise ShapeError(f"expected a B×C×H×W batch, got shape {tuple(x.shape)}")
        if x.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"expected {self.config.in_channels} input channels, got {x.shape[1]}"
            )
        stride = 2 ** ENCODER_DEPTH
        if x.shape[2] % stride or x.shape[3] % stride:
            raise ShapeError(
                f"spatial dims must be divisible by {stride}, got {tuple(x.shape[2:])}"
            )
        return self.head(self.decoder(*self.encoder(x)))


def build_segmenter(config: SegModelConfig) -> Segmenter:
    """Build a segmenter, loading pretrained encoder weights when configured."""
    model = Segmenter(config)
    if config.pretrained_weights:
        load_encoder_weights(model.encoder, config.pretrained_weights)
    return model


def save_segmenter_checkpoint(model: Segmenter, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"model": model.state_dict()}, path)
    return path


def load_segmenter_checkpoint(path, config: SegModelConfig) -> Segmenter:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = Segmenter(config)
    model.load_state_dict(payload["model"])
    return model
