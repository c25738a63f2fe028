"""Decoder building blocks: squeeze-and-excitation and the upsample-conv unit."""

import torch
from torch import nn

from ..errors import ConfigError


class SqueezeExcite(nn.Module):
    """Channel attention: global average pool -> bottleneck -> sigmoid gate.

    The input is rescaled per channel by the gate, so output shape equals
    input shape and a zero input stays exactly zero.
    """

    def __init__(self, channels: int, reduction: int):
        super().__init__()
        if reduction < 1:
            raise ConfigError(f"se reduction must be >= 1, got {reduction}")
        if channels < reduction:
            raise ConfigError(
                f"se block needs channels >= reduction, got C={channels}, r={reduction}"
            )
        if channels % reduction != 0:
            raise ConfigError(
                f"se block needs channels divisible by reduction, got C={channels}, r={reduction}"
            )
        self.channels = channels
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc1 = nn.Linear(channels, channels // reduction)
        self.fc2 = nn.Linear(channels // reduction, channels)
        self.act = nn.ReLU(inplace=True)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        """The per-channel sigmoid gate, shape B×C."""
        squeezed = self.pool(x).flatten(1)
        return torch.sigmoid(self.fc2(self.act(self.fc1(squeezed))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        g = self.gate(x)
        return x * g[:, :, None, None]


class DecoderBlock(nn.Module):
    """One decoder stage: 2x upsample -> concat skips -> conv -> BN -> ReLU -> SE."""

    def __init__(self, in_channels: int, skip_channels: int, out_channels: int,
                 se_reduction: int):
        super().__init__()
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.conv = nn.Conv2d(
            in_channels + skip_channels, out_channels, kernel_size=3, padding=1, bias=False
        )
        self.bn = nn.BatchNorm2d(out_channels)
        self.act = nn.ReLU(inplace=True)
        self.se = SqueezeExcite(out_channels, se_reduction)

    def forward(self, x: torch.Tensor, *skips: torch.Tensor) -> torch.Tensor:
        x = self.upsample(x)
        if skips:
            x = torch.cat([x, *skips], dim=1)
        return self.se(self.act(self.bn(self.conv(x))))
