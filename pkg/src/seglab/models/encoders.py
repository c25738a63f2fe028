"""Feature-pyramid encoders with three downsampling stages.

Every encoder exposes four feature maps at strides (1, 2, 4, 8) with
channel widths out_channels = (c0, c1, c2, c3). ResNet backbones are
rebuilt with a stride-1 stem and no stem max-pool so the total
downsampling factor is 2^3, matching the forward contract (inputs
divisible by 8). Basic-block ResNets natively expose stage widths
(128, 256, 512); bottleneck ResNets get bare 1x1 projections down to the
same widths so one decoder serves every encoder.
"""

from pathlib import Path

import torch
from torch import nn
from torchvision import models as tv_models

from ..errors import ConfigError, WeightLoadError

_RESNET_BUILDERS = {
    "resnet18": tv_models.resnet18,
    "resnet34": tv_models.resnet34,
    "resnet50": tv_models.resnet50,
    "resnet101": tv_models.resnet101,
}
_BOTTLENECK = {"resnet50", "resnet101"}
_BOTTLENECK_WIDTHS = (256, 512, 1024, 2048)
UNIFORM_WIDTHS = (64, 128, 256, 512)
TINY_WIDTHS = (8, 8, 16, 32)

ENCODER_NAMES = ("tiny",) + tuple(_RESNET_BUILDERS)


def encoder_stage_filters(name: str):
    """Widths of the three downsampling stages an encoder presents to the decoder."""
    if name == "tiny":
        return TINY_WIDTHS[1:]
    if name in _RESNET_BUILDERS:
        return UNIFORM_WIDTHS[1:]
    raise ConfigError(f"unknown encoder {name!r}; expected one of {ENCODER_NAMES}")


class ResNetEncoder(nn.Module):
    """torchvision ResNet re-strided to a /1 stem and /2,/4,/8 stages."""

    def __init__(self, name: str, in_channels: int = 3):
        super().__init__()
        base = _RESNET_BUILDERS[name](weights=None)
        # stride-1 stem, no max-pool: layer1 stays at full resolution
        self.conv1 = nn.Conv2d(in_channels, 64, kernel_size=7, stride=1, padding=3, bias=False)
        self.bn1 = base.bn1
        self.relu = base.relu
        self.layer1 = base.layer1
        self.layer2 = base.layer2
        self.layer3 = base.layer3
        self.layer4 = base.layer4
        self.name = name
        self.out_channels = UNIFORM_WIDTHS
        if name in _BOTTLENECK:
            self.proj = nn.ModuleList(
                nn.Conv2d(wide, narrow, kernel_size=1)
                for wide, narrow in zip(_BOTTLENECK_WIDTHS, UNIFORM_WIDTHS)
            )
        else:
            self.proj = None

    def forward(self, x):
        x = self.relu(self.bn1(self.conv1(x)))
        f0 = self.layer1(x)
        f1 = self.layer2(f0)
        f2 = self.layer3(f1)
        f3 = self.layer4(f2)
        feats = (f0, f1, f2, f3)
        if self.proj is not None:
            feats = tuple(p(f) for p, f in zip(self.proj, feats))
        return feats


def _conv_bn_relu(cin, cout, stride):
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size=3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class TinyEncoder(nn.Module):
    """Small random-init encoder for desk-scale tests; same stride contract."""

    def __init__(self, in_channels: int = 1):
        super().__init__()
        c0, c1, c2, c3 = TINY_WIDTHS
        self.stem = _conv_bn_relu(in_channels, c0, stride=1)
        self.stage1 = _conv_bn_relu(c0, c1, stride=2)
        self.stage2 = _conv_bn_relu(c1, c2, stride=2)
        self.stage3 = _conv_bn_relu(c2, c3, stride=2)
        self.name = "tiny"
        self.out_channels = TINY_WIDTHS

    def forward(self, x):
        f0 = self.stem(x)
        f1 = self.stage1(f0)
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        return f0, f1, f2, f3


def build_encoder(name: str, in_channels: int = 3) -> nn.Module:
    if name == "tiny":
        return TinyEncoder(in_channels=in_channels)
    if name in _RESNET_BUILDERS:
        return ResNetEncoder(name, in_channels=in_channels)
    raise ConfigError(f"unknown encoder {name!r}; expected one of {ENCODER_NAMES}")


def save_encoder_weights(encoder: nn.Module, path) -> Path:
    """Write the encoder's full state dict to a checkpoint file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(encoder.state_dict(), path)
    return path


def load_encoder_weights(encoder: nn.Module, path) -> nn.Module:
    """Initialize an encoder from a checkpoint keyed by parameter path.

    Accepts both this package's own saves and plain torchvision ResNet
    state dicts (whose fc head is ignored). Projection layers absent from
    an external file keep their random init; every backbone tensor must
    be present with a matching shape.
    """
    path = Path(path)
    if not path.exists():
        raise WeightLoadError(f"encoder weight file not found: {path}")
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # corrupt or non-tensor payloads
        raise WeightLoadError(f"cannot read encoder weights from {path}: {exc}") from exc
    if not isinstance(state, dict):
        raise WeightLoadError(f"{path} does not contain a state dict")
    state = {k: v for k, v in state.items() if not k.startswith(("fc.", "avgpool."))}
    try:
        missing, unexpected = encoder.load_state_dict(state, strict=False)
    except RuntimeError as exc:
        raise WeightLoadError(
            f"weights at {path} do not match encoder {getattr(encoder, 'name', '?')!r}: {exc}"
        ) from exc
    hard_missing = [k for k in missing if not k.startswith("proj.")]
    if hard_missing or unexpected:
        raise WeightLoadError(
            f"weights at {path} do not match encoder {getattr(encoder, 'name', '?')!r}: "
            f"missing {hard_missing[:4]}, unexpected {list(unexpected)[:4]}"
        )
    return encoder
