from .blocks import DecoderBlock, SqueezeExcite
from .encoders import (
    ENCODER_NAMES,
    build_encoder,
    encoder_stage_filters,
    load_encoder_weights,
    save_encoder_weights,
)
from .nets import (
    ARCHITECTURES,
    SegModelConfig,
    Segmenter,
    build_segmenter,
    load_segmenter_checkpoint,
    save_segmenter_checkpoint,
)

__all__ = [
    "SqueezeExcite",
    "DecoderBlock",
    "ENCODER_NAMES",
    "ARCHITECTURES",
    "build_encoder",
    "encoder_stage_filters",
    "load_encoder_weights",
    "save_encoder_weights",
    "SegModelConfig",
    "Segmenter",
    "build_segmenter",
    "load_segmenter_checkpoint",
    "save_segmenter_checkpoint",
]
