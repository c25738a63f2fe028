"""Tests for encoders, decoder blocks, and the two segmenter architectures."""

import pytest
import torch
from conftest import tiny_model_config
from torchvision import models as tv_models

from seglab.errors import ConfigError, ShapeError, WeightLoadError
from seglab.models import (
    ARCHITECTURES,
    ENCODER_NAMES,
    DecoderBlock,
    SegModelConfig,
    Segmenter,
    SqueezeExcite,
    build_encoder,
    build_segmenter,
    encoder_stage_filters,
    load_encoder_weights,
    load_segmenter_checkpoint,
    save_encoder_weights,
    save_segmenter_checkpoint,
)


def n_params(module: torch.nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


# ---------------------------------------------------------------------------
# encoders
# ---------------------------------------------------------------------------


def test_encoder_name_registry():
    assert ENCODER_NAMES == ("tiny", "resnet18", "resnet34", "resnet50", "resnet101")


def test_encoder_stage_filters():
    assert encoder_stage_filters("tiny") == (8, 16, 32)
    for name in ("resnet18", "resnet34", "resnet50", "resnet101"):
        assert encoder_stage_filters(name) == (128, 256, 512)
    with pytest.raises(ConfigError, match="unknown encoder"):
        encoder_stage_filters("vgg16")


@pytest.mark.parametrize("name", ENCODER_NAMES)
def test_encoder_feature_pyramid_shapes(name):
    torch.manual_seed(0)
    encoder = build_encoder(name, in_channels=3).eval()
    x = torch.randn(2, 3, 16, 16)
    with torch.no_grad():
        feats = encoder(x)
    assert len(feats) == 4
    widths = encoder.out_channels
    # strides 1, 2, 4, 8 over a 16x16 input
    for feat, width, size in zip(feats, widths, (16, 8, 4, 2)):
        assert feat.shape == (2, width, size, size)
    assert widths[1:] == encoder_stage_filters(name)


def test_tiny_encoder_single_channel():
    encoder = build_encoder("tiny", in_channels=1).eval()
    with torch.no_grad():
        feats = encoder(torch.randn(1, 1, 32, 32))
    assert [f.shape for f in feats] == [
        (1, 8, 32, 32),
        (1, 8, 16, 16),
        (1, 16, 8, 8),
        (1, 32, 4, 4),
    ]


def test_resnet_encoder_single_channel_stem():
    encoder = build_encoder("resnet18", in_channels=1)
    assert encoder.conv1.in_channels == 1
    with torch.no_grad():
        feats = encoder.eval()(torch.randn(1, 1, 16, 16))
    assert feats[0].shape == (1, 64, 16, 16)


def test_resnet_stem_keeps_full_resolution():
    # the first stage must see the input at stride 1, not the usual /4
    encoder = build_encoder("resnet34", in_channels=3)
    assert encoder.conv1.stride == (1, 1)
    assert not hasattr(encoder, "maxpool")


def test_bottleneck_encoder_projects_to_uniform_widths():
    encoder = build_encoder("resnet50", in_channels=3).eval()
    assert encoder.proj is not None and len(encoder.proj) == 4
    with torch.no_grad():
        feats = encoder(torch.randn(1, 3, 8, 8))
    assert [f.shape[1] for f in feats] == [64, 128, 256, 512]


def test_basic_block_encoder_has_no_projection():
    assert build_encoder("resnet18", in_channels=3).proj is None


def test_build_encoder_unknown_name():
    with pytest.raises(ConfigError, match="unknown encoder"):
        build_encoder("mobilenet")


# ---------------------------------------------------------------------------
# encoder weight files
# ---------------------------------------------------------------------------


def test_encoder_weights_round_trip(tmp_path):
    torch.manual_seed(1)
    source = build_encoder("tiny", in_channels=1)
    path = save_encoder_weights(source, tmp_path / "enc.pt")
    torch.manual_seed(2)
    target = build_encoder("tiny", in_channels=1)
    load_encoder_weights(target, path)
    for key, value in source.state_dict().items():
        assert torch.equal(target.state_dict()[key], value), key


def test_load_plain_torchvision_state_dict(tmp_path):
    # an off-the-shelf classifier checkpoint: fc head present, no projections
    torch.manual_seed(0)
    reference = tv_models.resnet18(weights=None)
    path = tmp_path / "resnet18.pt"
    torch.save(reference.state_dict(), path)
    encoder = build_encoder("resnet18", in_channels=3)
    load_encoder_weights(encoder, path)
    assert torch.equal(encoder.layer1[0].conv1.weight, reference.layer1[0].conv1.weight)
    assert torch.equal(encoder.bn1.weight, reference.bn1.weight)


def test_load_encoder_weights_missing_file(tmp_path):
    with pytest.raises(WeightLoadError, match="not found"):
        load_encoder_weights(build_encoder("tiny", in_channels=1), tmp_path / "nope.pt")


def test_load_encoder_weights_corrupt_file(tmp_path):
    path = tmp_path / "junk.pt"
    path.write_text("this is not a checkpoint")
    with pytest.raises(WeightLoadError, match="cannot read"):
        load_encoder_weights(build_encoder("tiny", in_channels=1), path)


def test_load_encoder_weights_non_dict_payload(tmp_path):
    path = tmp_path / "tensor.pt"
    torch.save(torch.zeros(3), path)
    with pytest.raises(WeightLoadError, match="state dict"):
        load_encoder_weights(build_encoder("tiny", in_channels=1), path)


def test_load_encoder_weights_wrong_architecture(tmp_path):
    path = save_encoder_weights(build_encoder("resnet34", in_channels=3), tmp_path / "r34.pt")
    with pytest.raises(WeightLoadError, match="do not match"):
        load_encoder_weights(build_encoder("resnet18", in_channels=3), path)


def test_load_encoder_weights_channel_mismatch(tmp_path):
    path = save_encoder_weights(build_encoder("tiny", in_channels=3), tmp_path / "rgb.pt")
    with pytest.raises(WeightLoadError, match="do not match"):
        load_encoder_weights(build_encoder("tiny", in_channels=1), path)


# ---------------------------------------------------------------------------
# squeeze-and-excitation and decoder blocks
# ---------------------------------------------------------------------------


def test_se_output_is_input_times_gate():
    torch.manual_seed(3)
    se = SqueezeExcite(channels=8, reduction=4).eval()
    x = torch.randn(2, 8, 5, 5)
    with torch.no_grad():
        out = se(x)
        gate = se.gate(x)
    assert out.shape == x.shape
    assert gate.shape == (2, 8)
    assert torch.all(gate > 0) and torch.all(gate < 1)
    assert torch.allclose(out, x * gate[:, :, None, None])


def test_se_zero_input_stays_zero():
    se = SqueezeExcite(channels=8, reduction=2).eval()
    with torch.no_grad():
        out = se(torch.zeros(1, 8, 4, 4))
    assert torch.equal(out, torch.zeros(1, 8, 4, 4))


def test_se_bottleneck_width():
    se = SqueezeExcite(channels=16, reduction=4)
    assert se.fc1.out_features == 4
    assert se.fc2.out_features == 16


@pytest.mark.parametrize(
    "channels, reduction",
    [(8, 0), (2, 4), (6, 4)],
)
def test_se_validation(channels, reduction):
    with pytest.raises(ConfigError):
        SqueezeExcite(channels=channels, reduction=reduction)


def test_decoder_block_upsamples_and_fuses_skip():
    torch.manual_seed(4)
    block = DecoderBlock(in_channels=16, skip_channels=8, out_channels=8, se_reduction=4)
    x = torch.randn(2, 16, 4, 4)
    skip = torch.randn(2, 8, 8, 8)
    with torch.no_grad():
        out = block.eval()(x, skip)
    assert out.shape == (2, 8, 8, 8)
    assert torch.all(out >= 0)  # post-ReLU, gated by a positive sigmoid


def test_decoder_block_accepts_multiple_skips():
    block = DecoderBlock(in_channels=8, skip_channels=12, out_channels=8, se_reduction=4)
    x = torch.randn(1, 8, 4, 4)
    skips = [torch.randn(1, 4, 8, 8) for _ in range(3)]
    with torch.no_grad():
        out = block.eval()(x, *skips)
    assert out.shape == (1, 8, 8, 8)


# ---------------------------------------------------------------------------
# segmenters
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_segmenter_forward_shape(architecture):
    torch.manual_seed(5)
    model = build_segmenter(tiny_model_config(architecture=architecture)).eval()
    with torch.no_grad():
        logits = model(torch.randn(2, 1, 32, 32))
    assert logits.shape == (2, 2, 32, 32)
    assert torch.isfinite(logits).all()


def test_segmenter_rejects_bad_inputs():
    model = build_segmenter(tiny_model_config())
    with pytest.raises(ShapeError, match="batch"):
        model(torch.randn(1, 32, 32))
    with pytest.raises(ShapeError, match="channels"):
        model(torch.randn(1, 3, 32, 32))
    with pytest.raises(ShapeError, match="divisible"):
        model(torch.randn(1, 1, 30, 30))


def test_nested_decoder_has_more_parameters():
    unet = build_segmenter(tiny_model_config(architecture="unet"))
    unetpp = build_segmenter(tiny_model_config(architecture="unetpp"))
    assert n_params(unetpp.decoder) > n_params(unet.decoder)
    assert n_params(unetpp.encoder) == n_params(unet.encoder)


def test_architectures_agree_on_head_and_geometry():
    for architecture in ARCHITECTURES:
        model = build_segmenter(tiny_model_config(architecture=architecture))
        assert model.head.out_channels == 2
        assert model.head.kernel_size == (1, 1)


def test_segmenter_config_validation():
    good = tiny_model_config()
    cases = [
        dict(architecture="segnet"),
        dict(encoder="vgg16"),
        dict(encoder_depth=4),
        dict(encoder_filters=(128, 256, 512)),  # wrong for the tiny encoder
        dict(decoder_channels=(32, 16)),
        dict(decoder_channels=(32, 16, 0)),
        dict(num_classes=3),
        dict(in_channels=4),
    ]
    for bad in cases:
        cfg = SegModelConfig(**{**good.__dict__, **bad})
        with pytest.raises(ConfigError):
            Segmenter(cfg)


def test_segmenter_checkpoint_round_trip(tmp_path):
    torch.manual_seed(6)
    config = tiny_model_config(architecture="unetpp")
    model = build_segmenter(config).eval()
    path = save_segmenter_checkpoint(model, tmp_path / "model.ckpt")
    clone = load_segmenter_checkpoint(path, config).eval()
    x = torch.randn(1, 1, 16, 16)
    with torch.no_grad():
        assert torch.equal(model(x), clone(x))


def test_segmenter_checkpoint_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_segmenter_checkpoint(tmp_path / "ghost.ckpt", tiny_model_config())


def test_build_segmenter_loads_pretrained_encoder(tmp_path):
    torch.manual_seed(7)
    donor = build_encoder("tiny", in_channels=1)
    path = save_encoder_weights(donor, tmp_path / "donor.pt")
    config = SegModelConfig(
        architecture="unet",
        encoder="tiny",
        encoder_filters=(8, 16, 32),
        decoder_channels=(32, 16, 8),
        se_reduction=4,
        pretrained_weights=str(path),
        in_channels=1,
    )
    model = build_segmenter(config)
    for key, value in donor.state_dict().items():
        assert torch.equal(model.encoder.state_dict()[key], value), key


def test_build_segmenter_reports_bad_pretrained_path(tmp_path):
    config = SegModelConfig(
        architecture="unet",
        encoder="tiny",
        encoder_filters=(8, 16, 32),
        decoder_channels=(32, 16, 8),
        se_reduction=4,
        pretrained_weights=str(tmp_path / "absent.pt"),
        in_channels=1,
    )
    with pytest.raises(WeightLoadError):
        build_segmenter(config)
