"""Shared fixtures: compact synthetic datasets and small model configs."""

from dataclasses import replace

import pytest

from seglab.autoencoder import AutoencoderConfig
from seglab.class_weights import compute_pixel_stats, compute_weights
from seglab.data import generate_blob_dataset, split_dataset
from seglab.engine import SplitData, TrainConfig
from seglab.models.nets import SegModelConfig


def tiny_model_config(architecture: str = "unet", in_channels: int = 1) -> SegModelConfig:
    """The smallest valid segmenter, for fast tests."""
    return SegModelConfig(
        architecture=architecture,
        encoder="tiny",
        encoder_filters=(8, 16, 32),
        decoder_channels=(32, 16, 8),
        se_reduction=4,
        in_channels=in_channels,
    )


def tiny_train_config(**overrides) -> TrainConfig:
    settings = dict(
        model=tiny_model_config(),
        app=AutoencoderConfig(),
        weight_scheme="cdw",
        lr_max=3e-3,
        lr_min=3e-3,
        t_max=50,
        epochs=2,
        batch_size=8,
        seeds=(0,),
        augment_chain=(),
    )
    settings.update(overrides)
    return TrainConfig(**settings)


@pytest.fixture(scope="session")
def blob_samples():
    return generate_blob_dataset(count=16, image_size=32, seed=7, noise=0.05)


@pytest.fixture(scope="session")
def blob_split(blob_samples):
    mapping = split_dataset([s.source_id for s in blob_samples], seed=0)
    buckets = {"train": [], "val": [], "test": []}
    for sample in blob_samples:
        split = mapping[sample.source_id]
        buckets[split].append(replace(sample, split=split))
    return SplitData(**buckets)


@pytest.fixture(scope="session")
def blob_weights(blob_split):
    stats = compute_pixel_stats([s.mask for s in blob_split.train])
    return compute_weights(stats, "cdw")
