"""PyTorch dataset over in-memory samples with order-independent augmentation."""

import numpy as np
import torch
from torch.utils.data import Dataset

from .augment import apply_augmentations, sample_rng


class SegmentationDataset(Dataset):
    """Wraps ImageSamples as (C×H×W float32 image, H×W int64 mask) tensors.

    Augmentation runs only when train=True and draws per-sample RNGs from
    (seed, epoch, index); call set_epoch before each epoch so the draws
    vary across epochs but stay independent of loader order.
    """

    def __init__(self, samples, augment_chain=(), seed: int = 0, train: bool = False):
        self.samples = list(samples)
        self.augment_chain = tuple(augment_chain)
        self.seed = seed
        self.train = train
        self.epoch = 0

    def set_epoch(self, epoch: int):
        self.epoch = epoch

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, index: int):
        sample = self.samples[index]
        if self.train and self.augment_chain:
            rng = sample_rng(self.seed, self.epoch, index)
            sample = apply_augmentations(sample, self.augment_chain, rng)
        image = np.asarray(sample.image, dtype=np.float32)
        if image.ndim == 2:
            image = image[None, :, :]
        else:
            image = np.transpose(image, (2, 0, 1))
        mask = np.asarray(sample.mask, dtype=np.int64)
        return torch.from_numpy(image.copy()), torch.from_numpy(mask.copy())
