"""Training losses: class-weighted cross-entropy plus the reconstruction MSE."""

from typing import Optional

import torch
import torch.nn.functional as F

from .class_weights import WeightPair
from .errors import DataFormatError, ShapeError


def _check_inputs(logits: torch.Tensor, gt: torch.Tensor):
    if logits.dim() != 4 or logits.shape[1] != 2:
        raise ShapeError(f"logits must be B×2×H×W, got {tuple(logits.shape)}")
    if gt.shape != (logits.shape[0], logits.shape[2], logits.shape[3]):
        raise ShapeError(
            f"gt shape {tuple(gt.shape)} does not match logits {tuple(logits.shape)}"
        )
    if not torch.isfinite(logits).all():
        raise ValueError("logits contain non-finite values")
    if not ((gt == 0) | (gt == 1)).all():
        raise DataFormatError("ground-truth mask must be binary")


def _weight_tensor(weights, logits: torch.Tensor) -> torch.Tensor:
    if isinstance(weights, WeightPair):
        pair = weights.as_tuple()
    else:
        pair = tuple(float(w) for w in weights)
        if len(pair) != 2:
            raise ValueError(f"expected 2 class weights, got {len(pair)}")
        if any(w <= 0 for w in pair):
            raise ValueError(f"class weights must be positive, got {pair}")
    return torch.tensor(pair, dtype=logits.dtype, device=logits.device)


def weighted_cross_entropy(logits: torch.Tensor, gt: torch.Tensor, weights) -> torch.Tensor:
    """Per-pixel weighted CE, normalized by pixel count (not by weight mass).

    loss = -(1/N) * sum_p w_{y_p} * log softmax(logits)_{y_p}. Dividing by
    N rather than the summed weights keeps the loss exactly linear in the
    weights: scaling both by k scales the loss by k, and (1,1) recovers
    the plain mean cross-entropy.
    """
    _check_inputs(logits, gt)
    w = _weight_tensor(weights, logits)
    total = F.cross_entropy(logits, gt.long(), weight=w, reduction="sum")
    return total / gt.numel()


def mask_mse(reconstruction: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean squared error between a reconstructed soft mask and the ground truth."""
    if reconstruction.shape != gt.shape:
        raise ShapeError(
            f"reconstruction shape {tuple(reconstruction.shape)} != gt {tuple(gt.shape)}"
        )
    return torch.mean((reconstruction - gt.to(reconstruction.dtype)) ** 2)


def combined_loss(
    logits: torch.Tensor,
    app_out: Optional[torch.Tensor],
    gt: torch.Tensor,
    weights,
    lambda_mse: float = 1.0,
) -> torch.Tensor:
    """WCE plus lambda_mse * reconstruction MSE when the autoencoder is active.

    app_out=None (unit disabled) yields exactly the weighted cross-entropy;
    the MSE term reads only app_out and gt, never the logits.
    """
    wce = weighted_cross_entropy(logits, gt, weights)
    if app_out is None:
        return wce
    return wce + lambda_mse * mask_mse(app_out, gt)
