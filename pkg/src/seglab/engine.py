"""Training engine: seeded runs, cosine schedule, evaluation, seed sweeps."""

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader

from .autoencoder import AutoencoderConfig, build_autoencoder
from .class_weights import WeightPair
from .data.torch_dataset import SegmentationDataset
from .errors import SegLabError, ShapeError, TrainingDiverged
from .losses import combined_loss
from .metrics import batch_scores, mean_ci
from .models.nets import SegModelConfig, Segmenter, build_segmenter
from .schedule import cosine_lr

_SHUFFLE_STRIDE = 100003  # mixes (seed, epoch) into the loader generator


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training cell."""

    model: SegModelConfig = field(default_factory=SegModelConfig)
    app: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    weight_scheme: str = "cdw"
    lr_max: float = 3.6e-4
    lr_min: float = 3.4e-4
    weight_decay: float = 1e-5
    t_max: int = 50
    epochs: int = 50
    batch_size: int = 16
    seeds: tuple = (0, 1, 2, 3, 4)
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    checkpoint_every: int = 0  # resumable checkpoint cadence; 0 disables
    max_steps: int = 0  # optimizer-step cap; 0 means unlimited
    threshold: float = 0.5
    augment_chain: tuple = ("hflip", "vflip", "rnorm")
    deterministic: bool = False
    metrics_empty_union: str = "one"
    metrics_aggregation: str = "per_image"
    metrics_iou_class: str = "foreground"

    def __post_init__(self):
        if self.lr_min > self.lr_max:
            raise ValueError(f"lr_min {self.lr_min} exceeds lr_max {self.lr_max}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")


@dataclass
class SplitData:
    """In-memory train/val/test sample lists."""

    train: list
    val: list
    test: list

    def __post_init__(self):
        if not self.train:
            raise ValueError("training split is empty")
        if not self.test:
            raise ValueError("test split is empty")


@dataclass(frozen=True)
class RunResult:
    """Outcome of one seeded run; error is set when the run aborted."""

    seed: int
    test_iou: Optional[float]
    test_pixel_accuracy: Optional[float]
    best_val_iou: Optional[float]
    epochs_completed: int
    config_hash: str = ""
    error: Optional[str] = None

    def __post_init__(self):
        if self.error is None:
            for name, v in (("test_iou", self.test_iou),
                            ("test_pixel_accuracy", self.test_pixel_accuracy)):
                if v is None or not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name} must be in [0,1], got {v}")


def seed_everything(seed: int, deterministic: bool = False):
    """Seed every RNG a run touches; optionally force deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(deterministic)


def predict_masks(model: Segmenter, samples, batch_size: int = 16, device="cpu",
                  threshold: float = 0.5):
    """Thresholded foreground masks for a sample list, in order."""
    device = torch.device(device)
    dataset = SegmentationDataset(samples, train=False)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    model.eval()
    out = []
    with torch.no_grad():
        for images, _ in loader:
            logits = model(images.to(device))
            fg_prob = F.softmax(logits, dim=1)[:, 1]
            masks = (fg_prob >= threshold).to(torch.uint8).cpu().numpy()
            out.extend(masks[i] for i in range(masks.shape[0]))
    return out


def evaluate_model(model: Segmenter, samples, config: TrainConfig, device="cpu"):
    """(IoU, pixel accuracy) of the model over a sample list."""
    preds = predict_masks(
        model, samples, batch_size=config.batch_size, device=device,
        threshold=config.threshold,
    )
    gts = [s.mask for s in samples]
    return batch_scores(
        preds,
        gts,
        empty_union=config.metrics_empty_union,
        aggregation=config.metrics_aggregation,
        iou_class=config.metrics_iou_class,
    )


def _resume_path(out_dir: Path, run_id: str) -> Path:
    return out_dir / "runs" / f"{run_id}.resume.ckpt"


def _save_resume_checkpoint(path: Path, model, app, optimizer, next_epoch, seed):
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "model": model.state_dict(),
            "app": app.state_dict() if app is not None else None,
            "optimizer": optimizer.state_dict(),
            "next_epoch": next_epoch,
            "seed": seed,
        },
        path,
    )


def _save_final_checkpoint(out_dir: Path, run_id: str, model, meta: dict):
    # inference checkpoint: segmenter only, the autoencoder is train-time-only
    runs = out_dir / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    torch.save({"model": model.state_dict()}, runs / f"{run_id}.ckpt")
    (runs / f"{run_id}.json").write_text(json.dumps(meta, indent=2) + "\n")


def train_run(
    config: TrainConfig,
    data: SplitData,
    seed: int,
    weights: WeightPair,
    device="cpu",
    out_dir=None,
    run_id: Optional[str] = None,
    config_hash: str = "",
    resume: bool = False,
    progress=None,
) -> RunResult:
    """Train one seeded run and evaluate the final model on the test split.

    All RNGs are seeded from `seed`; shuffling and augmentation draws are
    keyed by (seed, epoch), so a run resumed from a checkpoint replays
    exactly the batches a straight-through run would have seen.
    """
    device = torch.device(device)
    seed_everything(seed, config.deterministic)
    run_id = run_id or f"run_s{seed}"
    out_path = Path(out_dir) if out_dir is not None else None

    sample = data.train[0]
    h, w = sample.mask.shape
    if sample.channels != config.model.in_channels:
        raise ShapeError(
            f"data has {sample.channels} channels but the model expects "
            f"{config.model.in_channels}"
        )

    model = build_segmenter(config.model).to(device)
    app = build_autoencoder(config.app, input_dim=h * w)
    if app is not None:
        app = app.to(device)

    params = list(model.parameters()) + (list(app.parameters()) if app is not None else [])
    optimizer = torch.optim.Adam(
        params,
        lr=config.lr_max,
        betas=config.adam_betas,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )

    start_epoch = 0
    if resume and out_path is not None:
        ckpt_path = _resume_path(out_path, run_id)
        if ckpt_path.exists():
            payload = torch.load(ckpt_path, map_location=device, weights_only=True)
            model.load_state_dict(payload["model"])
            if app is not None and payload.get("app") is not None:
                app.load_state_dict(payload["app"])
            optimizer.load_state_dict(payload["optimizer"])
            start_epoch = int(payload["next_epoch"])
            if progress:
                progress(f"{run_id}: resuming at epoch {start_epoch}")

    dataset = SegmentationDataset(
        data.train, augment_chain=config.augment_chain, seed=seed, train=True
    )
    generator = torch.Generator()
    loader = DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=True,
        num_workers=0,
        generator=generator,
        drop_last=False,
    )

    log_file = None
    if out_path is not None:
        log_path = out_path / "runs" / f"{run_id}.log"
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_file = log_path.open("a")

    best_val: Optional[float] = None
    steps = 0
    epochs_completed = start_epoch
    try:
        for epoch in range(start_epoch, config.epochs):
            lr = cosine_lr(
                min(epoch, config.t_max), config.lr_max, config.lr_min, config.t_max
            )
            for group in optimizer.param_groups:
                group["lr"] = lr

            model.train()
            if app is not None:
                app.train()
            dataset.set_epoch(epoch)
            generator.manual_seed(seed * _SHUFFLE_STRIDE + epoch)

            loss_sum, batches = 0.0, 0
            for batch_index, (images, masks) in enumerate(loader):
                images, masks = images.to(device), masks.to(device)
                try:
                    logits = model(images)
                    app_out = None
                    if app is not None:
                        fg_prob = F.softmax(logits, dim=1)[:, 1]
                        app_out = app(fg_prob)
                    loss = combined_loss(
                        logits, app_out, masks, weights, config.app.lambda_mse
                    )
                except ValueError as exc:  # non-finite activations surface here
                    raise TrainingDiverged(
                        f"{run_id}: non-finite values at epoch {epoch}, "
                        f"batch {batch_index}, lr {lr:.3e}: {exc}",
                        epoch=epoch, batch=batch_index, lr=lr,
                    ) from exc
                if not torch.isfinite(loss):
                    raise TrainingDiverged(
                        f"{run_id}: non-finite loss {loss.item()} at epoch {epoch}, "
                        f"batch {batch_index}, lr {lr:.3e}",
                        epoch=epoch, batch=batch_index, lr=lr,
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                loss_sum += float(loss.item())
                batches += 1
                steps += 1
                if config.max_steps and steps >= config.max_steps:
                    break

            epochs_completed = epoch + 1
            val_iou = None
            if data.val:
                val_iou, _ = evaluate_model(model, data.val, config, device=device)
                best_val = val_iou if best_val is None else max(best_val, val_iou)
            mean_loss = loss_sum / max(batches, 1)
            line = (
                f"epoch={epoch} lr={lr:.6e} train_loss={mean_loss:.6f} "
                f"val_iou={'nan' if val_iou is None else f'{val_iou:.6f}'}"
            )
            if log_file:
                log_file.write(line + "\n")
                log_file.flush()
            if progress:
                progress(f"{run_id}: {line}")

            if (
                config.checkpoint_every
                and out_path is not None
                and (epoch + 1) % config.checkpoint_every == 0
            ):
                _save_resume_checkpoint(
                    _resume_path(out_path, run_id), model, app, optimizer,
                    next_epoch=epoch + 1, seed=seed,
                )
            if config.max_steps and steps >= config.max_steps:
                break
    finally:
        if log_file:
            log_file.close()

    test_iou, test_acc = evaluate_model(model, data.test, config, device=device)
    if out_path is not None:
        _save_final_checkpoint(
            out_path, run_id, model,
            meta={
                "run_id": run_id,
                "config_hash": config_hash,
                "seed": seed,
                "epochs_completed": epochs_completed,
                "best_val_iou": best_val,
                "test_iou": test_iou,
                "test_pixel_accuracy": test_acc,
            },
        )
    return RunResult(
        seed=seed,
        test_iou=test_iou,
        test_pixel_accuracy=test_acc,
        best_val_iou=best_val,
        epochs_completed=epochs_completed,
        config_hash=config_hash,
    )


def run_seeds(
    config: TrainConfig,
    data: SplitData,
    weights: WeightPair,
    device="cpu",
    out_dir=None,
    jobs: int = 1,
    run_id_prefix: str = "run",
    config_hash: str = "",
    progress=None,
) -> list:
    """One train_run per configured seed; failures become marker results.

    Results come back ordered by seed. A run that raises a package error
    yields a RunResult with `error` set instead of aborting the sweep.
    """
    seeds = sorted(config.seeds)

    def one(seed: int) -> RunResult:
        try:
            return train_run(
                config, data, seed, weights,
                device=device, out_dir=out_dir,
                run_id=f"{run_id_prefix}_s{seed}",
                config_hash=config_hash, progress=progress,
            )
        except SegLabError as exc:
            if progress:
                progress(f"{run_id_prefix}_s{seed}: FAILED: {exc}")
            return RunResult(
                seed=seed, test_iou=None, test_pixel_accuracy=None, best_val_iou=None,
                epochs_completed=0, config_hash=config_hash, error=str(exc),
            )

    if jobs > 1 and not config.deterministic:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return sorted(results, key=lambda r: r.seed)


def aggregate_seed_results(results) -> "tuple":
    """Mean and 95% CI of test IoU over the successful runs of a sweep."""
    values = [r.test_iou for r in results if r.error is None]
    if len(values) < 2:
        raise ValueError(
            f"confidence interval needs at least 2 successful runs, got {len(values)}"
        )
    return mean_ci(values)
