"""Experiment pipeline: prepare data, derive class weights, train the grid, report.

Every stage is callable on its own and leaves its artifacts under the
configured output directory:

    cache/            paired-PNG sample cache + splits.tsv + cache_meta.json
    runs/             per-run checkpoints, logs, and metadata sidecars
    weights.tsv       one row per weighting scheme (background, foreground)
    resolved_config.cfg   canonical config with the computed weights frozen in
    results.csv       one row per completed (grid cell, seed) run
    failures.csv      runs that raised, with the error message
    summary.csv       per-cell mean IoU with 95% CI half-widths
    tables.txt/.tsv   formatted summary tables
    plot_<dataset>.png  grouped-bar chart of the summary
    manifest.json     config hash, package version, run counts

Stages auto-run their prerequisites (train prepares the cache if missing),
and training resumes idempotently: (cell, seed) pairs already present in
results.csv are skipped, so a rerun after completion trains nothing.
"""

import csv
import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import __version__
from .class_weights import WeightPair, all_scheme_weights, compute_pixel_stats
from .config import ExperimentConfig, config_hash, replace_values, serialize_config
from .data import (
    ISIC_SPLIT_SIZES,
    CacheEntry,
    extract_dapi_channel,
    generate_blob_dataset,
    isic_positional_split,
    load_binary_mask_png,
    load_cached_sample,
    load_lesion_pair,
    load_slide_tiff,
    normalize_intensity,
    read_manifest,
    read_split_manifest,
    resize_lesion_image,
    save_sample_png,
    split_dataset,
    tile_image,
    write_split_manifest,
)
from .engine import SplitData, train_run
from .errors import ConfigError, SegLabError
from .metrics import aggregate_results, emit_table, plot_summary

RESULTS_COLUMNS = (
    "dataset",
    "architecture",
    "encoder",
    "weight_scheme",
    "app_variant",
    "seed",
    "test_iou",
    "test_pixel_accuracy",
)
FAILURE_COLUMNS = RESULTS_COLUMNS[:6] + ("error",)
SUMMARY_COLUMNS = RESULTS_COLUMNS[:5] + ("mean_iou", "ci_half_width", "n")

Progress = Optional[Callable[[str], None]]


def _say(progress: Progress, message: str) -> None:
    if progress is not None:
        progress(message)


@dataclass(frozen=True)
class Workspace:
    """Resolved artifact paths under one output directory."""

    root: Path

    @property
    def cache_dir(self) -> Path:
        return self.root / "cache"

    @property
    def runs_dir(self) -> Path:
        return self.root / "runs"

    @property
    def split_manifest(self) -> Path:
        return self.cache_dir / "splits.tsv"

    @property
    def cache_meta(self) -> Path:
        return self.cache_dir / "cache_meta.json"

    @property
    def weights_tsv(self) -> Path:
        return self.root / "weights.tsv"

    @property
    def resolved_config(self) -> Path:
        return self.root / "resolved_config.cfg"

    @property
    def results_csv(self) -> Path:
        return self.root / "results.csv"

    @property
    def failures_csv(self) -> Path:
        return self.root / "failures.csv"

    @property
    def summary_csv(self) -> Path:
        return self.root / "summary.csv"

    @property
    def tables_txt(self) -> Path:
        return self.root / "tables.txt"

    @property
    def tables_tsv(self) -> Path:
        return self.root / "tables.tsv"

    @property
    def train_meta(self) -> Path:
        return self.runs_dir / "train_meta.json"

    @property
    def manifest_json(self) -> Path:
        return self.root / "manifest.json"

    def ensure(self) -> "Workspace":
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        return self

    def artifact(self, name: str) -> Path:
        """Look up a published artifact by its public name."""
        known = {
            "results.csv": self.results_csv,
            "failures.csv": self.failures_csv,
            "summary.csv": self.summary_csv,
            "tables.txt": self.tables_txt,
            "tables.tsv": self.tables_tsv,
            "weights.tsv": self.weights_tsv,
            "resolved_config.cfg": self.resolved_config,
            "manifest.json": self.manifest_json,
            "splits.tsv": self.split_manifest,
        }
        if name not in known:
            raise ConfigError(f"unknown artifact {name!r}; expected one of {sorted(known)}")
        return known[name]


def workspace(cfg: ExperimentConfig) -> Workspace:
    return Workspace(root=cfg.output_dir)


# --------------------------------------------------------------------------
# prepare: ingest raw inputs into the PNG sample cache
# --------------------------------------------------------------------------

_CACHE_KEY_FIELDS = ("dataset", "data.", "ingest.", "synthetic.", "split.")


def _cache_key(cfg: ExperimentConfig) -> str:
    lines = [
        f"{key} = {value!r}"
        for key, value in cfg.values
        if key == "dataset" or any(key.startswith(p) for p in _CACHE_KEY_FIELDS[1:])
    ]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _require_manifest(cfg: ExperimentConfig) -> list:
    manifest = cfg.get("data.manifest")
    if not manifest:
        raise ConfigError(
            f"dataset {cfg.dataset!r} needs 'data.manifest' pointing at its sample list"
        )
    path = Path(manifest)
    if not path.is_absolute() and cfg.data_root() is not None:
        path = cfg.data_root() / path
    return read_manifest(path, data_root=cfg.data_root())


def _source_splits(cfg: ExperimentConfig, entries: list, source_ids: list) -> dict:
    """Split assignment per source: fixed tags when complete, else seeded ratios."""
    tagged = {e.image_path.stem: e.split for e in entries if e.split}
    if len(tagged) == len(entries):
        return tagged
    if tagged:
        raise ConfigError(
            "manifest mixes tagged and untagged splits; tag every row or none"
        )
    return split_dataset(source_ids, ratios=tuple(cfg.get("split.ratios")), seed=cfg.get("split.seed"))


def _prepare_synthetic(cfg: ExperimentConfig) -> list:
    samples = generate_blob_dataset(
        count=cfg.get("synthetic.count"),
        image_size=cfg.get("synthetic.image_size"),
        seed=cfg.get("synthetic.seed"),
        noise=cfg.get("synthetic.noise"),
    )
    mapping = split_dataset(
        [s.source_id for s in samples],
        ratios=tuple(cfg.get("split.ratios")),
        seed=cfg.get("split.seed"),
    )
    return [replace(s, split=mapping[s.source_id]) for s in samples]


def _prepare_slides(cfg: ExperimentConfig, progress: Progress) -> list:
    entries = _require_manifest(cfg)
    tile_size = cfg.get("ingest.tile_size")
    mapping = _source_splits(cfg, entries, [e.image_path.stem for e in entries])
    samples: list = []
    for entry in entries:
        slide = load_slide_tiff(entry.image_path)
        channel = slide.channels[0] if len(slide.channels) == 1 else extract_dapi_channel(slide)
        image = normalize_intensity(channel)
        mask = load_binary_mask_png(entry.mask_path)
        tiles, _ = tile_image(image, mask, tile_size, source_id=entry.image_path.stem)
        split = mapping[entry.image_path.stem]
        samples.extend(replace(t, split=split) for t in tiles)
        _say(progress, f"prepared {entry.image_path.stem}: {len(tiles)} tiles -> {split}")
    return samples


def _prepare_lesions(cfg: ExperimentConfig, progress: Progress) -> list:
    entries = _require_manifest(cfg)
    tagged = [e for e in entries if e.split]
    if len(tagged) == len(entries):
        mapping = {e.image_path.stem: e.split for e in entries}
    elif tagged:
        raise ConfigError("manifest mixes tagged and untagged splits; tag every row or none")
    elif cfg.dataset == "isic2017" and len(entries) == sum(ISIC_SPLIT_SIZES):
        # the canonical release is split by position: 2000 train / 150 val / 600 test
        order = isic_positional_split(len(entries))
        mapping = {e.image_path.stem: s for e, s in zip(entries, order)}
    else:
        mapping = split_dataset(
            [e.image_path.stem for e in entries],
            ratios=tuple(cfg.get("split.ratios")),
            seed=cfg.get("split.seed"),
        )
    samples = []
    for entry in entries:
        image, mask = load_lesion_pair(entry.image_path, entry.mask_path)
        sample = resize_lesion_image(
            image,
            mask,
            source_id=entry.image_path.stem,
            intermediate=cfg.get("ingest.lesion_intermediate"),
            final=cfg.get("ingest.lesion_size"),
        )
        samples.append(replace(sample, split=mapping[entry.image_path.stem]))
    _say(progress, f"prepared {len(samples)} lesion images")
    return samples


def prepare_data(cfg: ExperimentConfig, progress: Progress = None) -> dict:
    """Ingest the configured dataset into the PNG cache; reuses a fresh cache."""
    ws = workspace(cfg).ensure()
    key = _cache_key(cfg)
    if ws.cache_meta.exists() and ws.split_manifest.exists():
        meta = json.loads(ws.cache_meta.read_text())
        if meta.get("cache_key") == key:
            _say(progress, f"cache up to date ({meta['samples']} samples); skipping ingest")
            meta["reused"] = True
            return meta

    if cfg.dataset == "synthetic":
        samples = _prepare_synthetic(cfg)
    elif cfg.dataset == "dermatomyositis":
        samples = _prepare_slides(cfg, progress)
    else:
        samples = _prepare_lesions(cfg, progress)

    # regenerating: drop any stale cache files from a previous configuration
    for old in ws.cache_dir.glob("*.png"):
        old.unlink()

    entries = []
    counts: Dict[str, int] = {}
    for sample in samples:
        image_path = save_sample_png(sample, ws.cache_dir)
        entries.append(CacheEntry(image_path=image_path, split=sample.split, dataset=cfg.dataset))
        counts[sample.split] = counts.get(sample.split, 0) + 1
    write_split_manifest(ws.split_manifest, entries)

    meta = {
        "cache_key": key,
        "dataset": cfg.dataset,
        "samples": len(samples),
        "splits": counts,
        "reused": False,
    }
    ws.cache_meta.write_text(json.dumps(meta, indent=2) + "\n")
    _say(progress, f"cached {len(samples)} samples ({counts})")
    return meta


def load_split_data(cfg: ExperimentConfig) -> SplitData:
    """Read the prepared cache back as train/val/test sample lists."""
    ws = workspace(cfg)
    entries = read_split_manifest(ws.split_manifest)
    buckets: Dict[str, list] = {"train": [], "val": [], "test": []}
    for entry in entries:
        buckets[entry.split].append(load_cached_sample(entry))
    return SplitData(train=buckets["train"], val=buckets["val"], test=buckets["test"])


# --------------------------------------------------------------------------
# weights: class statistics over the training split
# --------------------------------------------------------------------------


def compute_dataset_weights(cfg: ExperimentConfig, progress: Progress = None) -> Dict[str, WeightPair]:
    """Compute every scheme's weight pair from the training-split masks.

    Writes weights.tsv and a resolved_config.cfg with the pairs frozen in,
    so later stages (and other machines) can reuse them without the data.
    """
    prepare_data(cfg, progress)
    ws = workspace(cfg)
    data = load_split_data(cfg)
    stats = compute_pixel_stats([s.mask for s in data.train])
    pairs = all_scheme_weights(stats, zero_floor=cfg.get("weights.zero_floor"))

    lines = ["scheme\tw_background\tw_foreground"]
    for scheme, pair in pairs.items():
        lines.append(f"{scheme}\t{pair.w_background!r}\t{pair.w_foreground!r}")
        _say(
            progress,
            f"{scheme}: w_background={pair.w_background:.4f} w_foreground={pair.w_foreground:.4f}",
        )
    ws.weights_tsv.write_text("\n".join(lines) + "\n")

    resolved = replace_values(
        cfg,
        {
            f"weights.{scheme}": (pair.w_background, pair.w_foreground)
            for scheme, pair in pairs.items()
        },
    )
    ws.resolved_config.write_text(serialize_config(resolved))
    return pairs


def _resolve_weights(cfg: ExperimentConfig, progress: Progress) -> Dict[str, WeightPair]:
    """Frozen pairs from the config when present, else computed from the cache."""
    needed = set(cfg.get("grid.weight_schemes"))
    frozen = {scheme: cfg.frozen_weights(scheme) for scheme in needed}
    if all(frozen.values()):
        return frozen
    return compute_dataset_weights(cfg, progress)


# --------------------------------------------------------------------------
# train: the (architecture x encoder x scheme x variant) x seeds grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingSummary:
    trained: int
    skipped: int
    failed: int

    def as_dict(self) -> dict:
        return {"trained": self.trained, "skipped": self.skipped, "failed": self.failed}


def _ensure_csv(path: Path, columns) -> None:
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            csv.writer(fh).writerow(columns)


def _read_result_keys(path: Path) -> set:
    if not path.exists():
        return set()
    with path.open(newline="") as fh:
        return {
            (row["dataset"], row["architecture"], row["encoder"],
             row["weight_scheme"], row["app_variant"], row["seed"])
            for row in csv.DictReader(fh)
        }


def read_results(path: Path) -> List[dict]:
    """results.csv rows with numeric fields converted."""
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["seed"] = int(row["seed"])
        row["test_iou"] = float(row["test_iou"])
        row["test_pixel_accuracy"] = float(row["test_pixel_accuracy"])
    return rows


def run_training(
    cfg: ExperimentConfig,
    progress: Progress = None,
    weight_pairs: Optional[Dict[str, WeightPair]] = None,
) -> TrainingSummary:
    """Train every (grid cell, seed) pair not already present in results.csv.

    Independent runs are scheduled concurrently up to the configured job
    bound (strict determinism forces sequential execution). Each completed
    run appends its row immediately, so an interrupted grid keeps its
    partial results and a rerun picks up where it stopped.
    """
    prepare_data(cfg, progress)
    ws = workspace(cfg)
    data = load_split_data(cfg)
    weights = weight_pairs or _resolve_weights(cfg, progress)
    chash = config_hash(cfg)

    done = _read_result_keys(ws.results_csv)
    todo, skipped = [], 0
    for cell in cfg.grid_cells():
        for seed in cfg.seeds:
            key = (cfg.dataset, cell.architecture, cell.encoder,
                   cell.weight_scheme, cell.app_variant, str(seed))
            if key in done:
                skipped += 1
            else:
                todo.append((cell, seed))
    _say(progress, f"grid: {len(todo)} runs to train, {skipped} already complete")

    _ensure_csv(ws.results_csv, RESULTS_COLUMNS)
    lock = threading.Lock()
    outcomes = []

    def execute(task) -> str:
        cell, seed = task
        run_id = f"{cfg.dataset}_{cell.label}_s{seed}"
        try:
            result = train_run(
                cfg.train_config(cell),
                data,
                seed,
                weights[cell.weight_scheme],
                device=cfg.device,
                out_dir=ws.root,
                run_id=run_id,
                config_hash=chash,
                resume=True,
                progress=progress,
            )
        except SegLabError as exc:
            with lock:
                _ensure_csv(ws.failures_csv, FAILURE_COLUMNS)
                with ws.failures_csv.open("a", newline="") as fh:
                    csv.writer(fh).writerow(
                        [cfg.dataset, cell.architecture, cell.encoder,
                         cell.weight_scheme, cell.app_variant, seed, str(exc)]
                    )
            _say(progress, f"{run_id}: FAILED: {exc}")
            return "failed"
        with lock:
            with ws.results_csv.open("a", newline="") as fh:
                csv.writer(fh).writerow(
                    [cfg.dataset, cell.architecture, cell.encoder,
                     cell.weight_scheme, cell.app_variant, seed,
                     repr(result.test_iou), repr(result.test_pixel_accuracy)]
                )
        _say(
            progress,
            f"{run_id}: test_iou={result.test_iou:.4f} "
            f"test_pixel_accuracy={result.test_pixel_accuracy:.4f}",
        )
        return "trained"

    if cfg.jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(execute, todo))
    else:
        outcomes = [execute(task) for task in todo]

    summary = TrainingSummary(
        trained=outcomes.count("trained"),
        skipped=skipped,
        failed=outcomes.count("failed"),
    )
    ws.train_meta.parent.mkdir(parents=True, exist_ok=True)
    ws.train_meta.write_text(json.dumps(summary.as_dict(), indent=2) + "\n")
    _say(
        progress,
        f"training done: {summary.trained} trained, "
        f"{summary.skipped} skipped, {summary.failed} failed",
    )
    return summary


# --------------------------------------------------------------------------
# report: aggregate, tabulate, plot
# --------------------------------------------------------------------------


def write_reports(cfg: ExperimentConfig, progress: Progress = None) -> dict:
    """Aggregate results.csv into summary.csv, tables, plots, and manifest.json."""
    ws = workspace(cfg)
    rows = read_results(ws.results_csv)
    if not rows:
        raise ConfigError(f"no results found under {ws.root}; run training first")
    reports = aggregate_results(rows)

    with ws.summary_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for rep in reports:
            writer.writerow(
                [rep.dataset, rep.architecture, rep.encoder, rep.weight_scheme,
                 rep.app_variant, repr(rep.mean_iou),
                 "" if rep.ci_half_width is None else repr(rep.ci_half_width), rep.n]
            )

    ws.tables_txt.write_text(emit_table(reports, layout="by_encoder", fmt="grid"))
    ws.tables_tsv.write_text(emit_table(reports, layout="by_encoder", fmt="tsv"))
    plots = plot_summary(reports, ws.root)

    train_meta = {}
    if ws.train_meta.exists():
        train_meta = json.loads(ws.train_meta.read_text())
    manifest = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "results": len(rows),
        "groups": len(reports),
        "trained": train_meta.get("trained", 0),
        "skipped": train_meta.get("skipped", 0),
        "failed": train_meta.get("failed", 0),
        "plots": [p.name for p in plots],
    }
    ws.manifest_json.write_text(json.dumps(manifest, indent=2) + "\n")
    _say(progress, f"reports written: {len(reports)} summary rows, {len(plots)} plots")
    return manifest


# --------------------------------------------------------------------------
# the whole pipeline
# --------------------------------------------------------------------------

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ALL_FAILED = 2
EXIT_PARTIAL = 3


def _training_exit_code(ws: Workspace, summary: TrainingSummary) -> int:
    if summary.failed == 0:
        return EXIT_OK
    if summary.trained > 0 or summary.skipped > 0 or read_results(ws.results_csv):
        return EXIT_PARTIAL
    return EXIT_ALL_FAILED


def run_experiment(cfg: ExperimentConfig, progress: Progress = None) -> int:
    """prepare -> weights -> grid training -> reports. Returns the process exit code."""
    ws = workspace(cfg)
    prepare_data(cfg, progress)
    pairs = compute_dataset_weights(cfg, progress)
    summary = run_training(cfg, progress, weight_pairs=pairs)
    code = _training_exit_code(ws, summary)
    if read_results(ws.results_csv):
        write_reports(cfg, progress)
    return code


def execute_stage(kind: str, cfg: ExperimentConfig, progress: Progress = None):
    """Run one named stage; returns (exit_code, JSON-safe result payload)."""
    ws = workspace(cfg)
    if kind == "prepare":
        return EXIT_OK, prepare_data(cfg, progress)
    if kind == "weights":
        pairs = compute_dataset_weights(cfg, progress)
        return EXIT_OK, {
            scheme: {"w_background": p.w_background, "w_foreground": p.w_foreground}
            for scheme, p in pairs.items()
        }
    if kind == "train":
        summary = run_training(cfg, progress)
        return _training_exit_code(ws, summary), summary.as_dict()
    if kind == "report":
        return EXIT_OK, write_reports(cfg, progress)
    if kind == "all":
        code = run_experiment(cfg, progress)
        manifest = {}
        if ws.manifest_json.exists():
            manifest = json.loads(ws.manifest_json.read_text())
        return code, manifest
    raise ConfigError(f"unknown stage {kind!r}; expected prepare|weights|train|report|all")
