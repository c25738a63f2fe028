"""Experiment configuration: a flat, line-oriented key=value document.

Grammar: one `dotted.key = value` (or `dotted.key: value`) per line;
blank lines and full-line `#` comments are ignored. Keys are validated
against a fixed schema, so typos fail loudly, and every key has a
default echoed back on serialization. Lists are comma-separated; an
empty value means None for optional keys and the empty list for list
keys. The full schema is documented in the README.
"""

import hashlib
import itertools
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .autoencoder import VARIANTS, AutoencoderConfig
from .class_weights import SCHEMES, WeightPair
from .data.augment import CHAIN_OPS
from .engine import TrainConfig
from .errors import ConfigError
from .models.encoders import ENCODER_NAMES, encoder_stage_filters
from .models.nets import ARCHITECTURES

DATA_ROOT_ENV = "SEGLAB_DATA_ROOT"
DATASETS = ("dermatomyositis", "dermofit", "isic2017", "synthetic")

# dataset -> native image channel count, used when model.in_channels = 0 (auto)
_DATASET_CHANNELS = {"dermatomyositis": 1, "synthetic": 1, "dermofit": 3, "isic2017": 3}


@dataclass(frozen=True)
class KeySpec:
    kind: str  # str | opt_str | int | float | bool | list_str | list_int | list_float
    default: object
    choices: Optional[tuple] = None
    required: bool = False


SCHEMA: Mapping[str, KeySpec] = {
    "dataset": KeySpec("str", None, choices=DATASETS, required=True),
    "data.root": KeySpec("opt_str", None),
    "data.manifest": KeySpec("opt_str", None),
    "output_dir": KeySpec("str", "runs"),
    "device": KeySpec("str", "cpu"),
    "deterministic": KeySpec("bool", False),
    "jobs": KeySpec("int", 1),
    "grid.architectures": KeySpec("list_str", ["unet"], choices=ARCHITECTURES),
    "grid.encoders": KeySpec("list_str", ["resnet18"], choices=ENCODER_NAMES),
    "grid.weight_schemes": KeySpec("list_str", ["cdw"], choices=SCHEMES),
    "grid.app_variants": KeySpec("list_str", ["none"], choices=VARIANTS),
    "app.variant": KeySpec("opt_str", None, choices=VARIANTS),
    "app.dims": KeySpec("list_int", []),
    "app.lambda_mse": KeySpec("float", 1.0),
    "train.lr_max": KeySpec("float", 3.6e-4),
    "train.lr_min": KeySpec("float", 3.4e-4),
    "train.weight_decay": KeySpec("float", 1e-5),
    "train.t_max": KeySpec("int", 50),
    "train.epochs": KeySpec("int", 50),
    "train.batch_size": KeySpec("int", 16),
    "train.seeds": KeySpec("list_int", [0, 1, 2, 3, 4]),
    "train.checkpoint_every": KeySpec("int", 0),
    "train.max_steps": KeySpec("int", 0),
    "model.decoder_channels": KeySpec("list_int", [256, 128, 64]),
    "model.se_reduction": KeySpec("int", 16),
    "model.pretrained_weights": KeySpec("opt_str", None),
    "model.in_channels": KeySpec("int", 0),  # 0 = auto from dataset
    "augment.chain": KeySpec("list_str", ["hflip", "vflip", "rnorm"], choices=CHAIN_OPS),
    "ingest.tile_size": KeySpec("int", 480),
    "ingest.lesion_intermediate": KeySpec("int", 480),
    "ingest.lesion_size": KeySpec("int", 224),
    "synthetic.count": KeySpec("int", 32),
    "synthetic.image_size": KeySpec("int", 64),
    "synthetic.seed": KeySpec("int", 1234),
    "synthetic.noise": KeySpec("float", 0.05),
    "split.seed": KeySpec("int", 0),
    "split.ratios": KeySpec("list_float", [0.70, 0.10, 0.20]),
    "weights.zero_floor": KeySpec("bool", False),
    "weights.distribution": KeySpec("list_float", []),
    "weights.cdw": KeySpec("list_float", []),
    "weights.median_frequency": KeySpec("list_float", []),
    "metrics.empty_union": KeySpec("str", "one", choices=("one", "skip")),
    "metrics.aggregation": KeySpec("str", "per_image", choices=("per_image", "pooled")),
    "metrics.iou_class": KeySpec("str", "foreground", choices=("foreground", "mean")),
}


@dataclass(frozen=True)
class GridCell:
    architecture: str
    encoder: str
    weight_scheme: str
    app_variant: str

    @property
    def label(self) -> str:
        return f"{self.architecture}_{self.encoder}_{self.weight_scheme}_{self.app_variant}"


@dataclass(frozen=True, eq=True)
class ExperimentConfig:
    """Fully resolved configuration: every schema key has a value."""

    values: tuple  # sorted (key, hashable-value) pairs

    def get(self, key: str):
        value = dict(self.values)[key]
        return list(value) if isinstance(value, tuple) else value

    # -- common accessors -------------------------------------------------
    @property
    def dataset(self) -> str:
        return self.get("dataset")

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output_dir"))

    @property
    def device(self) -> str:
        return self.get("device")

    @property
    def deterministic(self) -> bool:
        return self.get("deterministic")

    @property
    def jobs(self) -> int:
        # strict determinism forbids concurrent cells
        return 1 if self.deterministic else max(1, self.get("jobs"))

    @property
    def seeds(self) -> tuple:
        return tuple(self.get("train.seeds"))

    def data_root(self) -> Optional[Path]:
        root = self.get("data.root") or os.environ.get(DATA_ROOT_ENV)
        return Path(root) if root else None

    def in_channels(self) -> int:
        configured = self.get("model.in_channels")
        return configured if configured else _DATASET_CHANNELS[self.dataset]

    def grid_cells(self) -> list:
        return [
            GridCell(*combo)
            for combo in itertools.product(
                self.get("grid.architectures"),
                self.get("grid.encoders"),
                self.get("grid.weight_schemes"),
                self.get("grid.app_variants"),
            )
        ]

    def model_config(self, cell: GridCell):
        from .models.nets import SegModelConfig

        return SegModelConfig(
            architecture=cell.architecture,
            encoder=cell.encoder,
            encoder_filters=encoder_stage_filters(cell.encoder),
            decoder_channels=tuple(self.get("model.decoder_channels")),
            se_reduction=self.get("model.se_reduction"),
            pretrained_weights=self.get("model.pretrained_weights"),
            in_channels=self.in_channels(),
        )

    def app_config(self, cell: GridCell) -> AutoencoderConfig:
        dims = self.get("app.dims")
        return AutoencoderConfig(
            variant=cell.app_variant,
            dims=tuple(dims) if dims else None,
            lambda_mse=self.get("app.lambda_mse"),
        )

    def train_config(self, cell: GridCell) -> TrainConfig:
        return TrainConfig(
            model=self.model_config(cell),
            app=self.app_config(cell),
            weight_scheme=cell.weight_scheme,
            lr_max=self.get("train.lr_max"),
            lr_min=self.get("train.lr_min"),
            weight_decay=self.get("train.weight_decay"),
            t_max=self.get("train.t_max"),
            epochs=self.get("train.epochs"),
            batch_size=self.get("train.batch_size"),
            seeds=self.seeds,
            checkpoint_every=self.get("train.checkpoint_every"),
            max_steps=self.get("train.max_steps"),
            augment_chain=tuple(self.get("augment.chain")),
            deterministic=self.deterministic,
            metrics_empty_union=self.get("metrics.empty_union"),
            metrics_aggregation=self.get("metrics.aggregation"),
            metrics_iou_class=self.get("metrics.iou_class"),
        )

    def frozen_weights(self, scheme: str) -> Optional[WeightPair]:
        pair = self.get(f"weights.{scheme}")
        if not pair:
            return None
        return WeightPair(w_background=pair[0], w_foreground=pair[1], scheme=scheme)

    def with_overrides(
        self,
        seeds=None,
        output_dir=None,
        device=None,
        deterministic=None,
        jobs=None,
    ) -> "ExperimentConfig":
        updates = {}
        if seeds is not None:
            updates["train.seeds"] = tuple(int(s) for s in seeds)
        if output_dir is not None:
            updates["output_dir"] = str(output_dir)
        if device is not None:
            updates["device"] = device
        if deterministic is not None:
            updates["deterministic"] = bool(deterministic)
        if jobs is not None:
            updates["jobs"] = int(jobs)
        if not updates:
            return self
        merged = dict(self.values)
        merged.update(updates)
        return _finalize(merged)


def _coerce(key: str, raw: str, spec: KeySpec):
    def fail(expected):
        raise ConfigError(f"config key {key!r}: expected {expected}, got {raw!r}")

    if spec.kind == "str":
        if raw == "":
            fail("a non-empty string")
        return raw
    if spec.kind == "opt_str":
        return raw or None
    if spec.kind == "bool":
        if raw not in ("true", "false"):
            fail("true or false")
        return raw == "true"
    if spec.kind == "int":
        try:
            return int(raw)
        except ValueError:
            fail("an integer")
    if spec.kind == "float":
        try:
            return float(raw)
        except ValueError:
            fail("a number")
    if spec.kind.startswith("list_"):
        if raw == "":
            return []
        items = [tok.strip() for tok in raw.split(",")]
        if spec.kind == "list_str":
            return items
        caster = int if spec.kind == "list_int" else float
        try:
            return [caster(tok) for tok in items]
        except ValueError:
            fail(f"a comma-separated list of {'integers' if caster is int else 'numbers'}")
    raise AssertionError(f"unhandled kind {spec.kind}")


def _check_choices(key: str, value, spec: KeySpec):
    if spec.choices is None or value is None:
        return
    items = value if isinstance(value, (list, tuple)) else [value]
    for item in items:
        if item not in spec.choices:
            raise ConfigError(
                f"config key {key!r}: invalid value {item!r}; "
                f"expected one of {{{', '.join(spec.choices)}}}"
            )


def _hashable(value):
    return tuple(value) if isinstance(value, list) else value


def _finalize(values: dict) -> ExperimentConfig:
    """Normalize, cross-validate, and freeze a raw value mapping."""
    values = dict(values)

    # app.variant is sugar for a singleton grid axis
    variant = values.get("app.variant")
    if variant is not None:
        explicit_grid = values.get("_grid_variants_explicit", False)
        if explicit_grid:
            raise ConfigError(
                "config keys 'app.variant' and 'grid.app_variants' are mutually exclusive"
            )
        values["grid.app_variants"] = (variant,)
        values["app.variant"] = None
    values.pop("_grid_variants_explicit", None)

    cfg_values = {k: _hashable(values[k]) for k in SCHEMA}
    cfg = ExperimentConfig(values=tuple(sorted(cfg_values.items())))

    # cross-field validation
    if cfg.get("train.lr_min") > cfg.get("train.lr_max"):
        raise ConfigError("config key 'train.lr_min': must not exceed train.lr_max")
    for key, minimum in (
        ("train.t_max", 1), ("train.batch_size", 1), ("train.epochs", 0),
        ("jobs", 1), ("synthetic.count", 1), ("ingest.tile_size", 1),
        ("train.checkpoint_every", 0), ("train.max_steps", 0),
    ):
        if cfg.get(key) < minimum:
            raise ConfigError(f"config key {key!r}: must be >= {minimum}, got {cfg.get(key)}")
    if not cfg.get("train.seeds"):
        raise ConfigError("config key 'train.seeds': must list at least one seed")
    ratios = cfg.get("split.ratios")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ConfigError(
            f"config key 'split.ratios': need 3 non-negative ratios summing to 1, got {ratios}"
        )
    if cfg.get("model.in_channels") not in (0, 1, 3):
        raise ConfigError(
            f"config key 'model.in_channels': must be 0 (auto), 1 or 3, "
            f"got {cfg.get('model.in_channels')}"
        )
    for scheme in SCHEMES:
        pair = cfg.get(f"weights.{scheme}")
        if pair and len(pair) != 2:
            raise ConfigError(
                f"config key 'weights.{scheme}': expected two values (background, foreground)"
            )
    dims = cfg.get("app.dims")
    if any(d < 1 for d in dims):
        raise ConfigError(f"config key 'app.dims': widths must be positive, got {dims}")

    # every grid combination must form a valid model/app/train triple
    from .models.nets import validate_model_config

    for cell in cfg.grid_cells():
        try:
            validate_model_config(cfg.train_config(cell).model)
        except (ConfigError, ValueError) as exc:
            raise ConfigError(f"grid cell {cell.label}: {exc}") from exc
    return cfg


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse and fully validate a config document."""
    raw: dict = {}
    explicit_grid_variants = False
    for ln, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        eq, colon = line.find("="), line.find(":")
        positions = [p for p in (eq, colon) if p != -1]
        if not positions:
            raise ConfigError(f"line {ln}: expected 'key = value', got {line!r}")
        sep = min(positions)
        key, value = line[:sep].strip(), line[sep + 1 :].strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {ln}: unknown config key {key!r}")
        if key in raw:
            raise ConfigError(f"line {ln}: duplicate config key {key!r}")
        raw[key] = _coerce(key, value, SCHEMA[key])
        _check_choices(key, raw[key], SCHEMA[key])
        if key == "grid.app_variants":
            explicit_grid_variants = True

    for key, spec in SCHEMA.items():
        if spec.required and key not in raw:
            raise ConfigError(f"missing required config key {key!r}")
        raw.setdefault(key, spec.default)
    raw["_grid_variants_explicit"] = explicit_grid_variants
    return _finalize(raw)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def replace_values(cfg: ExperimentConfig, updates: Mapping[str, object]) -> ExperimentConfig:
    """A new config with the given keys replaced; re-runs all validation."""
    merged = dict(cfg.values)
    for key, value in updates.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = _hashable(value)
    return _finalize(merged)


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form: every key, sorted, defaults included."""
    lines = [f"{key} = {_render(value)}" for key, value in cfg.values]
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """Digest of the canonical serialization: reorderings and comments don't matter."""
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()
