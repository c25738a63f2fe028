"""Segmentation metrics, multi-seed aggregation, and report emission."""

import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats as scipy_stats

from .errors import DataFormatError, ShapeError

MISSING_CELL = "—"  # placeholder rendered for absent table cells

VARIANT_ORDER = ("none", "relu", "gelu")
VARIANT_HEADERS = {"none": "baseline", "relu": "relu", "gelu": "gelu"}
HEADER_VARIANTS = {v: k for k, v in VARIANT_HEADERS.items()}

ENCODER_ORDER = ("tiny", "resnet18", "resnet34", "resnet50", "resnet101")
SCHEME_ORDER = ("distribution", "cdw", "median_frequency")


def _check_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    for name, arr in (("pred", pred), ("gt", gt)):
        if ((arr != 0) & (arr != 1)).any():
            raise DataFormatError(f"{name} mask must be binary")
    return pred.astype(bool), gt.astype(bool)


def iou(pred, gt, empty_union: str = "one", iou_class: str = "foreground") -> float:
    """Intersection-over-union of two binary masks.

    Foreground IoU by default; iou_class="mean" averages foreground and
    background IoU. When both masks are empty the union is zero:
    empty_union="one" scores the pair 1.0 (agreement on absence),
    "skip" returns NaN so aggregation can drop the sample.
    """
    p, g = _check_pair(pred, gt)
    if iou_class == "mean":
        return 0.5 * (
            iou(pred, gt, empty_union=empty_union)
            + iou(1 - np.asarray(pred), 1 - np.asarray(gt), empty_union=empty_union)
        )
    if iou_class != "foreground":
        raise ValueError(f"iou_class must be foreground or mean, got {iou_class!r}")
    union = int(np.count_nonzero(p | g))
    if union == 0:
        if empty_union == "one":
            return 1.0
        if empty_union == "skip":
            return float("nan")
        raise ValueError(f"empty_union must be one or skip, got {empty_union!r}")
    return int(np.count_nonzero(p & g)) / union


def pixel_accuracy(pred, gt) -> float:
    """Fraction of pixels where pred equals gt."""
    p, g = _check_pair(pred, gt)
    return int(np.count_nonzero(p == g)) / p.size


def batch_scores(
    preds,
    gts,
    empty_union: str = "one",
    aggregation: str = "per_image",
    iou_class: str = "foreground",
):
    """Aggregate (IoU, pixel accuracy) over a list of mask pairs.

    per_image averages per-sample scores (NaN IoUs from empty_union="skip"
    are dropped); pooled sums intersections and unions over the whole set
    before dividing.
    """
    if len(preds) != len(gts):
        raise ShapeError(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not preds:
        raise ValueError("no samples to score")
    if aggregation == "per_image":
        ious = [iou(p, g, empty_union, iou_class) for p, g in zip(preds, gts)]
        ious = [v for v in ious if not math.isnan(v)]
        mean_iou = sum(ious) / len(ious) if ious else 1.0
        accs = [pixel_accuracy(p, g) for p, g in zip(preds, gts)]
        return mean_iou, sum(accs) / len(accs)
    if aggregation == "pooled":
        inter = union = correct = total = 0
        for pred, gt in zip(preds, gts):
            p, g = _check_pair(pred, gt)
            inter += int(np.count_nonzero(p & g))
            union += int(np.count_nonzero(p | g))
            correct += int(np.count_nonzero(p == g))
            total += p.size
        pooled_iou = inter / union if union else (1.0 if empty_union == "one" else float("nan"))
        return pooled_iou, correct / total
    raise ValueError(f"aggregation must be per_image or pooled, got {aggregation!r}")


class MeanCI(tuple):
    """(mean, half_width) of a Student-t confidence interval."""

    def __new__(cls, mean, half_width, n):
        obj = super().__new__(cls, (mean, half_width))
        obj.n = n
        return obj

    @property
    def mean(self):
        return self[0]

    @property
    def half_width(self):
        return self[1]


def mean_ci(values, level: float = 0.95) -> MeanCI:
    """Mean and Student-t confidence half-width of a sample.

    half_width = t_{(1+level)/2, n-1} * s / sqrt(n) with the sample
    standard deviation s. Needs at least two values.
    """
    values = [float(v) for v in values]
    n = len(values)
    if n < 2:
        raise ValueError(f"confidence interval needs at least 2 values, got {n}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0,1), got {level}")
    mean = statistics.fmean(values)
    s = statistics.stdev(values)
    t = scipy_stats.t.ppf(0.5 * (1.0 + level), n - 1)
    return MeanCI(mean, t * s / math.sqrt(n), n)


@dataclass(frozen=True)
class MetricReport:
    """Aggregated test IoU for one (dataset, arch, encoder, scheme, variant) cell."""

    dataset: str
    architecture: str
    encoder: str
    weight_scheme: str
    app_variant: str
    per_seed: tuple
    mean_iou: float
    ci_half_width: Optional[float]
    n: int

    def __post_init__(self):
        if self.n != len(self.per_seed):
            raise ValueError(f"n={self.n} but {len(self.per_seed)} per-seed entries")
        ious = [v for _, v in self.per_seed]
        if ious and not (min(ious) - 1e-12 <= self.mean_iou <= max(ious) + 1e-12):
            raise ValueError("mean_iou outside the per-seed range")
        if self.ci_half_width is not None and self.ci_half_width < 0:
            raise ValueError("ci_half_width must be non-negative")


def aggregate_results(rows) -> list:
    """Group per-seed result rows into MetricReports.

    rows are mappings with the results.csv columns. Cells with a single
    seed get ci_half_width=None (a CI over one value is refused).
    """
    groups = {}
    for row in rows:
        key = (
            row["dataset"],
            row["architecture"],
            row["encoder"],
            row["weight_scheme"],
            row["app_variant"],
        )
        groups.setdefault(key, []).append((int(row["seed"]), float(row["test_iou"])))
    reports = []
    for key in sorted(groups):
        per_seed = tuple(sorted(groups[key]))
        ious = [v for _, v in per_seed]
        if len(ious) >= 2:
            ci = mean_ci(ious)
            mean, half = ci.mean, ci.half_width
        else:
            mean, half = ious[0], None
        reports.append(
            MetricReport(
                dataset=key[0],
                architecture=key[1],
                encoder=key[2],
                weight_scheme=key[3],
                app_variant=key[4],
                per_seed=per_seed,
                mean_iou=mean,
                ci_half_width=half,
                n=len(per_seed),
            )
        )
    return reports


def _ordered(values, canon):
    known = [v for v in canon if v in values]
    return known + sorted(v for v in values if v not in canon)


def emit_table(reports, layout: str = "by_encoder", fmt: str = "grid") -> str:
    """Render reports in the published-table shape.

    One block per group; rows are encoders (layout="by_encoder", grouped
    by dataset/architecture/scheme) or weight schemes (layout="by_scheme",
    grouped by dataset/architecture/encoder). Columns are the autoencoder
    variants (baseline / relu / gelu); cells show mean IoU to 4 decimals,
    absent cells render as a dash placeholder. fmt="grid" aligns columns,
    fmt="tsv" tab-separates them.
    """
    if not reports:
        raise ValueError("no reports to tabulate")
    if layout == "by_encoder":
        block_of = lambda r: (r.dataset, r.architecture, r.weight_scheme)
        block_keys = ("dataset", "architecture", "weight_scheme")
        row_of = lambda r: r.encoder
        row_header = "encoder"
        row_canon = ENCODER_ORDER
    elif layout == "by_scheme":
        block_of = lambda r: (r.dataset, r.architecture, r.encoder)
        block_keys = ("dataset", "architecture", "encoder")
        row_of = lambda r: r.weight_scheme
        row_header = "weight_scheme"
        row_canon = SCHEME_ORDER
    else:
        raise ValueError(f"layout must be by_encoder or by_scheme, got {layout!r}")

    blocks = {}
    for r in reports:
        cell = blocks.setdefault(block_of(r), {})
        pos = (row_of(r), r.app_variant)
        if pos in cell:
            raise ValueError(f"duplicate table cell for {block_of(r)} / {pos}")
        cell[pos] = r.mean_iou

    chunks = []
    headers = [_h for _h in (row_header,)] + [VARIANT_HEADERS[v] for v in VARIANT_ORDER]
    for block_key in sorted(blocks):
        cell = blocks[block_key]
        title = "# " + " ".join(f"{k}={v}" for k, v in zip(block_keys, block_key))
        rows = [headers]
        for row_name in _ordered({rn for rn, _ in cell}, row_canon):
            rendered = [row_name]
            for variant in VARIANT_ORDER:
                value = cell.get((row_name, variant))
                rendered.append(MISSING_CELL if value is None else f"{value:.4f}")
            rows.append(rendered)
        if fmt == "tsv":
            body = "\n".join("\t".join(row) for row in rows)
        elif fmt == "grid":
            widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
            body = "\n".join(
                "  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip() for row in rows
            )
        else:
            raise ValueError(f"fmt must be grid or tsv, got {fmt!r}")
        chunks.append(title + "\n" + body)
    return "\n\n".join(chunks) + "\n"


def parse_table(text: str) -> dict:
    """Re-parse emit_table output into {(block..., row, variant): value}."""
    out = {}
    block = None
    header = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            block = tuple(tok.split("=", 1)[1] for tok in line[1:].split())
            header = None
            continue
        cols = line.split("\t") if "\t" in line else line.split()
        if header is None:
            header = [HEADER_VARIANTS.get(c, c) for c in cols[1:]]
            continue
        row_name = cols[0]
        for variant, cell in zip(header, cols[1:]):
            if cell != MISSING_CELL:
                out[block + (row_name, variant)] = float(cell)
    return out


def plot_summary(reports, out_dir) -> list:
    """One bar-chart PNG per dataset: encoders × variants, CI error bars."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    by_dataset = {}
    for r in reports:
        by_dataset.setdefault(r.dataset, []).append(r)
    for dataset in sorted(by_dataset):
        reps = by_dataset[dataset]
        panels = sorted({(r.architecture, r.weight_scheme) for r in reps})
        fig, axes = plt.subplots(
            len(panels), 1, figsize=(7, 3.2 * len(panels)), squeeze=False
        )
        for ax, (arch, scheme) in zip(axes[:, 0], panels):
            sub = [r for r in reps if (r.architecture, r.weight_scheme) == (arch, scheme)]
            encoders = _ordered({r.encoder for r in sub}, ENCODER_ORDER)
            x = np.arange(len(encoders))
            width = 0.8 / len(VARIANT_ORDER)
            for vi, variant in enumerate(VARIANT_ORDER):
                vals, errs, xs = [], [], []
                for ei, enc in enumerate(encoders):
                    match = [
                        r for r in sub if r.encoder == enc and r.app_variant == variant
                    ]
                    if match:
                        xs.append(x[ei] + (vi - 1) * width)
                        vals.append(match[0].mean_iou)
                        errs.append(match[0].ci_half_width or 0.0)
                if xs:
                    ax.bar(xs, vals, width=width, yerr=errs, capsize=2,
                           label=VARIANT_HEADERS[variant])
            ax.set_xticks(x)
            ax.set_xticklabels(encoders)
            ax.set_ylabel("test IoU")
            ax.set_title(f"{dataset}: {arch} / {scheme}")
            ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"plot_{dataset}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths
