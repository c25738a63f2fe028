"""Metric correctness against brute-force oracles plus aggregation/report behavior."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seglab.errors import DataFormatError, ShapeError
from seglab.metrics import (
    MISSING_CELL,
    MeanCI,
    MetricReport,
    aggregate_results,
    batch_scores,
    emit_table,
    iou,
    mean_ci,
    parse_table,
    pixel_accuracy,
    plot_summary,
)

# -- brute-force oracles -----------------------------------------------------


def brute_iou(pred, gt):
    """Double-loop foreground IoU; None when the union is empty."""
    inter = union = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p, g = int(pred[i, j]), int(gt[i, j])
            if p == 1 and g == 1:
                inter += 1
            if p == 1 or g == 1:
                union += 1
    return None if union == 0 else inter / union


def brute_accuracy(pred, gt):
    correct = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            if int(pred[i, j]) == int(gt[i, j]):
                correct += 1
    return correct / pred.size


def random_mask(rng, shape=(8, 8), p=0.5):
    return (rng.random(shape) < p).astype(np.uint8)


masks_8x8 = arrays(np.uint8, (8, 8), elements=st.integers(0, 1))


# -- iou / pixel_accuracy ------------------------------------------------------


def test_iou_matches_brute_force_on_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(300):
        pred = random_mask(rng, p=rng.random())
        gt = random_mask(rng, p=rng.random())
        expected = brute_iou(pred, gt)
        if expected is None:
            assert iou(pred, gt, empty_union="one") == 1.0
            assert math.isnan(iou(pred, gt, empty_union="skip"))
        else:
            assert iou(pred, gt) == expected
        assert pixel_accuracy(pred, gt) == brute_accuracy(pred, gt)


def test_iou_known_values():
    pred = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    gt = np.array([[1, 0], [1, 0]], dtype=np.uint8)
    assert iou(pred, gt) == pytest.approx(1 / 3)
    assert pixel_accuracy(pred, gt) == pytest.approx(0.5)


def test_iou_identical_masks_is_one():
    rng = np.random.default_rng(0)
    m = random_mask(rng)
    assert iou(m, m) == 1.0
    assert pixel_accuracy(m, m) == 1.0


def test_iou_disjoint_masks_is_zero():
    pred = np.array([[1, 0]], dtype=np.uint8)
    gt = np.array([[0, 1]], dtype=np.uint8)
    assert iou(pred, gt) == 0.0


def test_iou_empty_union_modes():
    z = np.zeros((4, 4), dtype=np.uint8)
    assert iou(z, z, empty_union="one") == 1.0
    assert math.isnan(iou(z, z, empty_union="skip"))
    with pytest.raises(ValueError):
        iou(z, z, empty_union="bogus")


def test_iou_mean_class_averages_both_classes():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pred, gt = random_mask(rng), random_mask(rng)
        fg = brute_iou(pred, gt)
        bg = brute_iou(1 - pred, 1 - gt)
        if fg is None or bg is None:
            continue
        assert iou(pred, gt, iou_class="mean") == pytest.approx(0.5 * (fg + bg))


def test_iou_input_validation():
    with pytest.raises(ShapeError):
        iou(np.zeros((2, 2), dtype=np.uint8), np.zeros((3, 3), dtype=np.uint8))
    with pytest.raises(DataFormatError):
        iou(np.full((2, 2), 2, dtype=np.uint8), np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        iou(np.zeros((2, 2), np.uint8), np.zeros((2, 2), np.uint8), iou_class="bogus")


@given(masks_8x8, masks_8x8)
@settings(max_examples=100)
def test_iou_never_exceeds_pixel_accuracy(pred, gt):
    # acc = (TP+TN)/total >= TP/(TP+FP+FN) = foreground IoU
    score = iou(pred, gt, empty_union="one")
    acc = pixel_accuracy(pred, gt)
    assert 0.0 <= score <= 1.0
    assert score <= acc + 1e-12


@given(masks_8x8, masks_8x8)
@settings(max_examples=100)
def test_iou_is_symmetric(pred, gt):
    assert iou(pred, gt, empty_union="one") == iou(gt, pred, empty_union="one")


# -- batch aggregation ---------------------------------------------------------


def test_batch_scores_per_image_is_mean_of_singles():
    rng = np.random.default_rng(5)
    preds = [random_mask(rng) for _ in range(6)]
    gts = [random_mask(rng) for _ in range(6)]
    mean_iou_val, mean_acc = batch_scores(preds, gts)
    singles = [iou(p, g) for p, g in zip(preds, gts)]
    accs = [pixel_accuracy(p, g) for p, g in zip(preds, gts)]
    assert mean_iou_val == pytest.approx(sum(singles) / 6)
    assert mean_acc == pytest.approx(sum(accs) / 6)


def test_batch_scores_pooled_matches_global_counts():
    rng = np.random.default_rng(6)
    preds = [random_mask(rng) for _ in range(5)]
    gts = [random_mask(rng) for _ in range(5)]
    pooled_iou, pooled_acc = batch_scores(preds, gts, aggregation="pooled")
    inter = sum(int(np.count_nonzero((p == 1) & (g == 1))) for p, g in zip(preds, gts))
    union = sum(int(np.count_nonzero((p == 1) | (g == 1))) for p, g in zip(preds, gts))
    correct = sum(int(np.count_nonzero(p == g)) for p, g in zip(preds, gts))
    assert pooled_iou == pytest.approx(inter / union)
    assert pooled_acc == pytest.approx(correct / sum(p.size for p in preds))


def test_batch_scores_skip_drops_empty_pairs():
    ones = np.ones((4, 4), dtype=np.uint8)
    zeros = np.zeros((4, 4), dtype=np.uint8)
    # one perfect pair and one empty-union pair
    score_skip, _ = batch_scores([ones, zeros], [ones, zeros], empty_union="skip")
    score_one, _ = batch_scores([ones, zeros], [ones, zeros], empty_union="one")
    assert score_skip == 1.0  # the empty pair is dropped
    assert score_one == 1.0  # the empty pair counts as 1.0


def test_batch_scores_validation():
    m = np.zeros((2, 2), dtype=np.uint8)
    with pytest.raises(ShapeError):
        batch_scores([m], [m, m])
    with pytest.raises(ValueError):
        batch_scores([], [])
    with pytest.raises(ValueError):
        batch_scores([m], [m], aggregation="bogus")


# -- confidence intervals --------------------------------------------------


def test_mean_ci_frozen_five_values():
    result = mean_ci([0.52, 0.54, 0.56, 0.58, 0.60])
    assert result.mean == pytest.approx(0.56, abs=1e-12)
    assert result.half_width == pytest.approx(0.03926486322955119, abs=1e-12)
    assert result.n == 5


def test_mean_ci_frozen_two_values():
    # t quantile at 1 dof is 12.706204736432095
    result = mean_ci([0.5, 0.6])
    assert result.mean == pytest.approx(0.55, abs=1e-12)
    assert result.half_width == pytest.approx(0.6353102368216046, abs=1e-12)


def test_mean_ci_is_a_tuple_pair():
    mean, half = mean_ci([1.0, 2.0, 3.0])
    assert (mean, half) == (mean_ci([1.0, 2.0, 3.0]).mean, mean_ci([1.0, 2.0, 3.0]).half_width)
    assert isinstance(mean_ci([1.0, 2.0]), MeanCI)


def test_mean_ci_validation():
    with pytest.raises(ValueError):
        mean_ci([0.5])
    with pytest.raises(ValueError):
        mean_ci([0.5, 0.6], level=1.0)
    with pytest.raises(ValueError):
        mean_ci([0.5, 0.6], level=0.0)


def test_mean_ci_zero_spread():
    result = mean_ci([0.4, 0.4, 0.4])
    assert result == pytest.approx((0.4, 0.0), abs=1e-12)
    assert result.half_width == 0.0


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=8), st.randoms())
@settings(max_examples=60)
def test_mean_ci_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = mean_ci(values), mean_ci(shuffled)
    assert a.mean == pytest.approx(b.mean, abs=1e-12)
    assert a.half_width == pytest.approx(b.half_width, abs=1e-9)


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=8),
       st.floats(-5, 5, allow_nan=False))
@settings(max_examples=60)
def test_mean_ci_translation_shifts_only_the_mean(values, shift):
    base = mean_ci(values)
    moved = mean_ci([v + shift for v in values])
    assert moved.mean == pytest.approx(base.mean + shift, abs=1e-9)
    assert moved.half_width == pytest.approx(base.half_width, abs=1e-9)


# -- aggregation into reports -----------------------------------------------


def _row(dataset="synthetic", architecture="unet", encoder="tiny",
         weight_scheme="cdw", app_variant="none", seed=0, test_iou=0.5,
         test_pixel_accuracy=0.9):
    return dict(dataset=dataset, architecture=architecture, encoder=encoder,
                weight_scheme=weight_scheme, app_variant=app_variant, seed=seed,
                test_iou=test_iou, test_pixel_accuracy=test_pixel_accuracy)


def test_aggregate_results_groups_by_cell():
    rows = [
        _row(seed=0, test_iou=0.5),
        _row(seed=1, test_iou=0.7),
        _row(encoder="resnet18", seed=0, test_iou=0.9),
    ]
    reports = aggregate_results(rows)
    assert len(reports) == 2
    by_encoder = {r.encoder: r for r in reports}
    tiny = by_encoder["tiny"]
    assert tiny.n == 2
    assert tiny.per_seed == ((0, 0.5), (1, 0.7))
    assert tiny.mean_iou == pytest.approx(0.6)
    expected = mean_ci([0.5, 0.7])
    assert tiny.ci_half_width == pytest.approx(expected.half_width)
    single = by_encoder["resnet18"]
    assert single.n == 1
    assert single.mean_iou == 0.9
    assert single.ci_half_width is None


def test_metric_report_invariants():
    with pytest.raises(ValueError):
        MetricReport("d", "unet", "tiny", "cdw", "none",
                     per_seed=((0, 0.5),), mean_iou=0.9, ci_half_width=None, n=1)
    with pytest.raises(ValueError):
        MetricReport("d", "unet", "tiny", "cdw", "none",
                     per_seed=((0, 0.5),), mean_iou=0.5, ci_half_width=None, n=2)
    with pytest.raises(ValueError):
        MetricReport("d", "unet", "tiny", "cdw", "none",
                     per_seed=((0, 0.5), (1, 0.6)), mean_iou=0.55, ci_half_width=-0.1, n=2)


# -- tables -------------------------------------------------------------------


def _reports():
    rows = [
        _row(encoder="tiny", app_variant="none", seed=s, test_iou=0.40 + 0.02 * s)
        for s in range(2)
    ] + [
        _row(encoder="tiny", app_variant="gelu", seed=s, test_iou=0.50 + 0.02 * s)
        for s in range(2)
    ] + [
        _row(encoder="resnet18", app_variant="none", seed=s, test_iou=0.60 + 0.02 * s)
        for s in range(2)
    ]
    return aggregate_results(rows)


def test_emit_table_grid_layout_and_missing_cells():
    text = emit_table(_reports(), layout="by_encoder", fmt="grid")
    assert "# dataset=synthetic architecture=unet weight_scheme=cdw" in text
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split()
    assert header == ["encoder", "baseline", "relu", "gelu"]
    tiny_line = next(ln for ln in lines if ln.startswith("tiny"))
    assert "0.4100" in tiny_line  # mean of 0.40, 0.42
    assert "0.5100" in tiny_line
    assert MISSING_CELL in tiny_line  # relu column has no runs
    resnet_line = next(ln for ln in lines if ln.startswith("resnet18"))
    assert "0.6100" in resnet_line
    assert resnet_line.count(MISSING_CELL) == 2


def test_emit_table_tsv_round_trips():
    reports = _reports()
    text = emit_table(reports, layout="by_encoder", fmt="tsv")
    parsed = parse_table(text)
    block = ("synthetic", "unet", "cdw")
    assert parsed[block + ("tiny", "none")] == pytest.approx(0.41)
    assert parsed[block + ("tiny", "gelu")] == pytest.approx(0.51)
    assert parsed[block + ("resnet18", "none")] == pytest.approx(0.61)
    assert block + ("resnet18", "relu") not in parsed  # missing cells drop out


def test_emit_table_by_scheme_layout():
    text = emit_table(_reports(), layout="by_scheme", fmt="grid")
    assert "cdw" in text
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    assert lines[0].split()[0] == "weight_scheme"


def test_emit_table_rejects_unknown_layout():
    with pytest.raises(ValueError):
        emit_table(_reports(), layout="bogus")
    with pytest.raises(ValueError):
        emit_table(_reports(), fmt="bogus")


def test_plot_summary_writes_one_png_per_dataset(tmp_path):
    paths = plot_summary(_reports(), tmp_path)
    assert [p.name for p in paths] == ["plot_synthetic.png"]
    assert paths[0].exists() and paths[0].stat().st_size > 0
