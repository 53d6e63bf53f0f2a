"""Evaluation metrics, seeding and table formatting."""

import math

import numpy as np
import pandas as pd
import pytest

from lib.exceptions import ConfigurationError, InputError, ShapeError, UndefinedBaselineError
from lib.models import EmbeddingRecord, SegmentationMask
from lib.utils.calculations import (
    EvaluationMetrics,
    bucket_labels,
    cosine_similarity,
    dice,
    ks_test,
    relative_improvement,
    shape_appearance_similarity,
    ssim,
    stratified_dice,
    stratify_scores,
)
from lib.utils.formatters import DataFormatter
from lib.utils.seeding import derive_seed, make_rng


class TestDice:

    def test_half_overlap(self):
        pred = np.array([[1, 1, 0, 0]], dtype=bool)
        gt = np.array([[0, 1, 1, 0]], dtype=bool)
        assert dice(pred, gt) == pytest.approx(0.5)

    def test_both_empty_is_perfect(self):
        empty = np.zeros((4, 4), dtype=bool)
        assert dice(empty, empty) == 1.0

    def test_one_empty(self):
        gt = np.zeros((4, 4), dtype=bool)
        gt[1, 1] = True
        assert dice(np.zeros((4, 4), dtype=bool), gt) == 0.0

    def test_accepts_segmentation_masks(self):
        mask = np.eye(4, dtype=bool)
        assert dice(SegmentationMask(mask=mask), mask) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dice(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_matches_pixel_count(self):
        rng = np.random.default_rng(3)
        for density in (0.05, 0.3, 0.7):
            pred = rng.uniform(size=(16, 16)) < density
            gt = rng.uniform(size=(16, 16)) < density
            both = sum(1 for p, g in zip(pred.flat, gt.flat) if p and g)
            expected = 2 * both / (sum(pred.flat) + sum(gt.flat))
            assert dice(pred, gt) == pytest.approx(expected)
            assert dice(pred, gt) == dice(gt, pred)

    def test_prediction_inside_larger_truth(self):
        gt = np.zeros((4, 4), dtype=bool)
        gt[0, :] = True
        pred = np.zeros((4, 4), dtype=bool)
        pred[0, :2] = True
        assert dice(pred, gt) == pytest.approx(0.6667, abs=1e-4)


class TestSSIM:

    def test_identical_images(self):
        x = np.random.default_rng(0).uniform(size=(32, 32))
        assert ssim(x, x) == pytest.approx(1.0)

    @pytest.mark.parametrize("c1, c2", [(0.2, 0.4), (0.5, 0.5), (0.0, 1.0)])
    def test_constant_images_closed_form(self, c1, c2):
        small_c = 0.01 ** 2
        expected = (2 * c1 * c2 + small_c) / (c1 ** 2 + c2 ** 2 + small_c)
        value = ssim(np.full((16, 16), c1), np.full((16, 16), c2))
        assert value == pytest.approx(expected, rel=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        x, y = rng.uniform(size=(24, 24)), rng.uniform(size=(24, 24))
        assert ssim(x, y) == pytest.approx(ssim(y, x))

    def test_matches_sliding_window_reference(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=(24, 20))
        y = np.clip(x + rng.normal(scale=0.1, size=x.shape), 0.0, 1.0)

        offsets = np.arange(-5, 6)
        kernel = np.exp(-0.5 * (offsets / 1.5) ** 2)
        weights = np.outer(kernel, kernel)
        weights /= weights.sum()
        c1, c2 = 0.01 ** 2, 0.03 ** 2
        scores = []
        for i in range(x.shape[0] - 10):
            for j in range(x.shape[1] - 10):
                wx, wy = x[i:i + 11, j:j + 11], y[i:i + 11, j:j + 11]
                mx, my = (weights * wx).sum(), (weights * wy).sum()
                vx = (weights * wx * wx).sum() - mx * mx
                vy = (weights * wy * wy).sum() - my * my
                cxy = (weights * wx * wy).sum() - mx * my
                scores.append(
                    (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2))
                )
        assert ssim(x, y) == pytest.approx(np.mean(scores), abs=1e-6)

    def test_too_small(self):
        with pytest.raises(ConfigurationError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestRelativeImprovement:

    def test_value(self):
        assert relative_improvement(0.6, 0.5) == pytest.approx(0.2)
        assert relative_improvement(0.4, 0.5) == pytest.approx(-0.2)

    def test_zero_baseline(self):
        with pytest.raises(UndefinedBaselineError):
            relative_improvement(0.3, 0.0)


class TestKSTest:

    def test_identical_samples(self):
        sample = np.linspace(0, 1, 50)
        statistic, p_value = ks_test(sample, sample)
        assert statistic == 0.0
        assert p_value == pytest.approx(1.0)

    def test_disjoint_samples(self):
        statistic, p_value = ks_test(np.linspace(0, 1, 100), np.linspace(2, 3, 100))
        assert statistic == 1.0
        assert p_value < 1e-6

    def test_empty_sample(self):
        with pytest.raises(InputError):
            ks_test([], [1.0])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        a, b = rng.normal(size=80), rng.normal(loc=0.3, size=120)
        np.testing.assert_allclose(ks_test(np.exp(a), np.exp(b)), ks_test(a, b))
        np.testing.assert_allclose(ks_test(a ** 3, b ** 3), ks_test(a, b))

    def test_same_distribution_rarely_rejected(self):
        rng = np.random.default_rng(5)
        accepted = sum(
            ks_test(rng.normal(size=200), rng.normal(size=200))[1] > 0.05 for _ in range(200)
        )
        assert accepted >= 180


class TestCosineSimilarity:

    def test_values(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(0.0)
        assert cosine_similarity(np.array([1.0, 1.0]), np.array([2.0, 2.0])) == pytest.approx(1.0)
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([-3.0, 0.0])) == pytest.approx(-1.0)

    def test_zero_norm(self):
        assert cosine_similarity(np.zeros(3), np.ones(3)) is None

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            cosine_similarity(np.ones(3), np.ones(4))


class TestShapeAppearanceSimilarity:

    def _records(self, slice_id, z_s, z_a=None, z_gs=None):
        records = [EmbeddingRecord("c", slice_id, "shape", np.asarray(z_s, dtype=float))]
        if z_a is not None:
            records.append(EmbeddingRecord("c", slice_id, "appearance", np.asarray(z_a, dtype=float)))
        if z_gs is not None:
            records.append(EmbeddingRecord("c", slice_id, "shape_gamma", np.asarray(z_gs, dtype=float)))
        return records

    def test_means_over_slices(self):
        records = self._records("a", [1, 0], [0, 1], [1, 0]) + self._records("b", [1, 1], [1, 1], [1, -1])
        sas, scs = shape_appearance_similarity(records)
        assert sas == pytest.approx(0.5)
        assert scs == pytest.approx(0.5)

    def test_zero_norm_pairs_excluded(self):
        records = self._records("a", [1, 0], [0, 0], [1, 0]) + self._records("b", [1, 0], [1, 0], [1, 0])
        sas, scs = shape_appearance_similarity(records)
        assert sas == pytest.approx(1.0)
        assert scs == pytest.approx(1.0)

    def test_without_appearance_records(self):
        sas, scs = shape_appearance_similarity(self._records("a", [1, 0]))
        assert math.isnan(sas) and math.isnan(scs)

    def test_positive_rescaling_invariance(self):
        rng = np.random.default_rng(6)
        triples = [rng.normal(size=(3, 16)) for _ in range(5)]
        records = [r for i, t in enumerate(triples) for r in self._records(f"s{i}", *t)]
        scaled = [
            r for i, t in enumerate(triples)
            for r in self._records(f"s{i}", t[0] * 3.0, t[1] * 0.01, t[2] * 250.0)
        ]
        np.testing.assert_allclose(shape_appearance_similarity(scaled), shape_appearance_similarity(records))

    def test_independent_high_dimensional_embeddings(self):
        rng = np.random.default_rng(7)
        records = []
        for i in range(20):
            z_s = rng.normal(size=4096)
            records += self._records(f"s{i}", z_s, rng.normal(size=4096), z_s + 0.1 * rng.normal(size=4096))
        sas, scs = shape_appearance_similarity(records)
        assert abs(sas) < 0.05
        assert scs > 0.95


class TestStratification:

    def test_bucket_labels(self):
        assert bucket_labels([12, 36, 100]) == ["<12", "12-36", "36-100", ">=100"]

    def test_single_pixel_lesion_is_four_mm2(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[3, 3] = True
        table = stratified_dice([(gt, gt)], [12, 36, 100], pixel_spacing_mm=2.0)
        assert list(table["bucket"]) == ["<12"]
        assert table.iloc[0]["mean"] == 1.0
        assert table.iloc[0]["count"] == 1

    def test_bucket_edges_are_half_open(self):
        table = stratify_scores([0.2, 0.4, 0.8], [12.0, 11.9, 100.0], [12, 36, 100])
        by_bucket = dict(zip(table["bucket"], table["mean"]))
        assert by_bucket == pytest.approx({"<12": 0.4, "12-36": 0.2, ">=100": 0.8})

    def test_lesion_free_slices_skipped(self):
        table = stratify_scores([1.0, 0.5], [0.0, 20.0], [12, 36, 100])
        assert list(table["bucket"]) == ["12-36"]

    def test_mean_and_std(self):
        table = stratify_scores([0.2, 0.6], [20.0, 30.0], [12, 36, 100])
        row = table.iloc[0]
        assert row["mean"] == pytest.approx(0.4)
        assert row["std"] == pytest.approx(np.std([0.2, 0.6], ddof=1))


class TestSeeding:

    def test_deterministic(self):
        assert derive_seed(0, "local", 3, 1) == derive_seed(0, "local", 3, 1)

    def test_keys_separate_streams(self):
        seeds = {derive_seed(0, "client", i) for i in range(20)}
        assert len(seeds) == 20
        assert derive_seed(0, "init") != derive_seed(1, "init")

    def test_make_rng(self):
        a = make_rng(5, "site_a").uniform(size=4)
        b = np.random.default_rng(derive_seed(5, "site_a")).uniform(size=4)
        np.testing.assert_array_equal(a, b)


class TestDataFormatter:

    def test_precision(self):
        df = pd.DataFrame({"model": ["feddis"], "site_a_dice_mean": [0.123456], "ri": [0.987654], "other": [1.23456]})
        out = DataFormatter.apply_precision_formatting(df)
        assert out["site_a_dice_mean"].iloc[0] == 0.1235
        assert out["ri"].iloc[0] == 0.9877
        assert out["model"].iloc[0] == "feddis"
        assert out["other"].iloc[0] == 1.23456

    def test_strings(self):
        assert DataFormatter.format_percentage(0.25) == "25.0%"
        assert DataFormatter.format_percentage(None) == "N/A"
        assert DataFormatter.format_mean_std(0.5, 0.1) == "0.500 ± 0.100"
        assert DataFormatter.format_mean_std(0.5, float("nan")) == "0.500"
        assert DataFormatter.format_p_value(0.01) == "0.01*"
        assert DataFormatter.format_p_value(0.2) == "0.2"

    def test_metrics_class_aliases(self):
        assert EvaluationMetrics.dice is dice
