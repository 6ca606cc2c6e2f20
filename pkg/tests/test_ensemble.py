"""Score fusion, the confidence weight, grid tuning, and indicator binning."""
from __future__ import annotations

import math
import random

import pytest

from memlens.attribution import CategoryRecord
from memlens.domain import Instance
from memlens.ensemble import (
    EnsembleConfig,
    alpha_weight,
    fuse,
    indicator_report,
    msp,
    tune,
)
from memlens.metrics import PredictionList, ndcg_at_k


def plist(pairs, user=0, prob=False):
    return PredictionList(user=user, ranked=list(pairs), is_probability=prob)


def prob_list(items, top=0.3, decay=0.7, user=0):
    return plist(
        [(item, top * decay**i) for i, item in enumerate(items)], user=user, prob=True
    )


class TestMsp:
    def test_top_score(self):
        assert msp(plist([(1, 0.5), (2, 0.3), (3, 0.2)], prob=True)) == 0.5

    def test_single_candidate(self):
        assert msp(plist([(4, 1.0)], prob=True)) == 1.0

    def test_skewed(self):
        assert msp(plist([(1, 0.9), (2, 0.05)], prob=True)) == 0.9

    def test_requires_probability_scores(self):
        with pytest.raises(ValueError, match="MSP requires probability scores"):
            msp(plist([(1, 12.0), (2, 3.0)]))


class TestAlphaWeight:
    def test_half_at_threshold(self):
        assert alpha_weight(0.2, q=5.0, tau=0.2) == pytest.approx(0.5, abs=1e-12)

    def test_zero_steepness_is_constant_half(self):
        for s in (0.0, 0.3, 0.9):
            assert alpha_weight(s, q=0.0, tau=0.2) == pytest.approx(0.5, abs=1e-12)

    def test_closed_form_point(self):
        expected = 1.0 / (1.0 + math.exp(1.0))
        assert alpha_weight(0.4, q=5.0, tau=0.2) == pytest.approx(expected, abs=1e-12)

    def test_strictly_decreasing_and_bounded(self):
        values = [alpha_weight(s / 50, q=7.0, tau=0.3) for s in range(51)]
        assert all(0.0 < v < 1.0 for v in values)
        assert all(a > b for a, b in zip(values, values[1:]))


class TestFuse:
    def _lists(self):
        pred_id = prob_list([10, 11, 12, 13, 14])
        pred_gr = plist([(20, 9.0), (12, 7.0), (21, 5.0), (10, 2.0), (22, 1.0)])
        return pred_id, pred_gr

    def test_alpha_one_reproduces_gr_prefix(self):
        pred_id, pred_gr = self._lists()
        cfg = EnsembleConfig(alpha_static=0.0, mode="fixed")  # ID weight 0 => alpha 1
        result = fuse(pred_id, pred_gr, cfg)
        assert result.alpha == 1.0
        gr_order = [item for item, _ in pred_gr.ranked]
        fused_gr_items = [item for item, _ in result.fused.ranked if item in set(gr_order)]
        assert fused_gr_items == gr_order

    def test_alpha_zero_reproduces_id_prefix(self):
        pred_id, pred_gr = self._lists()
        cfg = EnsembleConfig(alpha_static=1.0, mode="fixed")
        result = fuse(pred_id, pred_gr, cfg)
        assert result.alpha == 0.0
        id_order = [item for item, _ in pred_id.ranked]
        fused_id_items = [item for item, _ in result.fused.ranked if item in set(id_order)]
        assert fused_id_items == id_order

    def test_disjoint_lists_interleave_by_normalized_score(self):
        # minmax norms: id 1 -> 1.0, 2 -> 0.5, 3 -> 0.0; gr 7 -> 1.0, 8 -> 0.5, 9 -> 0.0.
        # equal alpha halves every score; the union holds all six items and
        # ties resolve toward the smaller item index (scores chosen dyadic so
        # the normalized values are float-exact).
        pred_id = plist([(1, 0.5), (2, 0.25), (3, 0.0)], prob=True)
        pred_gr = plist([(7, 30.0), (8, 20.0), (9, 10.0)])
        cfg = EnsembleConfig(alpha_static=0.5, mode="fixed")
        result = fuse(pred_id, pred_gr, cfg)
        assert result.union_size == 6
        assert [item for item, _ in result.fused.ranked] == [1, 7, 2, 8, 3, 9]
        scores = dict(result.fused.ranked)
        assert scores[1] == pytest.approx(0.5)
        assert scores[7] == pytest.approx(0.5)
        assert scores[2] == pytest.approx(0.25)

    def test_user_mismatch_rejected(self):
        pred_id = prob_list([1, 2], user=3)
        pred_gr = plist([(1, 2.0), (2, 1.0)], user=4)
        with pytest.raises(ValueError, match="user mismatch"):
            fuse(pred_id, pred_gr, EnsembleConfig())

    def test_adaptive_alpha_uses_msp(self):
        pred_id, pred_gr = self._lists()
        cfg = EnsembleConfig(q=5.0, tau=0.2, mode="adaptive")
        result = fuse(pred_id, pred_gr, cfg)
        assert result.s_conf == pytest.approx(0.3)
        assert result.alpha == pytest.approx(alpha_weight(0.3, 5.0, 0.2))

    def test_affine_invariance_under_minmax(self):
        pred_id, pred_gr = self._lists()
        cfg = EnsembleConfig(alpha_static=0.3, mode="fixed")
        base = fuse(pred_id, pred_gr, cfg)
        shifted_gr = plist([(i, 4.0 * s + 3.0) for i, s in pred_gr.ranked])
        again = fuse(pred_id, shifted_gr, cfg)
        assert [i for i, _ in base.fused.ranked] == [i for i, _ in again.fused.ranked]

    def test_monotone_invariance_under_rank_reciprocal(self):
        pred_id, pred_gr = self._lists()
        cfg = EnsembleConfig(alpha_static=0.3, mode="fixed", normalization="rank_reciprocal")
        base = fuse(pred_id, pred_gr, cfg)
        warped_gr = plist([(i, math.tanh(s)) for i, s in pred_gr.ranked])
        again = fuse(pred_id, warped_gr, cfg)
        assert [i for i, _ in base.fused.ranked] == [i for i, _ in again.fused.ranked]


def _instance(user, target):
    return Instance(user=user, history=(0,), target=target)


class TestTune:
    def test_grid_sizes(self):
        instances = [_instance(0, 1)]
        preds_id = [prob_list([1, 2], user=0)]
        preds_gr = [plist([(1, 2.0), (2, 1.0)], user=0)]
        result = tune(instances, preds_id, preds_gr)
        assert sum(1 for p in result.grid if p.mode == "adaptive") == 24
        assert sum(1 for p in result.grid if p.mode == "fixed") == 11

    def test_identical_models_tie_break(self):
        instances = [_instance(0, 1), _instance(1, 4)]
        preds_id = [prob_list([1, 2], user=0), prob_list([4, 5], user=1)]
        preds_gr = [
            plist([(1, 0.3), (2, 0.21)], user=0),
            plist([(4, 0.3), (5, 0.21)], user=1),
        ]
        result = tune(instances, preds_id, preds_gr)
        assert result.best_adaptive.q == 1.0
        assert result.best_adaptive.tau == 0.0
        assert result.best_fixed.alpha_static == 0.0

    def test_gr_dominant_prefers_minimum_id_weight_corner(self):
        # One instance, MSP 0.3.  Under reciprocal-rank normalization the
        # target beats the ID model's top item only when the generative
        # weight exceeds (1/61 - 1/71) / ((1/61 - 1/62) + (1/61 - 1/71)),
        # roughly 0.897, which only the (q=13, tau=0.5) corner reaches
        # (alpha = sigmoid(2.6) = 0.931).
        target = 100
        competitor = 200
        id_items = [competitor, 1, 2, 3, 4, 5, 6, 7, 8, 9, target]
        pred_id = prob_list(id_items, top=0.3, decay=0.7)
        pred_gr = plist([(target, 2.0), (competitor, 1.0)])
        result = tune([_instance(0, target)], [pred_id], [pred_gr],
                      normalization="rank_reciprocal")
        assert result.best_adaptive.q == 13.0
        assert result.best_adaptive.tau == 0.5
        # GR alone is strictly better, so the fixed search drops ID entirely
        assert result.best_fixed.alpha_static == 0.0

    def test_empty_validation_rejected(self):
        with pytest.raises(ValueError, match="empty validation"):
            tune([], [], [])


class TestIndicatorReport:
    def test_mem_ratio_monotone_when_msp_correlates(self):
        rng = random.Random(5)
        instances, preds_id, preds_gr, records = [], [], [], []
        for i in range(60):
            memorized = i % 2 == 0
            top = 0.8 if memorized else 0.1
            instances.append(_instance(i, 1))
            preds_id.append(prob_list([1, 2], top=top, decay=0.2, user=i))
            preds_gr.append(plist([(1, 2.0), (2, 1.0)], user=i))
            records.append(CategoryRecord(memorization=memorized))
        report = indicator_report(instances, preds_id, preds_gr, records, num_bins=2)
        ratios = [row.mem_ratio for row in report.rows]
        assert ratios == [0.0, 100.0]

    def test_identical_models_have_equal_curves(self):
        instances = [_instance(i, 1) for i in range(10)]
        preds_id = [prob_list([1, 2], top=0.1 + 0.05 * i, user=i) for i in range(10)]
        preds_gr = [
            plist(list(p.ranked), user=p.user) for p in preds_id
        ]
        records = [CategoryRecord(uncategorized=True)] * 10
        report = indicator_report(instances, preds_id, preds_gr, records, num_bins=3)
        for row in report.rows:
            assert row.means["id"] == pytest.approx(row.means["gr"])

    def test_single_bin_equals_global_average(self):
        instances = [_instance(i, 1) for i in range(8)]
        preds_id = [prob_list([1, 2], user=i) for i in range(4)] + [
            prob_list([2, 1], user=i) for i in range(4, 8)
        ]
        preds_gr = [plist([(1, 2.0), (2, 1.0)], user=i) for i in range(8)]
        records = [CategoryRecord(memorization=i < 4) for i in range(8)]
        report = indicator_report(instances, preds_id, preds_gr, records, num_bins=1)
        assert len(report.rows) == 1
        row = report.rows[0]
        global_id = sum(ndcg_at_k(p, 1, 10) for p in preds_id) / 8
        assert row.means["id"] == pytest.approx(global_id)
        assert row.mem_ratio == pytest.approx(50.0)
        assert row.count == 8
