import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clipsum.metrics import (
    DEFAULT_IOU_THRESHOLDS,
    Segment,
    average_precision,
    f1_summary,
    kendall_tau,
    mean_ap,
    mean_ap_report,
    spearman_rho,
    temporal_iou,
)
from oracles import kendall_oracle, spearman_oracle, ap_oracle


def test_f1_hand_cases():
    t = np.array([1, 1, 1, 1, 0, 0, 0, 0], bool)
    assert f1_summary(t, t) == 1.0
    assert f1_summary(t, ~t) == 0.0
    p = np.array([1, 1, 0, 0, 1, 1, 0, 0], bool)
    assert f1_summary(p, t) == 0.5


def test_f1_length_mismatch():
    with pytest.raises(ValueError):
        f1_summary([1, 0], [1, 0, 0])


def test_f1_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.random(30) < 0.3, rng.random(30) < 0.3
        assert f1_summary(a, b) == f1_summary(b, a)


def test_rank_correlations_extremes():
    x = np.arange(10.0)
    assert kendall_tau(x, x) == pytest.approx(1.0, abs=1e-12)
    assert kendall_tau(x, -x) == pytest.approx(-1.0, abs=1e-12)
    assert spearman_rho(x, x) == pytest.approx(1.0, abs=1e-12)
    assert spearman_rho(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_rank_correlations_constant_input_has_no_value():
    assert kendall_tau([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
    assert spearman_rho([1.0, 2.0, 3.0], [4.0, 4.0, 4.0]) is None


def test_rank_correlations_reject_bad_lengths():
    with pytest.raises(ValueError):
        kendall_tau([1.0], [2.0])
    with pytest.raises(ValueError):
        spearman_rho([1.0, 2.0], [1.0, 2.0, 3.0])


def test_rank_correlations_match_brute_force():
    rng = np.random.default_rng(1)
    for trial in range(100):
        if trial % 2:
            x, y = rng.standard_normal(20), rng.standard_normal(20)
        else:
            # heavy ties on both sides exercise the tie correction
            x, y = rng.integers(0, 4, 20).astype(float), rng.integers(0, 3, 20).astype(float)
        assert abs(kendall_tau(x, y) - kendall_oracle(x, y)) < 1e-12
        assert abs(spearman_rho(x, y) - spearman_oracle(x, y)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=3, max_size=15))
def test_rank_correlations_symmetric_and_monotone_invariant(pairs):
    x = np.array([p[0] for p in pairs], float)
    y = np.array([p[1] for p in pairs], float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return
    for fn in (kendall_tau, spearman_rho):
        base = fn(x, y)
        assert fn(y, x) == pytest.approx(base, abs=1e-12)
        assert fn(np.exp(x), y**3) == pytest.approx(base, abs=1e-12)


def test_temporal_iou_hand_cases():
    assert temporal_iou((0, 10), (0, 10)) == 1.0
    assert temporal_iou((0, 5), (5, 9)) == 0.0
    assert temporal_iou((0, 10), (5, 15)) == pytest.approx(5 / 15)


def test_segment_rejects_empty():
    with pytest.raises(ValueError):
        Segment(4, 4)


def test_default_thresholds():
    assert len(DEFAULT_IOU_THRESHOLDS) == 10
    assert DEFAULT_IOU_THRESHOLDS[0] == 0.5 and DEFAULT_IOU_THRESHOLDS[-1] == 0.95


def test_map_trivial_cases():
    assert mean_ap([Segment(3, 9, 0.7)], [Segment(3, 9)]) == 1.0
    assert mean_ap([], [Segment(3, 9)]) == 0.0
    value, per, empty = mean_ap_report([Segment(0, 2)], [])
    assert value == 0.0 and empty
    assert set(per) == set(DEFAULT_IOU_THRESHOLDS)


def test_map_rejects_empty_threshold_set():
    with pytest.raises(ValueError):
        mean_ap([], [Segment(0, 1)], thresholds=[])


def _layouts():
    # small fixed vocabulary of segments on a 10-frame line
    return [(0, 3), (0, 5), (2, 6), (3, 8), (5, 10), (6, 9), (8, 10)]


def test_ap_matches_exhaustive_oracle():
    layouts = _layouts()
    scores = [0.9, 0.6, 0.3]
    checked = 0
    for n_truth in range(0, 3):
        for truth in itertools.combinations(layouts, n_truth):
            for n_pred in range(0, 4):
                for pred in itertools.permutations(layouts, n_pred):
                    preds = [(s, e, scores[i]) for i, (s, e) in enumerate(pred)]
                    for th in (0.3, 0.5, 0.75):
                        got = average_precision(preds, list(truth), th)
                        assert abs(got - ap_oracle(preds, list(truth), th)) < 1e-12
                        checked += 1
    assert checked > 1000


def test_ap_ties_in_score_keep_input_order():
    truth = [Segment(0, 4)]
    preds = [Segment(6, 9, 0.5), Segment(0, 4, 0.5)]
    assert average_precision(preds, truth, 0.5) == 0.5


def test_map_non_increasing_with_stricter_thresholds():
    rng = np.random.default_rng(3)
    for _ in range(100):
        truth = [Segment(int(s), int(s) + int(rng.integers(1, 6))) for s in sorted(rng.choice(40, 3, replace=False) * 2)]
        preds = []
        for _ in range(int(rng.integers(0, 5))):
            a = int(rng.integers(0, 80))
            preds.append(Segment(a, a + int(rng.integers(1, 8)), float(rng.random())))
        base = np.array(DEFAULT_IOU_THRESHOLDS)
        stricter = np.minimum(base + rng.uniform(0, 0.1, base.size), 1.0)
        assert mean_ap(preds, truth, stricter) <= mean_ap(preds, truth, base) + 1e-12
