"""Summary and highlight evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

DEFAULT_IOU_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2))


@dataclass(frozen=True, order=True)
class Segment:
    """Half-open frame interval ``[start, end)`` with a confidence score."""

    start: int
    end: int
    score: float = 1.0

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"segment needs start < end, got [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


def _as_segment(s) -> Segment:
    if isinstance(s, Segment):
        return s
    return Segment(*s)


def f1_summary(predicted, truth) -> float:
    p = np.asarray(predicted, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if p.shape != t.shape:
        raise ValueError(f"mask lengths differ: {p.shape} vs {t.shape}")
    overlap = np.count_nonzero(p & t)
    if overlap == 0:
        return 0.0
    precision = overlap / np.count_nonzero(p)
    recall = overlap / np.count_nonzero(t)
    return 2 * precision * recall / (precision + recall)


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("rank correlation needs at least two values")
    return a, b


def kendall_tau(pred, truth) -> float | None:
    """Tie-corrected Kendall tau-b; ``None`` when either input is constant."""
    a, b = _check_pair(pred, truth)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return None
    return float(stats.kendalltau(a, b, variant="b").statistic)


def spearman_rho(pred, truth) -> float | None:
    """Pearson correlation of average ranks; ``None`` for constant input."""
    a, b = _check_pair(pred, truth)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return None
    return float(stats.spearmanr(a, b).statistic)


def temporal_iou(a, b) -> float:
    a, b = _as_segment(a), _as_segment(b)
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union


def average_precision(predicted: Sequence, truth: Sequence, threshold: float) -> float:
    """AP at one IoU threshold.

    Predictions are visited in descending score order (ties keep input
    order) and each one claims the unmatched truth segment it overlaps most,
    provided that overlap reaches ``threshold``. AP is the sum of precision
    at each true positive times the recall step 1/|truth|.
    """
    truth = [_as_segment(t) for t in truth]
    if not truth:
        return 0.0
    preds = sorted((_as_segment(p) for p in predicted), key=lambda s: -s.score)
    matched = [False] * len(truth)
    hits = 0
    ap = 0.0
    for rank, p in enumerate(preds, start=1):
        best, best_iou = -1, threshold
        for j, t in enumerate(truth):
            if matched[j]:
                continue
            iou = temporal_iou(p, t)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        if best >= 0:
            matched[best] = True
            hits += 1
            ap += hits / rank
    return ap / len(truth)


def mean_ap(predicted: Sequence, truth: Sequence, thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS) -> float:
    """Average precision averaged over IoU thresholds (0.5:0.05:0.95 by default).

    Empty ground truth gives 0; use :func:`mean_ap_report` to see that flag.
    """
    return mean_ap_report(predicted, truth, thresholds)[0]


def mean_ap_report(predicted, truth, thresholds=DEFAULT_IOU_THRESHOLDS) -> tuple[float, dict[float, float], bool]:
    """(mAP, per-threshold AP, empty-truth flag)."""
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("need at least one IoU threshold")
    per = {float(th): average_precision(predicted, truth, th) for th in thresholds}
    return float(np.mean(list(per.values()))), per, len(truth) == 0
