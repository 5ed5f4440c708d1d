"""Highlight detection from per-clip importance scores.

Scores are smoothed with a Gaussian, thresholded, and every maximal run of
clips above the threshold becomes one highlight segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .metrics import DEFAULT_IOU_THRESHOLDS, Segment, mean_ap

TRUNCATE = 4.0


def default_theta_grid() -> list[float]:
    return [round(0.05 * i, 2) for i in range(1, 20)]


@dataclass
class HighlightConfig:
    sigma: float = 2.0
    theta: float = 0.5
    theta_grid: list[float] = field(default_factory=default_theta_grid)

    def validate(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.theta_grid:
            raise ValueError("theta grid is empty")
        if list(self.theta_grid) != sorted(self.theta_grid):
            raise ValueError("theta grid must be sorted")


def gaussian_smooth(scores, sigma: float) -> np.ndarray:
    """Gaussian filter truncated at 4 sigma with reflected boundaries."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("cannot smooth an empty score sequence")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return gaussian_filter1d(s, sigma, mode="reflect", truncate=TRUNCATE)


def threshold_segments(scores, theta: float) -> list[Segment]:
    s = np.asarray(scores, dtype=np.float64)
    above = np.concatenate([[False], s > theta, [False]])
    edges = np.flatnonzero(above[1:] != above[:-1])
    return [Segment(int(a), int(b), float(s[a:b].max())) for a, b in zip(edges[0::2], edges[1::2])]


def detect(scores, config: HighlightConfig, theta: float | None = None) -> list[Segment]:
    theta = config.theta if theta is None else theta
    return threshold_segments(gaussian_smooth(scores, config.sigma), theta)


def select_theta(
    holdout: Sequence[tuple[np.ndarray, Sequence]],
    config: HighlightConfig,
    thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
) -> float:
    """Grid threshold maximising mean mAP over ``(scores, truth segments)`` pairs.

    Ties go to the larger threshold.
    """
    if not holdout:
        raise ValueError("holdout set is empty")
    config.validate()
    smoothed = [(gaussian_smooth(s, config.sigma), truth) for s, truth in holdout]
    best_theta, best = None, -np.inf
    for theta in config.theta_grid:
        value = float(np.mean([mean_ap(threshold_segments(s, theta), truth, thresholds) for s, truth in smoothed]))
        if value >= best:
            best_theta, best = theta, value
    return float(best_theta)
