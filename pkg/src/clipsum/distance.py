"""Similarity between variable-length feature sequences.

Sequences are D x T matrices whose columns are per-clip features. The
baseline compares time-averaged features. The clip-contrastive distance
instead averages the inner product of every pair of contiguous n-clip
windows, one window from each sequence.

The exact windowed average factorises. Writing ``P = t - n + 1`` and
``Q = T - n + 1`` for the window counts,

    dist_n(X, Y) = sum_l < S_X[:, l] / P, S_Y[:, l] / Q >

where ``S_X[:, l]`` sums columns ``l .. l + P - 1`` of X. So each sequence is
reduced once to a D x n "window profile" and the distance is a Frobenius
inner product of two profiles. That costs O(D * t * n) instead of
O(D * n * P * Q).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

log = logging.getLogger(__name__)

EXACT_PAIR_LIMIT = 10**6
FALLBACK_SAMPLES = 4096


@dataclass
class SubVideoConfig:
    n: int = 10
    mode: str = "auto"  # "exact", "monte-carlo" or "auto"
    samples: int = FALLBACK_SAMPLES
    seed: int = 0


def _as_sequence(x) -> Tensor:
    x = ad.as_tensor(x)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ad.ShapeError("feature-sequence", x.shape)
    return x


def mean_feature_distance(X, Y) -> Tensor:
    """Inner product of the time-averaged features of X and Y."""
    X, Y = _as_sequence(X), _as_sequence(Y)
    if X.shape[0] != Y.shape[0]:
        raise ad.ShapeError("mean_feature_distance", X.shape, Y.shape)
    return ad.inner(ad.mean(X, axis=1), ad.mean(Y, axis=1))


def _window_band(length: int, n: int) -> np.ndarray:
    """length x n 0/1 matrix; column l marks rows l .. l + length - n."""
    p = length - n + 1
    band = np.zeros((length, n))
    for l in range(n):
        band[l : l + p, l] = 1.0
    return band / p


def window_profile(X, n: int) -> Tensor:
    """D x n matrix of window-position averages (see module docstring)."""
    X = _as_sequence(X)
    if not 1 <= n <= X.shape[1]:
        raise ValueError(f"sub-video length n={n} must lie in [1, {X.shape[1]}]")
    return ad.matmul(X, _window_band(X.shape[1], n))


def window_gram(X, Y, n: int) -> Tensor:
    """P x Q matrix whose (a, b) entry is <X[:, a:a+n], Y[:, b:b+n]>."""
    X, Y = _as_sequence(X), _as_sequence(Y)
    k = ad.matmul(ad.transpose(X), Y)
    p, q = X.shape[1] - n + 1, Y.shape[1] - n + 1
    out = None
    for l in range(n):
        block = ad.take(k, (slice(l, l + p), slice(l, l + q)))
        out = block if out is None else ad.add(out, block)
    return out


def _check_pair(X: Tensor, Y: Tensor, n: int):
    if X.shape[0] != Y.shape[0]:
        raise ad.ShapeError("clip_contrastive_distance", X.shape, Y.shape)
    limit = min(X.shape[1], Y.shape[1])
    if not 1 <= n <= limit:
        raise ValueError(f"sub-video length n={n} must lie in [1, {limit}] for sequences of length {X.shape[1]} and {Y.shape[1]}")


def clip_contrastive_distance(X, Y, config: SubVideoConfig | None = None) -> Tensor:
    """Expected inner product between random n-clip windows of X and Y."""
    config = config or SubVideoConfig()
    X, Y = _as_sequence(X), _as_sequence(Y)
    n = config.n
    _check_pair(X, Y, n)
    pairs = (X.shape[1] - n + 1) * (Y.shape[1] - n + 1)
    mode = config.mode
    if mode == "auto":
        mode = "exact" if pairs <= EXACT_PAIR_LIMIT else "monte-carlo"
    if mode == "exact":
        return ad.inner(window_profile(X, n), window_profile(Y, n))
    if mode == "monte-carlo":
        return _monte_carlo(X, Y, n, config.samples, config.seed)
    raise ValueError(f"unknown distance mode {config.mode!r}")


def _monte_carlo(X: Tensor, Y: Tensor, n: int, samples: int, seed: int) -> Tensor:
    if samples < 1:
        raise ValueError("monte-carlo mode needs at least one sample")
    p, q = X.shape[1] - n + 1, Y.shape[1] - n + 1
    rng = np.random.default_rng(seed)
    a = rng.integers(0, p, size=samples)
    b = rng.integers(0, q, size=samples)
    counts = np.zeros((p, q))
    np.add.at(counts, (a, b), 1.0)
    return ad.scalar_mul(ad.inner(window_gram(X, Y, n), counts), 1.0 / samples)


def effective_n(n: int, lengths) -> int:
    """Clamp n to the shortest sequence, logging when that changes it."""
    shortest = int(min(lengths))
    if n > shortest:
        log.warning("sub-video length n=%d exceeds shortest sequence (%d clips); clamping", n, shortest)
        return shortest
    return n
