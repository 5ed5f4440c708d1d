"""Top-k clip selection from per-clip scores.

Three selectors share one result type:

* ``iterative-soft``: k rounds of a softmax-weighted argmax; after each round
  the leading score is pushed down by a large suppression so the next round
  prefers another clip.
* ``successive-halving-soft``: the same rounds, but each round's maximum is
  found by a pairwise soft tournament of logarithmic depth.
* ``hard``: exact top-k, used at inference time.

Features follow the D x N column convention used across the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

METHODS = ("iterative-soft", "successive-halving-soft", "hard")


@dataclass
class SelectorConfig:
    k: int = 1
    alpha: float = 100.0
    # None derives 10 * (max - min + 1) from the detached scores
    suppression: float | None = None
    method: str = "successive-halving-soft"

    def validate(self, n: int | None = None):
        if self.method not in METHODS:
            raise ValueError(f"unknown selector method {self.method!r}; expected one of {METHODS}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.suppression is not None and not self.suppression > 0:
            raise ValueError(f"suppression must be positive, got {self.suppression}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if n is not None and self.k > n:
            raise ValueError(f"k={self.k} exceeds the number of frames N={n}")


@dataclass
class SelectionResult:
    """Selection weights (k x N), selected rows (k x D) and per-round argmax."""

    weights: Tensor
    selected: Tensor
    order: list[int] = field(default_factory=list)


def _scores_tensor(scores) -> Tensor:
    s = ad.as_tensor(scores)
    if s.ndim != 1:
        s = ad.reshape(s, (-1,))
    if s.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(s.data)):
        raise ValueError("scores must be finite")
    return s


def _features_tensor(features, n: int) -> Tensor:
    x = ad.as_tensor(features)
    if x.ndim != 2 or x.shape[1] != n:
        raise ad.ShapeError("selector", x.shape, (n,))
    return x


def default_suppression(scores) -> float:
    s = np.asarray(scores.data if isinstance(scores, Tensor) else scores, dtype=np.float64)
    return 10.0 * (float(s.max() - s.min()) + 1.0)


def soft_argmax(features, scores, alpha: float) -> tuple[Tensor, Tensor]:
    """Softmax(alpha * scores) and the matching blend of feature columns."""
    s = _scores_tensor(scores)
    x = _features_tensor(features, s.size)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    w = ad.softmax(ad.scalar_mul(s, alpha))
    return w, ad.matmul(x, w)


def hard_topk(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, highest first, ties to the lower index."""
    s = np.asarray(scores.data if isinstance(scores, Tensor) else scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ValueError("empty score vector")
    if not 1 <= k <= s.size:
        raise ValueError(f"k={k} must lie in [1, N={s.size}]")
    # stable sort on the negated scores keeps lower indices first among ties
    return np.argsort(-s, kind="stable")[:k]


def _suppress(work: Tensor, supp: float) -> Tensor:
    """Subtract ``supp`` from the current leader; ties go to the lower index."""
    offset = np.zeros(work.size)
    offset[int(np.argmax(work.data))] = supp
    return ad.sub(work, offset)


def _finish(rows: list[Tensor], x: Tensor) -> SelectionResult:
    w = ad.concat([ad.reshape(r, (1, -1)) for r in rows], axis=0)
    selected = ad.matmul(w, ad.transpose(x))
    order = [int(np.argmax(r.data)) for r in rows]
    return SelectionResult(weights=w, selected=selected, order=order)


def soft_topk_iterative(features, scores, config: SelectorConfig) -> SelectionResult:
    s = _scores_tensor(scores)
    x = _features_tensor(features, s.size)
    config.validate(s.size)
    supp = config.suppression or default_suppression(s)
    rows = []
    work = s
    for _ in range(config.k):
        w = ad.softmax(ad.scalar_mul(work, config.alpha))
        rows.append(w)
        work = _suppress(work, supp)
    return _finish(rows, x)


def _tournament(work: Tensor, alpha: float, n_pad: int, sentinel: float) -> Tensor:
    """Soft maximum of ``work`` by pairwise halving.

    The score vector is padded to a power of two. Padding entries carry a
    finite sentinel score but their pairing coefficient is forced to zero, so
    a real clip facing padding advances with weight exactly 1. Survivor ``i``
    at a level with block size ``b`` owns original positions
    ``[i*b, (i+1)*b)``, which keeps the weight bookkeeping to one
    ``(survivors, b)`` matrix.
    """
    n = work.size
    pad = n_pad - n
    scores = work
    if pad:
        scores = ad.concat([work, np.full(pad, sentinel)])
    is_pad = np.arange(n_pad) >= n
    weights = Tensor(np.ones((n_pad, 1)))
    while scores.size > 1:
        sa = ad.take(scores, slice(0, None, 2))
        sb = ad.take(scores, slice(1, None, 2))
        pad_a, pad_b = is_pad[0::2], is_pad[1::2]
        ca = ad.sigmoid(ad.scalar_mul(ad.sub(sa, sb), alpha))
        # b is padding -> a wins outright; a is padding only when b is too
        force = pad_b & ~pad_a
        if force.any():
            keep = (~force).astype(np.float64)
            ca = ad.add(ad.mul(ca, keep), force.astype(np.float64))
        cb = ad.sub(1.0, ca)
        scores = ad.add(ad.mul(ca, sa), ad.mul(cb, sb))
        wa = ad.take(weights, slice(0, None, 2))
        wb = ad.take(weights, slice(1, None, 2))
        weights = ad.concat(
            [ad.mul(wa, ad.reshape(ca, (-1, 1))), ad.mul(wb, ad.reshape(cb, (-1, 1)))],
            axis=1,
        )
        is_pad = pad_a & pad_b
    flat = ad.reshape(weights, (-1,))
    return ad.slice_window(flat, 0, n, axis=0) if pad else flat


def soft_topk_halving(features, scores, config: SelectorConfig) -> SelectionResult:
    s = _scores_tensor(scores)
    x = _features_tensor(features, s.size)
    config.validate(s.size)
    supp = config.suppression or default_suppression(s)
    n = s.size
    n_pad = 1 << max(0, (n - 1).bit_length())
    rows = []
    work = s
    for _ in range(config.k):
        # sentinel tracks the working scores, which drop after each round
        lo, hi = float(work.data.min()), float(work.data.max())
        sentinel = lo - 10.0 * (hi - lo + 1.0)
        w = _tournament(work, config.alpha, n_pad, sentinel)
        rows.append(w)
        work = _suppress(work, supp)
    return _finish(rows, x)


def hard_selection(features, scores, k: int) -> SelectionResult:
    s = _scores_tensor(scores)
    x = _features_tensor(features, s.size)
    idx = hard_topk(s.data, k)
    onehot = np.zeros((k, s.size))
    onehot[np.arange(k), idx] = 1.0
    w = Tensor(onehot)
    return SelectionResult(weights=w, selected=ad.matmul(w, ad.transpose(x)), order=[int(i) for i in idx])


def select(features, scores, config: SelectorConfig) -> SelectionResult:
    if config.method == "iterative-soft":
        return soft_topk_iterative(features, scores, config)
    if config.method == "successive-halving-soft":
        return soft_topk_halving(features, scores, config)
    if config.method == "hard":
        config.validate()
        return hard_selection(features, scores, config.k)
    raise ValueError(f"unknown selector method {config.method!r}")


def selection_error(soft: SelectionResult, hard_indices, features) -> Tensor:
    """Relative L2 gap between soft-selected rows and the exact top-k rows.

    Falls back to the absolute L2 gap when the exact selection has zero norm.
    """
    x = ad.as_tensor(features)
    idx = np.asarray(hard_indices, dtype=int)
    if soft.selected.shape[0] != idx.size:
        raise ad.ShapeError("selection_error", soft.selected.shape, idx.shape)
    target = x.data[:, idx].T
    diff = ad.sub(soft.selected, target)
    err = ad.sqrt(ad.inner(diff, diff))
    norm = float(np.linalg.norm(target))
    if norm == 0.0:
        return err
    return ad.scalar_mul(err, 1.0 / norm)
