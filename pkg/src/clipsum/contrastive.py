"""Projection head and the summary-vs-video contrastive objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .distance import effective_n, window_profile

NEGATIVE_SETS = ("both", "videos", "summaries")


@dataclass
class ContrastiveConfig:
    tau: float = 0.1
    n: int = 10
    include_positive_in_denominator: bool = True
    normalize_columns: bool = True
    negatives: str = "both"

    def validate(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.negatives not in NEGATIVE_SETS:
            raise ValueError(f"negatives must be one of {NEGATIVE_SETS}, got {self.negatives!r}")


class ProjectionHead:
    """Two-layer MLP (D -> D -> D') applied to every column independently."""

    def __init__(self, d_in: int, d_out: int | None = None, rng: np.random.Generator | None = None, identity: bool = False):
        d_out = d_in if d_out is None else d_out
        self.d_in, self.d_out = d_in, d_out
        if identity:
            if d_out != d_in:
                raise ValueError("identity head needs d_out == d_in")
            w1, w2 = np.eye(d_in), np.eye(d_in)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            w1, w2 = ad.glorot(rng, d_in, d_in), ad.glorot(rng, d_out, d_in)
        self.w1 = Parameter(w1, "h.w1")
        self.b1 = Parameter(np.zeros((d_in, 1)), "h.b1")
        self.w2 = Parameter(w2, "h.w2")
        self.b2 = Parameter(np.zeros((d_out, 1)), "h.b2")

    def parameters(self) -> list[Parameter]:
        return [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, seq, normalize: bool = False) -> Tensor:
        return project(seq, self, normalize)


def l2_normalize_columns(x: Tensor, eps: float = 1e-12) -> Tensor:
    norms = ad.sqrt(ad.add(ad.sum(ad.mul(x, x), axis=0, keepdims=True), eps))
    return ad.div(x, norms)


def project(seq, head: ProjectionHead, normalize: bool = False) -> Tensor:
    x = ad.as_tensor(seq)
    if x.ndim != 2 or x.shape[0] != head.d_in:
        raise ad.ShapeError("project", x.shape, (head.d_in, "T"))
    hidden = ad.relu(ad.add(ad.matmul(head.w1, x), head.b1))
    out = ad.add(ad.matmul(head.w2, hidden), head.b2)
    return l2_normalize_columns(out) if normalize else out


def distance_matrix(sequences, n: int) -> Tensor:
    """Pairwise clip-contrastive distances between same-width sequences.

    Uses the window-profile factorisation, so the whole matrix costs one
    profile per sequence plus a Gram product.
    """
    profiles = [ad.reshape(window_profile(s, n), (1, -1)) for s in sequences]
    stacked = ad.concat(profiles, axis=0)
    return ad.matmul(stacked, ad.transpose(stacked))


def _negative_mask(batch: int, negatives: str) -> np.ndarray:
    """(2B, 2B) boolean mask of negatives; rows 0..B-1 videos, B..2B-1 summaries."""
    owner = np.tile(np.arange(batch), 2)
    is_video = np.arange(2 * batch) < batch
    mask = owner[:, None] != owner[None, :]
    if negatives == "videos":
        mask &= is_video[None, :]
    elif negatives == "summaries":
        mask &= ~is_video[None, :]
    return mask


def contrastive_loss_from_distances(dist: Tensor, batch: int, config: ContrastiveConfig) -> Tensor:
    """Loss from a (2B, 2B) distance matrix laid out as [videos; summaries].

    Each video anchors against its own summary and each summary against its
    own video, so the result sums 2B terms.
    """
    config.validate()
    if batch < 2:
        raise ValueError(f"contrastive loss needs at least 2 pairs, got {batch}")
    if dist.shape != (2 * batch, 2 * batch):
        raise ad.ShapeError("contrastive_loss", dist.shape, (2 * batch, 2 * batch))
    logits = ad.scalar_mul(dist, 1.0 / config.tau)
    neg = _negative_mask(batch, config.negatives)
    pos_col = np.concatenate([np.arange(batch, 2 * batch), np.arange(batch)])
    total = None
    for anchor in range(2 * batch):
        cols = np.flatnonzero(neg[anchor])
        if config.include_positive_in_denominator:
            cols = np.concatenate([[pos_col[anchor]], cols])
        row = ad.take(logits, (anchor, cols))
        term = ad.sub(ad.logsumexp(row), ad.take(logits, (anchor, pos_col[anchor])))
        total = term if total is None else ad.add(total, term)
    return total


def contrastive_loss(videos, summaries, config: ContrastiveConfig | None = None) -> Tensor:
    """Contrastive loss over B (video, summary) embedding pairs.

    ``videos[i]`` and ``summaries[i]`` are D' x L sequences forming the
    positive pair; all other videos and summaries in the batch act as
    negatives. The sub-video length is clamped to the shortest sequence.
    """
    config = config or ContrastiveConfig()
    if len(videos) != len(summaries):
        raise ValueError("videos and summaries must pair one to one")
    batch = len(videos)
    if batch < 2:
        raise ValueError(f"contrastive loss needs at least 2 pairs, got {batch}")
    seqs = [ad.as_tensor(v) for v in videos] + [ad.as_tensor(s) for s in summaries]
    widths = {s.shape[0] for s in seqs}
    if len(widths) != 1:
        raise ad.ShapeError("contrastive_loss", *[s.shape for s in seqs])
    n = effective_n(config.n, [s.shape[1] for s in seqs])
    return contrastive_loss_from_distances(distance_matrix(seqs, n), batch, config)
