"""Planted-summary datasets.

Background clips of every video scatter around C zero-mean prototypes
shared by the whole dataset, so background alone says little about which
video a clip is from. Key clips add a video-specific salient direction on
top of a background clip. Those key clips are what tells a video apart from the others,
which makes them the summary a contrastive objective should recover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .io import VideoRecord


@dataclass
class SynthConfig:
    videos: int = 20
    dim: int = 16
    frames_min: int = 100
    frames_max: int = 100
    key_fraction: float = 0.15
    clusters: int = 3
    # RMS distance of a background clip from its centroid
    spread: float = 1.0
    key_magnitude: float = 3.0
    noise: float = 0.1
    # key clips are laid out as this many contiguous runs
    key_runs: int = 3
    seed: int = 0

    def validate(self):
        if not 0 < self.key_fraction < 1:
            raise ValueError(f"key_fraction must lie in (0, 1), got {self.key_fraction}")
        for name in ("videos", "dim", "frames_min", "frames_max", "clusters", "key_runs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.frames_max < self.frames_min:
            raise ValueError("frames_max must be >= frames_min")
        if self.spread < 0 or self.noise < 0 or self.key_magnitude < 0:
            raise ValueError("spread, noise and key_magnitude must be non-negative")
        if key_count(self.frames_min, self.key_fraction) < 1:
            raise ValueError(f"frames_min={self.frames_min} is too short to hold one key clip at key_fraction={self.key_fraction}")


def key_count(frames: int, fraction: float) -> int:
    return int(round(fraction * frames))


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _salient(rng, config, previous, candidates=256):
    """Video-specific salient direction.

    Key centroid offsets must sit more than 2 x spread apart. Among the
    candidates that qualify, the one least aligned with earlier directions
    wins, which keeps key clips of different videos from looking alike.
    """
    best, best_cos = None, np.inf
    for _ in range(candidates):
        u = _unit(rng, config.dim)
        offset = config.key_magnitude * u
        if not all(np.linalg.norm(offset - config.key_magnitude * w) > 2.0 * config.spread for w in previous):
            continue
        worst = max((float(u @ w) for w in previous), default=-1.0)
        if worst < best_cos:
            best, best_cos = u, worst
    if best is None:
        raise RuntimeError("could not place well-separated key centroids; raise key_magnitude or lower spread")
    return best


def _run_layout(rng, frames, keys, runs):
    """Start/end of ``runs`` disjoint, non-touching runs covering ``keys`` clips."""
    runs = min(runs, keys, frames - keys + 1)
    runs = max(runs, 1)
    # random composition of keys into positive run lengths
    cuts = np.sort(rng.choice(np.arange(1, keys), size=runs - 1, replace=False)) if runs > 1 else np.array([], int)
    lengths = np.diff(np.concatenate([[0], cuts, [keys]]))
    free = frames - keys
    # interior gaps need at least one background clip
    spare = free - (runs - 1)
    bars = np.sort(rng.integers(0, spare + 1, size=runs))
    gaps = np.diff(np.concatenate([[0], bars]))
    segments, pos = [], 0
    for i in range(runs):
        pos += int(gaps[i]) + (1 if i > 0 else 0)
        segments.append((pos, pos + int(lengths[i])))
        pos += int(lengths[i])
    return segments


def generate(config: SynthConfig | None = None) -> list[VideoRecord]:
    """Generate planted videos; features are rounded to float32 like on disk."""
    config = config or SynthConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    prototypes = rng.standard_normal((config.clusters, config.dim)) / math.sqrt(config.dim)
    prototypes -= prototypes.mean(axis=0)
    child_seeds = np.random.SeedSequence(config.seed).spawn(config.videos)
    per_clip = 1.0 / math.sqrt(config.dim)
    placed: list[np.ndarray] = []
    records = []
    width = len(str(config.videos - 1))
    for v in range(config.videos):
        vr = np.random.default_rng(child_seeds[v])
        salient = _salient(rng, config, placed)
        placed.append(salient)
        centroids = prototypes
        frames = int(vr.integers(config.frames_min, config.frames_max + 1))
        keys = key_count(frames, config.key_fraction)
        cluster = vr.integers(0, config.clusters, size=frames)
        feats = centroids[cluster] + config.spread * per_clip * vr.standard_normal((frames, config.dim))
        segments = _run_layout(vr, frames, keys, config.key_runs)
        key_idx = np.concatenate([np.arange(s, e) for s, e in segments])
        feats[key_idx] = (
            feats[key_idx]
            + config.key_magnitude * salient
            + config.noise * per_clip * vr.standard_normal((keys, config.dim))
        )
        importance = np.zeros(frames)
        importance[key_idx] = 1.0
        records.append(
            VideoRecord(
                id=f"video_{v:0{width}d}",
                features=feats.T.astype(np.float32).astype(np.float64),
                importance=importance,
                highlights=segments,
                summary=np.sort(key_idx),
            )
        )
    return records
