"""Trainable summarizer: feature extractor f, score predictor g, projection h.

Training contrasts each video's soft top-k summary against its own video
(positive) and every other video and summary in the batch (negatives). At
inference only f and g are used: the k highest-scoring clips form the summary.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .contrastive import ContrastiveConfig, ProjectionHead, contrastive_loss
from .selector import SelectorConfig, hard_topk, select

log = logging.getLogger(__name__)

EXTRACTORS = ("identity", "linear", "temporal-average-augment")
SUMMARY_EMBEDDINGS = ("project-then-select", "select-then-project")
CHECKPOINT_MAGIC = b"CSCK"
CHECKPOINT_VERSION = 1


class NumericError(RuntimeError):
    """Raised when training produces a non-finite loss."""


class CheckpointError(ValueError):
    pass


# Training overrides two module defaults. Scores are sigmoid outputs in (0, 1),
# so a sharpness of 100 freezes the soft ranking; with unit columns dist_n
# spans [-n, n], so the temperature is set for n = 10 rather than for n = 1.
TRAIN_ALPHA = 3.0
TRAIN_TAU = 1.0


def training_selector() -> SelectorConfig:
    return SelectorConfig(alpha=TRAIN_ALPHA)


def training_contrastive() -> ContrastiveConfig:
    return ContrastiveConfig(tau=TRAIN_TAU)


@dataclass
class TrainingConfig:
    epochs: int = 50
    batch_size: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    k_frac: float = 0.15
    hidden: int = 128
    extractor: str = "identity"
    extractor_window: int = 5
    projection_dim: int | None = None
    # "project-then-select" or "select-then-project"; identical for hard summaries
    summary_embedding: str = "project-then-select"
    selector: SelectorConfig = field(default_factory=training_selector)
    contrastive: ContrastiveConfig = field(default_factory=training_contrastive)

    def validate(self):
        if not 0 < self.k_frac <= 1:
            raise ValueError(f"k_frac must lie in (0, 1], got {self.k_frac}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.extractor not in EXTRACTORS:
            raise ValueError(f"unknown extractor {self.extractor!r}; expected one of {EXTRACTORS}")
        if self.summary_embedding not in SUMMARY_EMBEDDINGS:
            raise ValueError(f"unknown summary_embedding {self.summary_embedding!r}; expected one of {SUMMARY_EMBEDDINGS}")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        self.selector.validate()
        self.contrastive.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TrainingConfig:
        data = dict(data)
        # missing keys fall back to the training defaults, not the module defaults
        selector = dataclasses.replace(training_selector(), **data.pop("selector", {}))
        contrastive = dataclasses.replace(training_contrastive(), **data.pop("contrastive", {}))
        return cls(selector=selector, contrastive=contrastive, **data)


def summary_length(frames: int, k_frac: float) -> int:
    return max(1, min(frames, int(round(k_frac * frames))))


def moving_average_matrix(frames: int, window: int) -> np.ndarray:
    """T x T matrix so that ``X @ A`` is the centred moving average of columns.

    Windows are truncated at the sequence ends and renormalised.
    """
    half = window // 2
    a = np.zeros((frames, frames))
    for j in range(frames):
        lo, hi = max(0, j - half), min(frames, j + half + 1)
        a[lo:hi, j] = 1.0 / (hi - lo)
    return a


class FeatureExtractor:
    def __init__(self, d_in: int, variant: str = "identity", window: int = 5, rng: np.random.Generator | None = None):
        if variant not in EXTRACTORS:
            raise ValueError(f"unknown extractor {variant!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.variant, self.window, self.d_in = variant, window, d_in
        self.d_out = d_in
        self.params: list[Parameter] = []
        if variant == "linear":
            self.w = Parameter(ad.glorot(rng, d_in, d_in), "f.w")
            self.b = Parameter(np.zeros((d_in, 1)), "f.b")
            self.params = [self.w, self.b]
        elif variant == "temporal-average-augment":
            self.w = Parameter(ad.glorot(rng, d_in, 2 * d_in), "f.w")
            self.b = Parameter(np.zeros((d_in, 1)), "f.b")
            self.params = [self.w, self.b]

    def __call__(self, x) -> Tensor:
        x = ad.as_tensor(x)
        if x.ndim != 2 or x.shape[0] != self.d_in:
            raise ad.ShapeError("feature-extractor", x.shape, (self.d_in, "T"))
        if self.variant == "identity":
            return x
        if self.variant == "temporal-average-augment":
            avg = ad.matmul(x, moving_average_matrix(x.shape[1], self.window))
            x = ad.concat([x, avg], axis=0)
        return ad.add(ad.matmul(self.w, x), self.b)


class ScorePredictor:
    """Per-clip MLP D -> H -> 1 with ReLU then sigmoid."""

    def __init__(self, d_in: int, hidden: int = 128, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d_in, self.hidden = d_in, hidden
        self.w1 = Parameter(ad.glorot(rng, hidden, d_in), "g.w1")
        self.b1 = Parameter(np.zeros((hidden, 1)), "g.b1")
        self.w2 = Parameter(ad.glorot(rng, 1, hidden), "g.w2")
        self.b2 = Parameter(np.zeros((1, 1)), "g.b2")
        self.params = [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, feats) -> Tensor:
        feats = ad.as_tensor(feats)
        if feats.ndim != 2 or feats.shape[0] != self.d_in:
            raise ad.ShapeError("score-predictor", feats.shape, (self.d_in, "T"))
        hid = ad.relu(ad.add(ad.matmul(self.w1, feats), self.b1))
        logits = ad.add(ad.matmul(self.w2, hid), self.b2)
        return ad.reshape(ad.sigmoid(logits), (-1,))


class Summarizer:
    """Bundle of f, g and h built from a :class:`TrainingConfig`."""

    def __init__(self, input_dim: int, config: TrainingConfig, rng: np.random.Generator):
        self.input_dim = input_dim
        self.config = config
        self.f = FeatureExtractor(input_dim, config.extractor, config.extractor_window, rng)
        self.g = ScorePredictor(self.f.d_out, config.hidden, rng)
        self.h = ProjectionHead(self.f.d_out, config.projection_dim, rng)

    def parameters(self) -> list[Parameter]:
        return self.f.params + self.g.params + self.h.parameters()

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        return [(p.name, p) for p in self.parameters()]

    def scores(self, video) -> Tensor:
        return forward_scores(video, self.f, self.g)


def forward_scores(video, f: FeatureExtractor, g: ScorePredictor) -> Tensor:
    return g(f(video))


def extract_summary(video, scores, config: SelectorConfig, mode: str = "infer-hard", order: str = "rank") -> Tensor:
    """Summary as a D x k sequence.

    ``infer-hard`` returns the chosen columns in their original time order.
    ``train-soft`` returns the soft rows in selection-rank order, or sorted
    by expected clip position when ``order="time"``.
    """
    x = ad.as_tensor(video)
    if config.k > x.shape[1]:
        raise ValueError(f"k={config.k} exceeds video length {x.shape[1]}")
    if mode == "train-soft":
        res = select(x, scores, config)
        if order == "rank":
            return ad.transpose(res.selected)
        # rows sorted by expected clip index; the permutation itself is not differentiated
        expected = res.weights.data @ np.arange(x.shape[1])
        return ad.transpose(ad.take(res.selected, np.argsort(expected, kind="stable")))
    if mode == "infer-hard":
        idx = np.sort(hard_topk(ad.as_tensor(scores).data, config.k))
        return ad.take(x, (slice(None), idx))
    raise ValueError(f"unknown extraction mode {mode!r}")


def batch_loss(model: Summarizer, videos: Sequence[np.ndarray]) -> Tensor:
    """Mean per-anchor contrastive loss for one batch of D x T videos."""
    cfg = model.config
    embeds_v, embeds_s = [], []
    for video in videos:
        feats = model.f(video)
        scores = model.g(feats)
        if not ad.is_finite(scores):
            raise NumericError("non-finite importance scores")
        k = summary_length(feats.shape[1], cfg.k_frac)
        sel_cfg = dataclasses.replace(cfg.selector, k=k)
        mode = "infer-hard" if sel_cfg.method == "hard" else "train-soft"
        embed_v = model.h(feats, cfg.contrastive.normalize_columns)
        if cfg.summary_embedding == "project-then-select":
            embed_s = extract_summary(embed_v, scores, sel_cfg, mode)
        else:
            embed_s = model.h(extract_summary(feats, scores, sel_cfg, mode), cfg.contrastive.normalize_columns)
        embeds_v.append(embed_v)
        embeds_s.append(embed_s)
    loss = contrastive_loss(embeds_v, embeds_s, cfg.contrastive)
    return ad.scalar_mul(loss, 1.0 / (2 * len(videos)))


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    batches = [order[i : i + size] for i in range(0, len(order), size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


@dataclass
class Checkpoint:
    config: TrainingConfig
    input_dim: int
    params: dict[str, np.ndarray]
    epoch: int = 0
    rng_state: dict | None = None

    def build(self) -> Summarizer:
        model = Summarizer(self.input_dim, self.config, np.random.default_rng(0))
        names = {name for name, _ in model.named_parameters()}
        if names != set(self.params):
            raise CheckpointError(f"checkpoint parameters {sorted(self.params)} do not match model {sorted(names)}")
        for name, p in model.named_parameters():
            if p.data.shape != self.params[name].shape:
                raise CheckpointError(f"parameter {name} has shape {self.params[name].shape}, expected {p.data.shape}")
            p.data = self.params[name].copy()
        return model

    def to_bytes(self) -> bytes:
        meta = {
            "config": self.config.to_dict(),
            "input_dim": self.input_dim,
            "epoch": self.epoch,
            "rng_state": self.rng_state,
        }
        blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
        buf = io.BytesIO()
        buf.write(CHECKPOINT_MAGIC)
        buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        buf.write(blob)
        buf.write(struct.pack("<I", len(self.params)))
        for name, arr in self.params.items():
            raw = name.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
            buf.write(struct.pack("<I", arr.ndim))
            buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> Checkpoint:
        view = memoryview(data)
        pos = 0

        def read(n):
            nonlocal pos
            if pos + n > len(view):
                raise CheckpointError("truncated checkpoint")
            chunk = view[pos : pos + n]
            pos += n
            return chunk

        if bytes(read(4)) != CHECKPOINT_MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        version, meta_len = struct.unpack("<II", read(8))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        meta = json.loads(bytes(read(meta_len)).decode("utf-8"))
        (count,) = struct.unpack("<I", read(4))
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", read(4))
            name = bytes(read(name_len)).decode("utf-8")
            (ndim,) = struct.unpack("<I", read(4))
            shape = struct.unpack(f"<{ndim}I", read(4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            params[name] = np.frombuffer(read(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        if pos != len(view):
            raise CheckpointError("trailing bytes after checkpoint payload")
        return cls(
            config=TrainingConfig.from_dict(meta["config"]),
            input_dim=meta["input_dim"],
            params=params,
            epoch=meta["epoch"],
            rng_state=meta["rng_state"],
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> Checkpoint:
        return cls.from_bytes(Path(path).read_bytes())


def snapshot(model: Summarizer, epoch: int, rng: np.random.Generator | None) -> Checkpoint:
    return Checkpoint(
        config=model.config,
        input_dim=model.input_dim,
        params={name: p.data.copy() for name, p in model.named_parameters()},
        epoch=epoch,
        rng_state=rng.bit_generator.state if rng is not None else None,
    )


def _features_of(item) -> np.ndarray:
    return np.asarray(getattr(item, "features", item), dtype=np.float64)


def train(dataset, config: TrainingConfig, callback=None) -> tuple[Checkpoint, list[float]]:
    """Contrastive training over a list of D x T videos (or records with ``features``).

    Returns the final checkpoint and the per-epoch mean batch loss.
    ``callback(epoch, loss, model)`` runs after every epoch when given.
    """
    config.validate()
    videos = [_features_of(v) for v in dataset]
    if len(videos) < config.batch_size:
        raise ValueError(f"dataset has {len(videos)} videos, fewer than batch size {config.batch_size}")
    dims = {v.shape[0] for v in videos}
    if len(dims) != 1:
        raise ValueError(f"videos have mixed feature dimensions {sorted(dims)}")
    rng = np.random.default_rng(config.seed)
    model = Summarizer(dims.pop(), config, rng)
    params = model.parameters()
    history = []
    for epoch in range(config.epochs):
        losses = []
        for batch in _batches(rng.permutation(len(videos)), config.batch_size):
            loss = batch_loss(model, [videos[i] for i in batch])
            if not np.isfinite(loss.item()):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            ad.backward(loss)
            ad.adam_step(params, config.lr, config.beta1, config.beta2, config.eps)
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
        log.info("epoch %d loss %.6f", epoch, history[-1])
        if callback is not None:
            callback(epoch, history[-1], model)
    return snapshot(model, config.epochs, rng), history


def infer_importance_scores(video, checkpoint: Checkpoint | Summarizer) -> np.ndarray:
    model = checkpoint.build() if isinstance(checkpoint, Checkpoint) else checkpoint
    x = _features_of(video)
    if x.ndim != 2 or x.shape[0] != model.input_dim:
        raise ad.ShapeError("infer_importance_scores", x.shape, (model.input_dim, "T"))
    return model.scores(x).data.copy()


def summarize(video, checkpoint: Checkpoint | Summarizer, k: int | None = None) -> np.ndarray:
    """Indices of the selected clips in time order."""
    model = checkpoint.build() if isinstance(checkpoint, Checkpoint) else checkpoint
    scores = infer_importance_scores(video, model)
    k = k or summary_length(scores.size, model.config.k_frac)
    return np.sort(hard_topk(scores, k))
