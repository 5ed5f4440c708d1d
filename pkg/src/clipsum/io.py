"""Feature files, dataset manifests, cross-validation folds and run configs.

Feature file layout (little endian)::

    b"CSUM" | version u32 | D u32 | T u32 | T blocks of D float32

Manifest (JSON)::

    {"videos": [{"id": "v0", "features": "features/v0.csum",
                 "importance": [...], "highlights": [[start, end], ...],
                 "summary": [0, 1, ...], "fold": 0}, ...]}

Paths are resolved relative to the manifest file.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

FEATURE_MAGIC = b"CSUM"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIII")


class FeatureFileError(ValueError):
    pass


class BadMagicError(FeatureFileError):
    pass


class BadVersionError(FeatureFileError):
    pass


class TruncatedPayloadError(FeatureFileError):
    pass


class DimensionZeroError(FeatureFileError):
    pass


class ManifestError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def encode_features(seq: np.ndarray) -> bytes:
    seq = np.asarray(seq)
    if seq.ndim != 2:
        raise ValueError(f"feature sequence must be D x T, got shape {seq.shape}")
    d, t = seq.shape
    if d == 0 or t == 0:
        raise DimensionZeroError(f"feature sequence has a zero dimension: {seq.shape}")
    payload = np.ascontiguousarray(seq.T, dtype="<f4").tobytes()
    return _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, d, t) + payload


def decode_features(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"file has {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, d, t = _HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise BadVersionError(f"unsupported feature file version {version}")
    if d == 0 or t == 0:
        raise DimensionZeroError(f"header declares D={d}, T={t}")
    expected = 4 * d * t
    payload = data[_HEADER.size :]
    if len(payload) != expected:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, expected {expected}")
    block = np.frombuffer(payload, dtype="<f4").reshape(t, d)
    return block.T.astype(np.float64)


def write_features(path, seq: np.ndarray) -> None:
    Path(path).write_bytes(encode_features(seq))


def read_features(path) -> np.ndarray:
    """Load a D x T float64 array from a feature file."""
    return decode_features(Path(path).read_bytes())


@dataclass
class VideoRecord:
    id: str
    features: np.ndarray
    importance: np.ndarray | None = None
    highlights: list[tuple[int, int]] = field(default_factory=list)
    summary: np.ndarray | None = None
    fold: int | None = None

    @property
    def frames(self) -> int:
        return self.features.shape[1]

    def truth_mask(self, k: int) -> np.ndarray:
        """Binary ground-truth summary mask.

        Uses the explicit summary when the manifest has one, else the k
        most important clips.
        """
        mask = np.zeros(self.frames, dtype=bool)
        if self.summary is not None:
            mask[np.asarray(self.summary, dtype=int)] = True
            return mask
        if self.importance is None:
            raise ManifestError(f"video {self.id!r} has no ground truth")
        order = np.argsort(-self.importance, kind="stable")
        mask[order[:k]] = True
        return mask


def normalize_importance(values) -> np.ndarray:
    """Map importance to [0, 1]; raw 1-5 annotation scales are rescaled."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v.max() > 1.0 or v.min() < 0.0):
        if v.min() >= 1.0 and v.max() <= 5.0:
            return (v - 1.0) / 4.0
        raise ManifestError("importance values must lie in [0, 1] or on a 1-5 scale")
    return v


def load_manifest(path) -> list[VideoRecord]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    entries = doc.get("videos") if isinstance(doc, dict) else None
    if not isinstance(entries, list):
        raise ManifestError(f"{path}: expected an object with a 'videos' list")
    records, seen = [], set()
    for entry in entries:
        vid = str(entry["id"])
        if vid in seen:
            raise ManifestError(f"duplicate video id {vid!r}")
        seen.add(vid)
        feat_path = path.parent / entry["features"]
        if not feat_path.exists():
            raise ManifestError(f"video {vid!r}: feature file {feat_path} not found")
        feats = read_features(feat_path)
        rec = VideoRecord(id=vid, features=feats, fold=entry.get("fold"))
        if entry.get("importance") is not None:
            rec.importance = normalize_importance(entry["importance"])
            if rec.importance.size != rec.frames:
                raise ManifestError(f"video {vid!r}: importance has {rec.importance.size} values, features have {rec.frames} clips")
        if entry.get("summary") is not None:
            rec.summary = np.asarray(entry["summary"], dtype=int)
        segs = [tuple(int(x) for x in s) for s in entry.get("highlights") or []]
        if any(s >= e for s, e in segs):
            raise ManifestError(f"video {vid!r}: highlight segments need start < end")
        segs.sort()
        if any(a[1] > b[0] for a, b in zip(segs, segs[1:])):
            raise ManifestError(f"video {vid!r}: highlight segments overlap")
        rec.highlights = segs
        records.append(rec)
    return records


def manifest_entry(rec: VideoRecord, feature_path: str) -> dict:
    entry: dict[str, Any] = {"id": rec.id, "features": feature_path}
    if rec.importance is not None:
        entry["importance"] = [float(x) for x in rec.importance]
    if rec.highlights:
        entry["highlights"] = [[int(s), int(e)] for s, e in rec.highlights]
    if rec.summary is not None:
        entry["summary"] = [int(i) for i in rec.summary]
    if rec.fold is not None:
        entry["fold"] = int(rec.fold)
    return entry


def save_dataset(records: Sequence[VideoRecord], out_dir, manifest_name: str = "manifest.json") -> Path:
    """Write feature files under ``out_dir/features`` plus a manifest."""
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        rel = f"features/{rec.id}.csum"
        write_features(out_dir / rel, rec.features)
        entries.append(manifest_entry(rec, rel))
    manifest = out_dir / manifest_name
    manifest.write_text(json.dumps({"videos": entries}, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def make_folds(records: Sequence[VideoRecord], folds: int = 5, seed: int = 0) -> dict[str, int]:
    """Video id -> fold. Explicit folds in the manifest are returned as given."""
    given = [r.fold for r in records]
    if all(f is not None for f in given) and records:
        return {r.id: int(r.fold) for r in records}
    if any(f is not None for f in given):
        raise ManifestError("either every video or none must carry a fold")
    if len(records) < folds:
        raise ManifestError(f"{len(records)} videos cannot fill {folds} folds")
    order = np.random.default_rng(seed).permutation(len(records))
    return {records[i].id: pos % folds for pos, i in enumerate(order)}


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class HighlightSettings:
    sigma: float = 2.0
    theta: float = 0.5
    theta_grid: list[float] | None = None


@dataclass
class RunConfig:
    """Training and highlight settings loaded from a JSON file.

    Sections mirror the nested dataclasses: ``train`` (top-level training
    fields), ``selector``, ``contrastive`` and ``highlight``; ``seed`` sits at
    the top level.
    """

    seed: int = 0
    train: dict = field(default_factory=dict)
    selector: dict = field(default_factory=dict)
    contrastive: dict = field(default_factory=dict)
    highlight: dict = field(default_factory=dict)

    def training_config(self):
        from .pipeline import TrainingConfig

        return TrainingConfig.from_dict({**self.train, "seed": self.seed, "selector": self.selector, "contrastive": self.contrastive})

    def highlight_settings(self) -> HighlightSettings:
        return HighlightSettings(**self.highlight)


def config_fields() -> dict[str, dict[str, Any]]:
    """Section -> {field: default} for every overridable setting."""
    from .pipeline import TrainingConfig

    defaults = TrainingConfig()
    nested = ("selector", "contrastive", "seed")
    train = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(TrainingConfig) if f.name not in nested}
    selector = {k: v for k, v in dataclasses.asdict(defaults.selector).items() if k != "k"}
    contrastive = dataclasses.asdict(defaults.contrastive)
    highlight = {f.name: f.default for f in dataclasses.fields(HighlightSettings)}
    return {"train": train, "selector": selector, "contrastive": contrastive, "highlight": highlight}


def parse_run_config(doc: dict) -> RunConfig:
    known = config_fields()
    for key in doc:
        if key != "seed" and key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    for section, values in doc.items():
        if section == "seed":
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key in values:
            if key not in known[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    return RunConfig(
        seed=int(doc.get("seed", 0)),
        train=dict(doc.get("train", {})),
        selector=dict(doc.get("selector", {})),
        contrastive=dict(doc.get("contrastive", {})),
        highlight=dict(doc.get("highlight", {})),
    )


def load_run_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_run_config(doc)
