"""Domain types and the on-disk corpus format.

Feature files (``UVSN``) hold a T x D float32 matrix, annotation files
(``UVSA``) hold a U x T binary matrix, and a corpus is a tab-separated
manifest pointing at both.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

log = logging.getLogger(__name__)

FEATURE_MAGIC = b"UVSN"
ANNOTATION_MAGIC = b"UVSA"
FORMAT_VERSION = 1
ROLES = ("raw", "summary", "paired", "test")

_FEATURE_HEADER = struct.Struct("<4sIIII")
_ANNOTATION_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """A file does not follow the expected binary or manifest layout."""


class TruncatedFileError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class ValidationError(ValueError):
    """A value violates a domain invariant."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrameFeatureSequence:
    video_id: str
    features: np.ndarray

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float32, order="C")
        if f.ndim != 2:
            raise ValidationError(f"{self.video_id}: features must be 2-d, got shape {f.shape}")
        if f.shape[0] < 1 or f.shape[1] < 1:
            raise ValidationError(f"{self.video_id}: need T >= 1 and D >= 1, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValidationError(f"{self.video_id}: features contain non-finite values")
        object.__setattr__(self, "features", _frozen(f))

    @property
    def T(self) -> int:
        return self.features.shape[0]

    @property
    def D(self) -> int:
        return self.features.shape[1]


def _check_mask(mask, name: str) -> np.ndarray:
    m = np.asarray(mask)
    if m.size and not np.all((m == 0) | (m == 1)):
        raise ValidationError(f"{name}: mask values must be 0 or 1")
    return m.astype(np.uint8)


@dataclass(frozen=True)
class KeyframeAnnotation:
    video_id: str
    mask: np.ndarray

    def __post_init__(self):
        m = _check_mask(self.mask, self.video_id)
        if m.ndim != 1:
            raise ValidationError(f"{self.video_id}: keyframe mask must be 1-d")
        if not m.any():
            raise ValidationError(f"{self.video_id}: keyframe mask is empty")
        object.__setattr__(self, "mask", _frozen(m))

    @property
    def T(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class UserSummaries:
    video_id: str
    masks: np.ndarray

    def __post_init__(self):
        m = _check_mask(self.masks, self.video_id)
        if m.ndim != 2 or m.shape[0] < 1:
            raise ValidationError(f"{self.video_id}: user summaries must be U x T with U >= 1")
        if not np.all(m.any(axis=1)):
            raise ValidationError(f"{self.video_id}: every user summary must select a frame")
        object.__setattr__(self, "masks", _frozen(m))

    @property
    def T(self) -> int:
        return self.masks.shape[1]


@dataclass(frozen=True)
class SummaryFeatureSequence:
    selected_indices: np.ndarray
    features: np.ndarray
    video_id: str = ""

    def __post_init__(self):
        idx = np.asarray(self.selected_indices, dtype=np.int64)
        f = np.asarray(self.features)
        if idx.ndim != 1 or idx.size < 1:
            raise ValidationError("summary needs at least one selected index")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError("selected indices must be strictly increasing")
        if idx[0] < 0:
            raise ValidationError("selected indices must be non-negative")
        if f.ndim != 2 or f.shape[0] != idx.size:
            raise ValidationError(f"summary features must be k x D with k={idx.size}, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValidationError("summary features contain non-finite values")
        object.__setattr__(self, "selected_indices", _frozen(idx.copy()))
        object.__setattr__(self, "features", _frozen(np.array(f)))

    @property
    def k(self) -> int:
        return self.selected_indices.size


@dataclass(frozen=True)
class ShotSummary:
    mask: np.ndarray

    def __post_init__(self):
        m = _check_mask(self.mask, "shot summary")
        if m.ndim != 1:
            raise ValidationError("shot summary mask must be 1-d")
        object.__setattr__(self, "mask", _frozen(m))


@dataclass(frozen=True)
class UnpairedDataset:
    raw_videos: tuple
    real_summaries: tuple
    paired_subset: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "raw_videos", tuple(self.raw_videos))
        object.__setattr__(self, "real_summaries", tuple(self.real_summaries))
        object.__setattr__(self, "paired_subset", tuple(self.paired_subset))
        raw_ids = [v.video_id for v in self.raw_videos]
        if len(set(raw_ids)) != len(raw_ids):
            raise ValidationError("duplicate video_id among raw videos")
        overlap = set(raw_ids) & {s.video_id for s in self.real_summaries}
        if overlap:
            raise ValidationError(f"video ids appear as both raw and summary: {sorted(overlap)}")
        raw_set = set(raw_ids)
        for seq, ann in self.paired_subset:
            if seq.video_id not in raw_set:
                raise ValidationError(f"paired video {seq.video_id} is not among the raw videos")
            if ann.T != seq.T:
                raise ValidationError(f"{seq.video_id}: annotation length {ann.T} != T={seq.T}")
        dims = {v.D for v in self.raw_videos} | {s.features.shape[1] for s in self.real_summaries}
        if len(dims) > 1:
            raise ValidationError(f"mixed feature dimensions in dataset: {sorted(dims)}")

    @property
    def paired_ids(self) -> set:
        return {seq.video_id for seq, _ in self.paired_subset}


# -- binary formats -----------------------------------------------------------


def write_features(path, seq: FrameFeatureSequence) -> None:
    f = seq.features
    if not np.all(np.isfinite(f)):
        raise ValidationError(f"{seq.video_id}: refusing to write non-finite features")
    header = _FEATURE_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, f.shape[0], f.shape[1], 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f.astype("<f4", copy=False).tobytes(order="C"))


def read_features(path, video_id: Optional[str] = None) -> FrameFeatureSequence:
    data = Path(path).read_bytes()
    if len(data) < _FEATURE_HEADER.size:
        raise TruncatedFileError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, T, D, _flags = _FEATURE_HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {FORMAT_VERSION}")
    if T < 1 or D < 1:
        raise ValidationError(f"{path}: header declares T={T}, D={D}; both must be >= 1")
    expected = _FEATURE_HEADER.size + 4 * T * D
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: payload truncated ({len(data)} of {expected} bytes)")
    if len(data) > expected:
        raise FormatError(f"{path}: {len(data) - expected} trailing bytes after payload")
    feats = np.frombuffer(data, dtype="<f4", count=T * D, offset=_FEATURE_HEADER.size).reshape(T, D)
    if not np.all(np.isfinite(feats)):
        raise ValidationError(f"{path}: payload contains non-finite values")
    if video_id is None:
        video_id = Path(path).name.split(".")[0]
    return FrameFeatureSequence(video_id, feats.astype(np.float32))


def write_annotation(path, masks) -> None:
    """Write a U x T (or length-T) binary mask as a ``UVSA`` file."""
    m = np.atleast_2d(_check_mask(masks, str(path)))
    U, T = m.shape
    with open(path, "wb") as fh:
        fh.write(_ANNOTATION_HEADER.pack(ANNOTATION_MAGIC, FORMAT_VERSION, T, U))
        fh.write(m.astype(np.uint8).tobytes(order="C"))


def read_annotation(path) -> np.ndarray:
    """Return the U x T uint8 mask stored in ``path``."""
    data = Path(path).read_bytes()
    if len(data) < _ANNOTATION_HEADER.size:
        raise TruncatedFileError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, T, U = _ANNOTATION_HEADER.unpack_from(data)
    if magic != ANNOTATION_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {ANNOTATION_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {FORMAT_VERSION}")
    if T < 1 or U < 1:
        raise ValidationError(f"{path}: header declares T={T}, U={U}; both must be >= 1")
    expected = _ANNOTATION_HEADER.size + U * T
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: payload truncated ({len(data)} of {expected} bytes)")
    if len(data) > expected:
        raise FormatError(f"{path}: {len(data) - expected} trailing bytes after payload")
    m = np.frombuffer(data, dtype=np.uint8, count=U * T, offset=_ANNOTATION_HEADER.size)
    return _check_mask(m.reshape(U, T), str(path))


def read_keyframes(path, video_id: str) -> KeyframeAnnotation:
    m = read_annotation(path)
    if m.shape[0] != 1:
        raise FormatError(f"{path}: keyframe annotation must have U=1, got U={m.shape[0]}")
    return KeyframeAnnotation(video_id, m[0])


def read_user_summaries(path, video_id: str) -> UserSummaries:
    return UserSummaries(video_id, read_annotation(path))


def build_real_summary(seq: FrameFeatureSequence, ann: KeyframeAnnotation) -> SummaryFeatureSequence:
    if ann.T != seq.T:
        raise ValidationError(f"{seq.video_id}: mask length {ann.T} != T={seq.T}")
    idx = np.flatnonzero(ann.mask)
    if idx.size == 0:
        raise ValidationError(f"{seq.video_id}: empty keyframe mask")
    return SummaryFeatureSequence(idx, seq.features[idx], video_id=seq.video_id)


# -- manifests ----------------------------------------------------------------


@dataclass(frozen=True)
class ManifestRecord:
    video_id: str
    role: str
    feature_path: str
    annotation_path: Optional[str] = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise FormatError(f"unknown role {self.role!r} for {self.video_id}")
        if not self.video_id or "\t" in self.video_id:
            raise FormatError(f"invalid video id {self.video_id!r}")


@dataclass
class Manifest:
    records: list = field(default_factory=list)
    root: Path = Path(".")

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.root / q

    def by_role(self, *roles: str) -> list:
        return [r for r in self.records if r.role in roles]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def parse_manifest(text: str, root=".") -> Manifest:
    records = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 4:
            raise FormatError(f"manifest line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
        vid, role, feat, ann = parts
        records.append(ManifestRecord(vid, role, feat, None if ann == "-" else ann))
    return Manifest(records, Path(root))


def read_manifest(path) -> Manifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), root=path.parent)


def format_manifest(records: Iterable[ManifestRecord]) -> str:
    return "".join(
        f"{r.video_id}\t{r.role}\t{r.feature_path}\t{r.annotation_path or '-'}\n" for r in records
    )


def write_manifest(path, records: Iterable[ManifestRecord], root=None) -> None:
    """Write records, rewriting paths relative to the manifest's directory.

    ``root`` is the directory the incoming relative paths are anchored to.
    """
    path = Path(path)
    out_dir = path.parent.resolve()
    rewritten = []
    for r in records:
        def rel(p):
            if p is None:
                return None
            q = Path(p)
            if not q.is_absolute() and root is not None:
                q = Path(root) / q
            return os.path.relpath(q.resolve(), out_dir)

        rewritten.append(ManifestRecord(r.video_id, r.role, rel(r.feature_path), rel(r.annotation_path)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_manifest(rewritten))


def load_sequences(manifest: Manifest, records=None) -> dict:
    """Read feature files for ``records``; all must share one D."""
    seqs = {}
    first = None
    for r in records if records is not None else manifest.records:
        if r.video_id in seqs:
            continue
        p = manifest.resolve(r.feature_path)
        seq = read_features(p, video_id=r.video_id)
        if first is None:
            first = (p, seq.D)
        elif seq.D != first[1]:
            raise ValidationError(
                f"mixed feature dimensions: {first[0]} has D={first[1]} but {p} has D={seq.D}"
            )
        seqs[r.video_id] = seq
    return seqs


def load_unpaired_dataset(manifest: Manifest) -> UnpairedDataset:
    """Build the training view of a manifest (roles raw, paired, summary)."""
    train = manifest.by_role("raw", "paired", "summary")
    seqs = load_sequences(manifest, train)
    raw, summaries, paired = [], [], []
    for r in train:
        seq = seqs[r.video_id]
        if r.role in ("raw", "paired"):
            raw.append(seq)
        if r.role == "paired":
            if r.annotation_path is None:
                raise FormatError(f"paired video {r.video_id} has no annotation path")
            paired.append((seq, read_keyframes(manifest.resolve(r.annotation_path), r.video_id)))
        if r.role == "summary":
            if r.annotation_path is None:
                raise FormatError(f"summary video {r.video_id} has no annotation path")
            ann = read_keyframes(manifest.resolve(r.annotation_path), r.video_id)
            summaries.append(build_real_summary(seq, ann))
    return UnpairedDataset(raw, summaries, paired)
