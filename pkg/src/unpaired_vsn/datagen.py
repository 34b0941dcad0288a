"""Unpaired split construction and synthetic corpora with planted structure.

A *catalog* manifest describes one source dataset: every video appears
once with role ``summary`` (annotation = its U=1 keyframe file) and once
with role ``test`` (annotation = its user-summary file). Splits select the
role each video plays in training or testing.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    FrameFeatureSequence,
    Manifest,
    ManifestRecord,
    ValidationError,
    write_annotation,
    write_features,
    write_manifest,
)
from .evalkit import budget_capacity

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitSpec:
    target_dataset: str
    mode: str = "standard"
    test_fraction: float = 0.2
    unpaired_fraction: float = 0.5
    psup_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("standard", "transfer"):
            raise ValidationError(f"mode must be 'standard' or 'transfer', got {self.mode!r}")
        for name in ("test_fraction", "unpaired_fraction", "psup_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")


@dataclass
class CatalogEntry:
    video_id: str
    feature_path: str
    keyframe_path: Optional[str]
    users_path: Optional[str]


def catalog_entries(manifest: Manifest) -> list:
    """Collapse a catalog manifest into one entry per video (absolute paths)."""
    entries, order = {}, []
    for r in manifest.records:
        e = entries.get(r.video_id)
        if e is None:
            e = entries[r.video_id] = CatalogEntry(r.video_id, str(manifest.resolve(r.feature_path)), None, None)
            order.append(r.video_id)
        ann = str(manifest.resolve(r.annotation_path)) if r.annotation_path else None
        if r.role == "test":
            e.users_path = ann
        else:
            e.keyframe_path = ann
    return [entries[v] for v in order]


def make_unpaired_split(catalogs: dict, spec: SplitSpec) -> tuple:
    """Return (training records, test records) for the target dataset.

    ``catalogs`` maps dataset name -> Manifest. Standard mode tests on a
    seeded ``test_fraction`` of the target and pools the rest with every
    other dataset; transfer mode tests on the whole target and trains on the
    other datasets only. The pool is split into raw-only (ceil half) and
    summary-only videos.
    """
    if spec.target_dataset not in catalogs:
        raise ValidationError(f"target dataset {spec.target_dataset!r} not among {sorted(catalogs)}")
    entries = {name: catalog_entries(m) for name, m in catalogs.items()}
    seen = {}
    for name, es in entries.items():
        for e in es:
            if e.video_id in seen:
                raise ValidationError(f"video id {e.video_id!r} appears in both {seen[e.video_id]} and {name}")
            seen[e.video_id] = name

    rng = np.random.default_rng(spec.seed)
    target = entries[spec.target_dataset]
    if spec.mode == "standard":
        n_test = int(round(spec.test_fraction * len(target)))
        test_idx = set(rng.choice(len(target), size=n_test, replace=False).tolist())
        test = [e for i, e in enumerate(target) if i in test_idx]
        pool = [e for i, e in enumerate(target) if i not in test_idx]
    else:
        test = list(target)
        pool = []
    for name in sorted(entries):
        if name != spec.target_dataset:
            pool.extend(entries[name])
    if not pool:
        raise ValidationError("training pool is empty")
    if not test:
        raise ValidationError("test set is empty")

    perm = rng.permutation(len(pool))
    n_raw = math.ceil(spec.unpaired_fraction * len(pool))
    raw_set = set(perm[:n_raw].tolist())
    train = []
    for i, e in enumerate(pool):
        if i in raw_set:
            train.append(ManifestRecord(e.video_id, "raw", e.feature_path, None))
        else:
            if e.keyframe_path is None:
                raise ValidationError(f"summary video {e.video_id} has no keyframe annotation")
            train.append(ManifestRecord(e.video_id, "summary", e.feature_path, e.keyframe_path))
    test_records = []
    for e in test:
        if e.users_path is None:
            raise ValidationError(f"test video {e.video_id} has no user summaries")
        test_records.append(ManifestRecord(e.video_id, "test", e.feature_path, e.users_path))
    return train, test_records


def mark_partial_supervision(records: list, psup_fraction: float, catalogs: dict) -> list:
    """Give the first ceil(fraction * M) raw videos role ``paired`` with their keyframe files."""
    if not 0 <= psup_fraction <= 1:
        raise ValidationError("psup_fraction must lie in [0, 1]")
    raw_positions = [i for i, r in enumerate(records) if r.role == "raw"]
    n = math.ceil(psup_fraction * len(raw_positions))
    if n == 0:
        return list(records)
    lookup = {}
    for m in catalogs.values():
        for e in catalog_entries(m):
            lookup[e.video_id] = e.keyframe_path
    out = list(records)
    for i in raw_positions[:n]:
        r = out[i]
        ann = lookup.get(r.video_id)
        if ann is None or not Path(ann).exists():
            raise ValidationError(f"missing keyframe annotation for {r.video_id}")
        out[i] = ManifestRecord(r.video_id, "paired", r.feature_path, ann)
    return out


def split_summary(train: list, test: list) -> dict:
    roles = [r.role for r in train]
    return {
        "raw": roles.count("raw") + roles.count("paired"),
        "paired": roles.count("paired"),
        "summary": roles.count("summary"),
        "test": len(test),
    }


# -- synthetic corpora -------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    n_videos: int = 200
    T_range: tuple = (100, 150)
    D: int = 16
    n_segments_range: tuple = (10, 16)
    important_fraction: float = 0.1
    noise_sigma: float = 0.05
    n_users: int = 3
    seed: int = 0
    budget_ratio: float = 0.15
    min_segment_length: int = 3
    # cosine between an important centroid and the corpus salient direction
    salience: float = 0.6
    min_angle_deg: float = 60.0
    # centroid norm; noise_sigma is relative to a unit centroid
    feature_scale: float = 5.0
    id_prefix: str = "synth"

    def __post_init__(self):
        lo, hi = self.T_range
        glo, ghi = self.n_segments_range
        if not (1 <= lo <= hi and 1 <= glo <= ghi):
            raise ValidationError("invalid T or segment-count range")
        if glo * self.min_segment_length > lo:
            raise ValidationError("shortest video cannot hold the minimum number of segments")
        if not 0 < self.important_fraction <= 1 or self.noise_sigma < 0 or self.n_users < 1 or self.D < 2:
            raise ValidationError("invalid synthetic corpus parameters")
        if self.feature_scale <= 0:
            raise ValidationError("invalid synthetic corpus parameters")


@dataclass
class SynthVideo:
    video_id: str
    features: np.ndarray
    boundaries: np.ndarray
    important: list
    medoids: list
    keyframes: np.ndarray
    users: np.ndarray

    def truth(self) -> dict:
        return {
            "video_id": self.video_id,
            "boundaries": self.boundaries.tolist(),
            "important_segments": [int(g) for g in self.important],
            "medoids": list(self.medoids),
        }


def salient_direction(spec: SynthSpec) -> np.ndarray:
    u = np.random.default_rng([spec.seed, 0xC0FFEE]).standard_normal(spec.D)
    return u / np.linalg.norm(u)


def _random_boundaries(rng, T: int, G: int, min_len: int) -> np.ndarray:
    # stars and bars over the slack beyond the minimum length
    slack = T - G * min_len
    cuts = np.sort(rng.choice(slack + G - 1, size=G - 1, replace=False)) if G > 1 else np.array([], int)
    extra = np.diff(np.concatenate([[-1], cuts, [slack + G - 1]])) - 1
    lengths = min_len + extra
    return np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)


def _centroids(rng, u: np.ndarray, important: np.ndarray, salience: float, min_angle_deg: float) -> np.ndarray:
    """Unit centroids with pairwise angle >= min_angle; important ones lean toward ``u``."""
    D = u.size
    max_cos = math.cos(math.radians(min_angle_deg))
    out = []
    for is_imp in important:
        for _ in range(10000):
            w = rng.standard_normal(D)
            w -= (w @ u) * u
            w /= np.linalg.norm(w)
            a = salience + rng.uniform(-0.05, 0.05) if is_imp else rng.uniform(-0.6, 0.1)
            c = a * u + math.sqrt(1 - a * a) * w
            if all(c @ o <= max_cos for o in out):
                out.append(c)
                break
        else:
            raise ValidationError("could not place well-separated centroids; lower min_angle_deg or D")
    return np.array(out)


def generate_video(spec: SynthSpec, index: int, u: Optional[np.ndarray] = None) -> SynthVideo:
    rng = np.random.default_rng([spec.seed, index])
    u = salient_direction(spec) if u is None else u
    cap = None
    for _ in range(1000):
        T = int(rng.integers(spec.T_range[0], spec.T_range[1] + 1))
        G = int(rng.integers(spec.n_segments_range[0], spec.n_segments_range[1] + 1))
        G = min(G, T // spec.min_segment_length)
        bounds = _random_boundaries(rng, T, G, spec.min_segment_length)
        lengths = np.diff(bounds)
        cap = budget_capacity(T, spec.budget_ratio)
        want = max(1, int(math.floor(spec.important_fraction * G + rng.uniform())))
        chosen, used = [], 0
        for g in rng.permutation(G):
            if len(chosen) == want:
                break
            # leave one frame per segment for boundary jitter
            if used + lengths[g] + 1 <= cap:
                chosen.append(int(g))
                used += lengths[g] + 1
        if chosen:
            if len(chosen) < want:
                log.info("%s_%d: budget admits %d of %d important segments", spec.id_prefix, index, len(chosen), want)
            break
    else:
        raise ValidationError("cannot fit any important segment inside the budget")
    chosen.sort()
    is_imp = np.zeros(G, dtype=bool)
    is_imp[chosen] = True
    cents = _centroids(rng, u, is_imp, spec.salience, spec.min_angle_deg)
    seg_of = np.repeat(np.arange(G), lengths)
    feats = spec.feature_scale * (cents[seg_of] + spec.noise_sigma * rng.standard_normal((T, spec.D)))

    medoids = []
    keyframes = np.zeros(T, dtype=np.uint8)
    for g in chosen:
        a, b = bounds[g], bounds[g + 1]
        seg = feats[a:b]
        dist = np.linalg.norm(seg[:, None, :] - seg[None, :, :], axis=2).sum(axis=1)
        m = a + int(np.argmin(dist))
        medoids.append(int(m))
        keyframes[m] = 1

    users = np.zeros((spec.n_users, T), dtype=np.uint8)
    for j in range(spec.n_users):
        for g in chosen:
            a = int(np.clip(bounds[g] + rng.integers(-1, 2), 0, T - 1))
            b = int(np.clip(bounds[g + 1] + rng.integers(-1, 2), a + 1, T))
            users[j, a:b] = 1
        on = np.flatnonzero(users[j])
        if on.size > cap:
            users[j, on[cap:]] = 0
    return SynthVideo(
        f"{spec.id_prefix}_{index:04d}",
        feats.astype(np.float32),
        bounds,
        chosen,
        medoids,
        keyframes,
        users,
    )


def generate_synthetic_corpus(spec: SynthSpec, out_dir) -> Path:
    """Write features, annotations, truth sidecars and a catalog manifest.

    Returns the path of the catalog manifest ``catalog.tsv``.
    """
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(exist_ok=True)
    (out / "truth").mkdir(exist_ok=True)
    u = salient_direction(spec)
    records = []
    for i in range(spec.n_videos):
        vid = generate_video(spec, i, u)
        feat = f"features/{vid.video_id}.uvsn"
        kf = f"annotations/{vid.video_id}.keyframes.uvsa"
        us = f"annotations/{vid.video_id}.users.uvsa"
        write_features(out / feat, FrameFeatureSequence(vid.video_id, vid.features))
        write_annotation(out / kf, vid.keyframes[None, :])
        write_annotation(out / us, vid.users)
        (out / "truth" / f"{vid.video_id}.truth.json").write_text(json.dumps(vid.truth()) + "\n", encoding="utf-8")
        records.append(ManifestRecord(vid.video_id, "summary", feat, kf))
        records.append(ManifestRecord(vid.video_id, "test", feat, us))
    write_manifest(out / "catalog.tsv", records, root=out)
    params = asdict(spec)
    params["T_range"] = list(spec.T_range)
    params["n_segments_range"] = list(spec.n_segments_range)
    (out / "synth.json").write_text(json.dumps(params, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out / "catalog.tsv"


def write_split(out_dir, train: list, test: list) -> tuple:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "train.tsv", train)
    write_manifest(out / "test.tsv", test)
    return out / "train.tsv", out / "test.tsv"
