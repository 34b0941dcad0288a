"""Keyshot summaries under a length budget and their F-score against users."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import torch

from .core import (
    FrameFeatureSequence,
    Manifest,
    ShotSummary,
    UserSummaries,
    ValidationError,
    load_sequences,
    read_user_summaries,
)
from .network import KeyframeSelector, num_keyframes, selector_forward
from .tempseg import KTSConfig, SegmentList, kts_with_config

AGGREGATIONS = ("mean", "max")


@dataclass(frozen=True)
class EvalConfig:
    budget_ratio: float = 0.15
    user_aggregation: str = "mean"
    kts: KTSConfig = field(default_factory=KTSConfig)

    def __post_init__(self):
        if not 0 < self.budget_ratio <= 1:
            raise ValidationError("budget_ratio must lie in (0, 1]")
        if self.user_aggregation not in AGGREGATIONS:
            raise ValidationError(f"user_aggregation must be one of {AGGREGATIONS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VideoScore:
    video_id: str
    precision: float
    recall: float
    f_score: float


def knapsack_select(weights: Sequence[int], values: Sequence, capacity: int) -> list:
    """Exact 0/1 knapsack.

    Maximizes total value under ``capacity``; among optimal sets the one
    with the smallest total weight wins, then the lexicographically
    smallest sorted index tuple. Values may be ints, floats or Fractions;
    comparisons are exact.
    """
    if capacity < 0:
        raise ValidationError("capacity must be non-negative")
    if len(weights) != len(values):
        raise ValidationError("weights and values must have equal length")
    n = len(weights)
    for w in weights:
        if int(w) != w or w < 1:
            raise ValidationError("weights must be positive integers")
    if any(v < 0 for v in values):
        raise ValidationError("values must be non-negative")

    # best[c] holds (value, weight, items) for items i..n-1 under capacity c;
    # items are added back to front so every stored tuple stays sorted.
    best = [(0, 0, ())] * (capacity + 1)
    for i in range(n - 1, -1, -1):
        w, v = int(weights[i]), values[i]
        nxt = list(best)
        for c in range(w, capacity + 1):
            rv, rw, rs = best[c - w]
            cand = (rv + v, rw + w, (i,) + rs)
            cur = nxt[c]
            if (cand[0], -cand[1]) > (cur[0], -cur[1]) or (
                cand[0] == cur[0] and cand[1] == cur[1] and cand[2] < cur[2]
            ):
                nxt[c] = cand
        best = nxt
    return list(best[capacity][2])


def budget_capacity(T: int, budget_ratio: float) -> int:
    # small epsilon guards ratios like 0.15 * 20 = 2.9999999999999996
    return int(math.floor(budget_ratio * T + 1e-9))


def keyframes_to_keyshots(keyframe_mask, segments: SegmentList, config: EvalConfig = EvalConfig()) -> ShotSummary:
    mask = np.asarray(keyframe_mask).astype(np.int64)
    T = mask.shape[0]
    if segments.T != T:
        raise ValidationError(f"segments cover {segments.T} frames, mask has {T}")
    spans = segments.segments()
    lengths = [b - a for a, b in spans]
    values = [Fraction(int(mask[a:b].sum()), b - a) for a, b in spans]
    chosen = knapsack_select(lengths, values, budget_capacity(T, config.budget_ratio))
    out = np.zeros(T, dtype=np.uint8)
    for i in chosen:
        a, b = spans[i]
        out[a:b] = 1
    return ShotSummary(out)


def precision_recall_f(X, Y) -> tuple:
    x = np.asarray(X.mask if isinstance(X, ShotSummary) else X).astype(bool)
    y = np.asarray(Y).astype(bool)
    if x.shape != y.shape:
        raise ValidationError(f"summary lengths differ: {x.shape} vs {y.shape}")
    overlap = int(np.count_nonzero(x & y))
    nx, ny = int(x.sum()), int(y.sum())
    p = overlap / nx if nx else 0.0
    r = overlap / ny if ny else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def evaluate_video(pred, users: UserSummaries, aggregation: str = "mean") -> VideoScore:
    x = pred.mask if isinstance(pred, ShotSummary) else np.asarray(pred)
    if users.T != x.shape[0]:
        raise ValidationError(f"{users.video_id}: prediction has {x.shape[0]} frames, users have {users.T}")
    prf = np.array([precision_recall_f(x, y) for y in users.masks])
    if aggregation == "mean":
        p, r, f = prf.mean(axis=0)
    elif aggregation == "max":
        p, r, f = prf.max(axis=0)
    else:
        raise ValidationError(f"unknown aggregation {aggregation!r}")
    return VideoScore(users.video_id, float(p), float(r), float(f))


def keyframe_mask(T: int, indices) -> np.ndarray:
    m = np.zeros(T, dtype=np.uint8)
    m[np.asarray(indices, dtype=np.int64)] = 1
    return m


def summarize_video(selector: KeyframeSelector, v: FrameFeatureSequence, config: EvalConfig, segments=None) -> dict:
    """Inference path: selector -> keyframes -> segments -> keyshot summary."""
    _, summary = selector_forward(selector, v, num_keyframes(v.T, selector.config.k_ratio))
    if segments is None:
        segments = kts_with_config(v, config.kts)
    shots = keyframes_to_keyshots(keyframe_mask(v.T, summary.selected_indices), segments, config)
    return {"keyframes": summary.selected_indices, "segments": segments, "summary": shots}


def random_keyshots(v_T: int, k: int, segments: SegmentList, config: EvalConfig, rng: np.random.Generator) -> ShotSummary:
    """Baseline: k uniformly random key frames through the same keyshot pipeline."""
    idx = rng.choice(v_T, size=k, replace=False)
    return keyframes_to_keyshots(keyframe_mask(v_T, idx), segments, config)


def _pct(x: float) -> float:
    return round(100.0 * float(x), 4)


def score_report(scores: list) -> dict:
    return {
        "per_video": [
            {"video_id": s.video_id, "P": _pct(s.precision), "R": _pct(s.recall), "F": _pct(s.f_score)} for s in scores
        ],
        "mean_P": _pct(np.mean([s.precision for s in scores])),
        "mean_R": _pct(np.mean([s.recall for s in scores])),
        "mean_F": _pct(np.mean([s.f_score for s in scores])),
    }


@dataclass
class TestVideo:
    __test__ = False  # not a pytest test class

    sequence: FrameFeatureSequence
    users: UserSummaries
    segments: Optional[SegmentList] = None


def load_test_set(manifest: Manifest, config: EvalConfig) -> list:
    records = manifest.by_role("test")
    if not records:
        raise ValidationError("no test videos")
    seqs = load_sequences(manifest, records)
    out = []
    for r in records:
        if r.annotation_path is None:
            raise ValidationError(f"test video {r.video_id} has no user summaries")
        users = read_user_summaries(manifest.resolve(r.annotation_path), r.video_id)
        seq = seqs[r.video_id]
        if users.T != seq.T:
            raise ValidationError(f"{r.video_id}: user summaries have {users.T} frames, features have {seq.T}")
        out.append(TestVideo(seq, users, kts_with_config(seq, config.kts)))
    return out


def evaluate_dataset(selector: KeyframeSelector, test_set, config: EvalConfig = EvalConfig()) -> dict:
    """Per-video and mean P/R/F (percent) of ``selector`` on a loaded test set."""
    if not test_set:
        raise ValidationError("no test videos")
    D = test_set[0].sequence.D
    if selector.config.D != D:
        raise ValidationError(f"checkpoint expects D={selector.config.D}, test corpus has D={D}")
    scores = []
    with torch.no_grad():
        for tv in test_set:
            out = summarize_video(selector, tv.sequence, config, tv.segments)
            scores.append(evaluate_video(out["summary"], tv.users, config.user_aggregation))
    report = score_report(scores)
    report["config"] = config.to_dict()
    return report


def evaluate_random_baseline(test_set, config: EvalConfig, k_ratio: float, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    scores = []
    for tv in test_set:
        T = tv.sequence.T
        pred = random_keyshots(T, num_keyframes(T, k_ratio), tv.segments, config, rng)
        scores.append(evaluate_video(pred, tv.users, config.user_aggregation))
    return score_report(scores)
