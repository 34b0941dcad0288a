"""Kernel temporal segmentation.

Change points minimize the total within-segment kernel scatter; the number
of segments is chosen by a penalized criterion unless fixed by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FrameFeatureSequence, ValidationError


@dataclass(frozen=True)
class SegmentList:
    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.int64)
        if b.ndim != 1 or b.size < 2 or b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValidationError(f"boundaries must be strictly increasing from 0, got {b.tolist()}")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)

    @property
    def T(self) -> int:
        return int(self.boundaries[-1])

    def __len__(self):
        return self.boundaries.size - 1

    def segments(self) -> list:
        b = self.boundaries
        return [(int(b[i]), int(b[i + 1])) for i in range(b.size - 1)]

    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)


@dataclass(frozen=True)
class KTSConfig:
    # 0 -> derived from T as ceil(T / frames_per_segment)
    max_segments: int = 0
    frames_per_segment: int = 4
    penalty_coeff: float = 1.0
    normalize: bool = True
    # fixes the number of segments and skips model selection
    n_segments: Optional[int] = None

    def max_for(self, T: int) -> int:
        m = self.max_segments if self.max_segments > 0 else -(-T // self.frames_per_segment)
        return max(1, min(T, m))


def _features(v) -> np.ndarray:
    return np.asarray(v.features if isinstance(v, FrameFeatureSequence) else v, dtype=np.float64)


def gram_matrix(v, normalize: bool = True) -> np.ndarray:
    x = _features(v)
    if normalize:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.where(norms > 0, norms, 1.0)
    K = x @ x.T
    return (K + K.T) / 2


class ScatterTable:
    """O(1) within-segment scatter queries from prefix sums of a Gram matrix."""

    def __init__(self, K: np.ndarray):
        K = np.asarray(K, dtype=np.float64)
        n = K.shape[0]
        self.T = n
        self.diag = np.concatenate([[0.0], np.cumsum(np.diag(K))])
        P = np.zeros((n + 1, n + 1))
        P[1:, 1:] = K.cumsum(0).cumsum(1)
        self.P = P

    def cost(self, a: int, b: int) -> float:
        if not 0 <= a < b <= self.T:
            raise ValidationError(f"segment [{a}, {b}) is empty or out of range for T={self.T}")
        P = self.P
        block = P[b, b] - P[a, b] - P[b, a] + P[a, a]
        return float(self.diag[b] - self.diag[a] - block / (b - a))

    def matrix(self) -> np.ndarray:
        """C[a, b] = cost(a, b) for a < b, +inf elsewhere; shape (T+1, T+1)."""
        n = self.T
        a = np.arange(n + 1)[:, None]
        b = np.arange(n + 1)[None, :]
        P = self.P
        d = np.diag(P)
        block = d[None, :] - P[a, b] - P[b, a] + d[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            C = self.diag[None, :] - self.diag[:, None] - block / (b - a)
        C[b <= a] = np.inf
        return C


def segment_cost(K: np.ndarray, a: int, b: int) -> float:
    return ScatterTable(K).cost(a, b)


def optimal_costs(K: np.ndarray, max_segments: int):
    """Return (L, back): L[m, t] is the best cost of splitting [0, t) into m segments."""
    table = ScatterTable(K)
    T = table.T
    if not 1 <= max_segments <= T:
        raise ValidationError(f"max_segments={max_segments} must lie in [1, T={T}]")
    C = table.matrix()
    L = np.full((max_segments + 1, T + 1), np.inf)
    back = np.zeros((max_segments + 1, T + 1), dtype=np.int64)
    L[1] = C[0]
    for m in range(2, max_segments + 1):
        cand = L[m - 1][:, None] + C
        # argmin picks the first minimum: the earliest split point
        back[m] = np.argmin(cand, axis=0)
        L[m] = cand[back[m], np.arange(T + 1)]
    return L, back


def _backtrack(back: np.ndarray, m: int, T: int) -> np.ndarray:
    bounds = [T]
    t = T
    for j in range(m, 1, -1):
        t = int(back[j, t])
        bounds.append(t)
    bounds.append(0)
    return np.array(bounds[::-1], dtype=np.int64)


def selection_penalty(m, T: int) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return m * (np.log(T / m) + 1.0)


def kts(
    v,
    max_segments: Optional[int] = None,
    penalty_coeff: float = 1.0,
    n_segments: Optional[int] = None,
    normalize: bool = True,
) -> SegmentList:
    """Segment ``v`` by kernel scatter minimization.

    With ``n_segments`` the exact optimal segmentation into that many
    segments is returned; otherwise the count in ``1..max_segments``
    minimizing cost + penalty_coeff * m * (log(T/m) + 1) is used.
    """
    K = gram_matrix(v, normalize=normalize)
    T = K.shape[0]
    if penalty_coeff < 0:
        raise ValidationError("penalty_coeff must be non-negative")
    if n_segments is not None:
        if not 1 <= n_segments <= T:
            raise ValidationError(f"n_segments={n_segments} infeasible for T={T}")
        L, back = optimal_costs(K, n_segments)
        return SegmentList(_backtrack(back, n_segments, T))
    if max_segments is None:
        max_segments = T
    if not 1 <= max_segments <= T:
        raise ValidationError(f"max_segments={max_segments} infeasible for T={T}")
    L, back = optimal_costs(K, max_segments)
    ms = np.arange(1, max_segments + 1)
    crit = L[1:, T] + penalty_coeff * selection_penalty(ms, T)
    m_best = int(ms[np.argmin(crit)])
    return SegmentList(_backtrack(back, m_best, T))


def kts_with_config(v, config: KTSConfig) -> SegmentList:
    T = _features(v).shape[0]
    return kts(
        v,
        max_segments=config.max_for(T),
        penalty_coeff=config.penalty_coeff,
        n_segments=config.n_segments,
        normalize=config.normalize,
    )


def segmentation_cost(K: np.ndarray, segments: SegmentList) -> float:
    table = ScatterTable(K)
    return sum(table.cost(a, b) for a, b in segments.segments())
