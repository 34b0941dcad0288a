"""Loss terms for the selector/discriminator game.

Every loss accepts torch tensors (and keeps the graph) or plain
arrays/domain objects (and returns a float).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from .core import FrameFeatureSequence, KeyframeAnnotation, SummaryFeatureSequence, ValidationError

log = logging.getLogger(__name__)

COSINE_EPS = 1e-8
GAN_OBJECTIVES = ("minimax", "non_saturating")


@dataclass(frozen=True)
class LossWeights:
    beta: float = 1.0
    gamma: float = 0.001
    gan_objective: str = "minimax"

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.gan_objective not in GAN_OBJECTIVES:
            raise ValidationError(f"gan_objective must be one of {GAN_OBJECTIVES}")


@dataclass
class LossReport:
    adv: Optional[float]
    reconst: float
    div: float
    psup: Optional[float]
    total: float

    def as_dict(self) -> dict:
        return {"adv": self.adv, "reconst": self.reconst, "div": self.div, "psup": self.psup, "total": self.total}


def _tensor(x) -> tuple:
    if isinstance(x, torch.Tensor):
        return x, True
    return torch.tensor(np.array(x, dtype=np.float64)), False


def _out(t: torch.Tensor, keep: bool):
    return t if keep else float(t)


def _probs(x, name: str) -> torch.Tensor:
    t, _ = _tensor(x)
    t = t.reshape(-1)
    if t.numel() == 0:
        raise ValidationError(f"{name} must be non-empty")
    if torch.any(t <= 0) or torch.any(t >= 1):
        raise ValidationError(f"{name} must lie strictly inside (0, 1)")
    return t


def adversarial_loss(d_real, d_fake):
    """mean log D(s) + mean log(1 - D(S_K(v))) over the two batches."""
    keep = isinstance(d_real, torch.Tensor) or isinstance(d_fake, torch.Tensor)
    r, f = _probs(d_real, "d_real"), _probs(d_fake, "d_fake")
    return _out(torch.log(r).mean() + torch.log1p(-f).mean(), keep)


def adversarial_loss_from_logits(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    """Same value as :func:`adversarial_loss` on sigmoid(logits), without saturation."""
    return F.logsigmoid(real_logits).mean() + F.logsigmoid(-fake_logits).mean()


def selector_adversarial_term(d_fake, objective: str = "minimax"):
    keep = isinstance(d_fake, torch.Tensor)
    f = _probs(d_fake, "d_fake")
    if objective == "minimax":
        return _out(torch.log1p(-f).mean(), keep)
    if objective == "non_saturating":
        return _out(-torch.log(f).mean(), keep)
    raise ValidationError(f"unknown gan objective {objective!r}")


def selector_adversarial_term_from_logits(fake_logits: torch.Tensor, objective: str = "minimax") -> torch.Tensor:
    if objective == "minimax":
        return F.logsigmoid(-fake_logits).mean()
    if objective == "non_saturating":
        return -F.logsigmoid(fake_logits).mean()
    raise ValidationError(f"unknown gan objective {objective!r}")


def reconstruction_loss(summary, v, indices=None):
    """(1/k) sum_t ||summary_t - v[f_t]||^2.

    ``summary`` and ``v`` are either a SummaryFeatureSequence and a
    FrameFeatureSequence, or a (k, D) tensor and the full (T, D) input with
    explicit ``indices``.
    """
    if isinstance(summary, SummaryFeatureSequence):
        indices = summary.selected_indices
        summary = summary.features
    if isinstance(v, FrameFeatureSequence):
        v = v.features
    s, keep = _tensor(summary)
    x, keep_x = _tensor(v)
    idx = np.array(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ValidationError(f"summary index out of range for T={x.shape[0]}")
    target = x[torch.tensor(idx)].to(s.dtype)
    return _out(((s - target) ** 2).sum(dim=1).mean(), keep or keep_x)


def diversity_loss(summary):
    """Mean cosine similarity over ordered pairs of distinct summary rows.

    Row norms are clamped below at ``COSINE_EPS`` so zero rows contribute
    no similarity; a single-row summary has no pairs and scores 0.
    """
    if isinstance(summary, SummaryFeatureSequence):
        summary = summary.features
    s, keep = _tensor(summary)
    k = s.shape[0]
    if k < 2:
        log.warning("diversity loss undefined for k=%d; using 0", k)
        return _out(s.sum() * 0.0, keep)
    unit = s / s.norm(dim=1, keepdim=True).clamp_min(COSINE_EPS)
    sim = unit @ unit.t()
    off_diag = sim.sum() - torch.diagonal(sim).sum()
    return _out(off_diag / (k * (k - 1)), keep)


def supervised_loss(scores, ann):
    """Two-class cross-entropy of the frame scores against a keyframe mask."""
    mask = ann.mask if isinstance(ann, KeyframeAnnotation) else ann
    s, keep = _tensor(scores)
    labels = torch.as_tensor(np.asarray(mask, dtype=np.int64))
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValidationError(f"scores must be T x 2, got {tuple(s.shape)}")
    if labels.shape[0] != s.shape[0]:
        raise ValidationError(f"annotation length {labels.shape[0]} != T={s.shape[0]}")
    return _out(F.cross_entropy(s, labels), keep)


def total_selector_loss(adv_term, reconst, div, psup, weights: LossWeights, is_paired: bool):
    total = adv_term + reconst + weights.beta * div
    if is_paired and psup is not None:
        total = total + weights.gamma * psup
    return total
