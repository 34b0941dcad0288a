"""Key frame selector and summary discriminator.

Both networks share the temporal encoder block (conv -> ReLU -> max-pool
stride 2). The selector adds a two-stage transposed-conv decoder with one
skip-add from a middle encoder block, a 2-class score head and a
reconstruction head mapping decoded features back to the input dimension.
The discriminator pools the encoder output over time and scores it with a
single affine unit followed by a sigmoid.

Score column 1 is the key-frame class, column 0 non-key.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import FormatError, FrameFeatureSequence, SummaryFeatureSequence, ValidationError, VersionMismatchError

KEY = 1
CHECKPOINT_MAGIC = b"UVSC"
CHECKPOINT_VERSION = 1
CONFIDENCE_MODES = ("none", "prob", "relative")


@dataclass(frozen=True)
class NetworkConfig:
    D: int = 16
    encoder_channels: tuple = (32, 32, 64, 64)
    encoder_depth: int = 4
    kernel_size: int = 3
    k_ratio: float = 0.15
    # None -> same as the selector encoder
    discriminator_channels: Optional[tuple] = None
    discriminator_depth: Optional[int] = None
    # encoder block whose output is added back in the decoder; None -> depth // 2
    skip_block: Optional[int] = None
    # weights the discriminator sees on generated summary frames: "none",
    # "prob" (key probability) or "relative" (key probability over its mean
    # across the selected frames)
    confidence: str = "relative"

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        if self.discriminator_channels is not None:
            object.__setattr__(self, "discriminator_channels", tuple(int(c) for c in self.discriminator_channels))
        if self.D < 1:
            raise ValidationError("D must be >= 1")
        if self.encoder_depth < 1:
            raise ValidationError("encoder_depth must be >= 1")
        if len(self.encoder_channels) != self.encoder_depth:
            raise ValidationError(
                f"encoder_channels has {len(self.encoder_channels)} entries, encoder_depth is {self.encoder_depth}"
            )
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValidationError("kernel_size must be a positive odd integer")
        if self.confidence not in CONFIDENCE_MODES:
            raise ValidationError(f"confidence must be one of {CONFIDENCE_MODES}")
        if not 0 < self.k_ratio <= 1:
            raise ValidationError("k_ratio must lie in (0, 1]")
        if len(self.disc_channels) != self.disc_depth or self.disc_depth < 1:
            raise ValidationError("discriminator channels/depth are inconsistent")
        if not 1 <= self.skip_level <= self.encoder_depth:
            raise ValidationError(f"skip_block must lie in [1, {self.encoder_depth}]")
        if any(c < 1 for c in self.encoder_channels + self.disc_channels):
            raise ValidationError("channel widths must be positive")

    @property
    def disc_channels(self) -> tuple:
        return self.discriminator_channels if self.discriminator_channels is not None else self.encoder_channels

    @property
    def disc_depth(self) -> int:
        return self.discriminator_depth if self.discriminator_depth is not None else len(self.disc_channels)

    @property
    def skip_level(self) -> int:
        return self.skip_block if self.skip_block is not None else max(1, self.encoder_depth // 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("encoder_channels", "discriminator_channels"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(**d)


def num_keyframes(T: int, k_ratio: float) -> int:
    """Selection budget k = max(1, round(k_ratio * T)), rounding half up."""
    return min(T, max(1, int(math.floor(k_ratio * T + 0.5))))


def _pad_to_multiple(x: torch.Tensor, factor: int) -> torch.Tensor:
    # x: (C, T); right-pad by repeating the last frame
    T = x.shape[-1]
    target = max(factor, -(-T // factor) * factor)
    if target == T:
        return x
    return torch.cat([x, x[:, -1:].expand(-1, target - T)], dim=1)


class TemporalEncoder(nn.Module):
    def __init__(self, in_dim: int, channels, kernel_size: int):
        super().__init__()
        widths = [in_dim, *channels]
        self.convs = nn.ModuleList(
            nn.Conv1d(a, b, kernel_size, padding=kernel_size // 2) for a, b in zip(widths[:-1], widths[1:])
        )

    def forward(self, x: torch.Tensor, trace: Optional[list] = None) -> list:
        """Return the pooled output of every block; ``x`` is (C, T)."""
        outs = []
        h = x.unsqueeze(0)
        for conv in self.convs:
            a = conv(h)
            if trace is not None:
                trace.append((a > 0).numpy().tobytes())
            h, where = F.max_pool1d(F.relu(a), 2, return_indices=True)
            if trace is not None:
                trace.append(where.numpy().tobytes())
            outs.append(h)
        return outs


class KeyframeSelector(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        ch = config.encoder_channels
        depth, mid = config.encoder_depth, config.skip_level
        self.encoder = TemporalEncoder(config.D, ch, config.kernel_size)
        s1 = 2 ** (depth - mid)
        s2 = 2**mid
        self.up_coarse = nn.ConvTranspose1d(ch[-1], ch[mid - 1], s1, stride=s1)
        self.up_fine = nn.ConvTranspose1d(ch[mid - 1], ch[0], s2, stride=s2)
        self.score_head = nn.Conv1d(ch[0], 2, 1)
        self.recon_head = nn.Conv1d(ch[0], config.D, 1)

    @property
    def pool_factor(self) -> int:
        return 2**self.config.encoder_depth

    def decode(self, x: torch.Tensor, trace: Optional[list] = None):
        """Frame scores (T, 2) and decoded features (T, C) for input ``x`` of shape (T, D)."""
        T = x.shape[0]
        h_in = _pad_to_multiple(x.t(), self.pool_factor)
        feats = self.encoder(h_in, trace)
        h = self.up_coarse(feats[-1]) + feats[self.config.skip_level - 1]
        if trace is not None:
            trace.append((h > 0).numpy().tobytes())
        h = F.relu(self.up_fine(F.relu(h)))
        if trace is not None:
            trace.append((h > 0).numpy().tobytes())
        scores = self.score_head(h)[0, :, :T].t()
        return scores, h[0, :, :T].t()

    def forward(self, x: torch.Tensor, k: int, trace: Optional[list] = None):
        """Return (scores, selected indices, merged summary features, confidence).

        Selection is a hard top-k on the key probability and carries no
        gradient. The merged features are the reconstruction-head output at
        the selected frames plus the retrieved input rows. ``confidence``
        holds per-frame weights derived from the key probability; they scale
        the summary on its way into the discriminator, which is how the
        adversarial loss reaches the score head.
        """
        T = x.shape[0]
        if not 1 <= k <= T:
            raise ValidationError(f"k={k} must lie in [1, T={T}]")
        if x.shape[1] != self.config.D:
            raise ValidationError(f"input has D={x.shape[1]}, network expects D={self.config.D}")
        scores, decoded = self.decode(x, trace)
        idx = select_keyframes(scores.detach().cpu().numpy(), k)
        if trace is not None:
            trace.append(idx.tobytes())
        sel = torch.as_tensor(idx)
        recon = self.recon_head(decoded[sel].t().unsqueeze(0))[0].t()
        merged = recon + x[sel]
        if self.config.confidence == "none":
            conf = torch.ones(k, dtype=x.dtype)
        else:
            conf = torch.softmax(scores[sel], dim=1)[:, KEY]
            if self.config.confidence == "relative":
                conf = conf / conf.mean()
        return scores, idx, merged, conf


def weighted_summary(merged: torch.Tensor, confidence: torch.Tensor) -> torch.Tensor:
    """Discriminator input for a generated summary."""
    return confidence[:, None] * merged


class SummaryDiscriminator(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        self.encoder = TemporalEncoder(config.D, config.disc_channels, config.kernel_size)
        self.fc = nn.Linear(config.disc_channels[-1], 1)

    def forward(self, s: torch.Tensor, trace: Optional[list] = None) -> torch.Tensor:
        """Logit of the probability that summary features ``s`` (k, D) are real."""
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValidationError(f"discriminator needs a k x D summary with k >= 1, got {tuple(s.shape)}")
        if s.shape[1] != self.config.D:
            raise ValidationError(f"summary has D={s.shape[1]}, network expects D={self.config.D}")
        h = _pad_to_multiple(s.t(), 2**self.config.disc_depth)
        pooled = self.encoder(h, trace)[-1].mean(dim=2)
        return self.fc(pooled)[0, 0]


# -- functional surface ---------------------------------------------------------


def key_margin(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    return s[:, KEY] - s[:, 1 - KEY]


def select_keyframes(scores, k: int) -> np.ndarray:
    """Indices of the k frames with the highest key probability, ascending.

    Ties go to the smaller index. Ranking uses the logit margin, which is
    strictly monotone in the softmax key probability.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValidationError(f"scores must be T x 2, got {s.shape}")
    T = s.shape[0]
    if not 1 <= k <= T:
        raise ValidationError(f"k={k} must lie in [1, T={T}]")
    margin = key_margin(s)
    order = np.lexsort((np.arange(T), -margin))
    return np.sort(order[:k]).astype(np.int64)


def _dtype(module: nn.Module):
    return next(module.parameters()).dtype


def selector_forward(selector: KeyframeSelector, v: FrameFeatureSequence, k: Optional[int] = None):
    """Run the selector on a video: returns (T x 2 scores, SummaryFeatureSequence)."""
    if k is None:
        k = num_keyframes(v.T, selector.config.k_ratio)
    x = torch.tensor(np.array(v.features), dtype=_dtype(selector))
    with torch.no_grad():
        scores, idx, merged, _ = selector(x, k)
    return scores.numpy().copy(), SummaryFeatureSequence(idx, merged.numpy().copy(), video_id=v.video_id)


_P_MIN = float(np.nextafter(0.0, 1.0))
_P_MAX = float(np.nextafter(1.0, 0.0))


def discriminator_forward(discriminator: SummaryDiscriminator, s) -> float:
    feats = s.features if isinstance(s, SummaryFeatureSequence) else s
    x = torch.tensor(np.array(feats), dtype=_dtype(discriminator))
    with torch.no_grad():
        z = float(discriminator(x))
    # float64 sigmoid, kept strictly inside (0, 1) even when it would round to an endpoint
    p = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    return float(np.clip(p, _P_MIN, _P_MAX))


# -- initialization ---------------------------------------------------------------


def fan_in(module: nn.Module) -> int:
    """Inputs feeding one output unit of ``module``."""
    w = module.weight
    if isinstance(module, nn.ConvTranspose1d):
        # kernel == stride: each output position sees one kernel tap per input channel
        return w.shape[0] * max(1, w.shape[2] // module.stride[0])
    if isinstance(module, nn.Conv1d):
        return w.shape[1] * w.shape[2]
    return w.shape[1]


def init_bound(n_in: int) -> float:
    """Half-width of the He-uniform draw: std = sqrt(2 / fan_in)."""
    return math.sqrt(6.0 / n_in)


def _init_module(net: nn.Module, gen: torch.Generator) -> None:
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, (nn.Conv1d, nn.ConvTranspose1d, nn.Linear)):
                b = init_bound(fan_in(m))
                m.weight.copy_(torch.rand(m.weight.shape, generator=gen, dtype=torch.float64) * 2 * b - b)
                m.bias.zero_()


def init_params(config: NetworkConfig, seed: int, dtype=torch.float32):
    gen = torch.Generator().manual_seed(int(seed))
    selector = KeyframeSelector(config)
    discriminator = SummaryDiscriminator(config)
    _init_module(selector, gen)
    _init_module(discriminator, gen)
    return selector.to(dtype), discriminator.to(dtype)


# -- checkpoint format --------------------------------------------------------------

_U32 = struct.Struct("<I")


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return _U32.pack(len(b)) + b


def write_checkpoint(path, config: dict, arrays: dict) -> None:
    """Write a ``UVSC`` checkpoint: JSON config text plus named float32 arrays."""
    out = [CHECKPOINT_MAGIC, _U32.pack(CHECKPOINT_VERSION), _pack_str(json.dumps(config, sort_keys=True))]
    out.append(_U32.pack(len(arrays)))
    for name, arr in arrays.items():
        a = np.asarray(arr)
        if a.dtype != np.float32:
            a32 = a.astype(np.float32)
            if not np.array_equal(a32.astype(a.dtype), a):
                raise ValidationError(f"array {name} is not exactly representable as float32")
            a = a32
        if not np.all(np.isfinite(a)):
            raise ValidationError(f"array {name} has non-finite values")
        out.append(_pack_str(name))
        out.append(_U32.pack(a.ndim))
        out.extend(_U32.pack(d) for d in a.shape)
        out.append(a.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(b"".join(out))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: checkpoint truncated at byte {self.pos}")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def read_checkpoint(path):
    """Return (config dict, {name: float32 array})."""
    r = _Reader(Path(path).read_bytes(), path)
    magic = r.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    version = r.u32()
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    config = json.loads(r.string())
    arrays = {}
    for _ in range(r.u32()):
        name = r.string()
        dims = tuple(r.u32() for _ in range(r.u32()))
        n = int(np.prod(dims, dtype=np.int64))
        arrays[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(r.data):
        raise FormatError(f"{path}: {len(r.data) - r.pos} trailing bytes")
    return config, arrays


def module_arrays(prefix: str, module: nn.Module) -> dict:
    return {f"{prefix}.{k}": v.detach().cpu().numpy() for k, v in module.state_dict().items()}


def load_module_arrays(prefix: str, module: nn.Module, arrays: dict) -> None:
    state = {}
    for k, v in module.state_dict().items():
        name = f"{prefix}.{k}"
        if name not in arrays:
            raise FormatError(f"checkpoint lacks array {name}")
        if arrays[name].shape != tuple(v.shape):
            raise FormatError(f"array {name} has shape {arrays[name].shape}, expected {tuple(v.shape)}")
        state[k] = torch.as_tensor(arrays[name], dtype=v.dtype)
    module.load_state_dict(state)


def load_networks(path, dtype=torch.float32):
    """Rebuild (selector, discriminator, config dict) from a checkpoint."""
    config, arrays = read_checkpoint(path)
    net_cfg = NetworkConfig.from_dict(config["network"])
    selector, discriminator = KeyframeSelector(net_cfg), SummaryDiscriminator(net_cfg)
    load_module_arrays("selector", selector, arrays)
    load_module_arrays("discriminator", discriminator, arrays)
    return selector.to(dtype), discriminator.to(dtype), config
