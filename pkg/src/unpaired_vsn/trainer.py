"""Alternating adversarial training of the selector and the discriminator."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import objectives as obj
from .core import FrameFeatureSequence, KeyframeAnnotation, SummaryFeatureSequence, UnpairedDataset, ValidationError
from .network import (
    KeyframeSelector,
    NetworkConfig,
    SummaryDiscriminator,
    init_params,
    load_module_arrays,
    module_arrays,
    num_keyframes,
    read_checkpoint,
    weighted_summary,
    write_checkpoint,
)

log = logging.getLogger(__name__)

PRESETS = ("sumfcn_unsup", "unpaired_adv", "unpaired", "unpaired_psup")


class NumericError(RuntimeError):
    """Training produced a non-finite loss or parameter."""


@dataclass(frozen=True)
class AdamConfig:
    kind: str = "adam"
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class SGDConfig:
    kind: str = "sgd"
    lr: float = 2e-4
    momentum: float = 0.0


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "unpaired"
    epochs: int = 50
    seed: int = 0
    selector_optimizer: AdamConfig = field(default_factory=AdamConfig)
    discriminator_optimizer: SGDConfig = field(default_factory=SGDConfig)
    weights: obj.LossWeights = field(default_factory=obj.LossWeights)
    psup_fraction: float = 0.0
    discriminator_first: bool = True
    clip_norm: Optional[float] = 5.0

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValidationError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.selector_optimizer.lr < 0 or self.discriminator_optimizer.lr < 0:
            raise ValidationError("learning rates must be non-negative")
        if not 0 <= self.psup_fraction <= 1:
            raise ValidationError("psup_fraction must lie in [0, 1]")
        if self.psup_fraction > 0 and self.preset != "unpaired_psup":
            raise ValidationError("psup_fraction is only meaningful with preset unpaired_psup")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValidationError("clip_norm must be positive (or None to disable)")

    @property
    def uses_discriminator(self) -> bool:
        return self.preset != "sumfcn_unsup"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["selector_optimizer"] = AdamConfig(**d.get("selector_optimizer", {}))
        d["discriminator_optimizer"] = SGDConfig(**d.get("discriminator_optimizer", {}))
        d["weights"] = obj.LossWeights(**d.get("weights", {}))
        return cls(**d)


class TrainState:
    def __init__(self, network: NetworkConfig, config: TrainConfig, selector=None, discriminator=None):
        self.network = network
        self.config = config
        if selector is None:
            selector, discriminator = init_params(network, config.seed)
        self.selector: KeyframeSelector = selector
        self.discriminator: SummaryDiscriminator = discriminator
        a, s = config.selector_optimizer, config.discriminator_optimizer
        self.opt_k = torch.optim.Adam(
            self.selector.parameters(), lr=a.lr, betas=(a.beta1, a.beta2), eps=a.eps, foreach=False
        )
        self.opt_d = torch.optim.SGD(self.discriminator.parameters(), lr=s.lr, momentum=s.momentum, foreach=False)
        self.step = 0
        self.epoch = 0

    # -- serialization --------------------------------------------------------

    def _optimizer_arrays(self) -> dict:
        out = {}
        for tag, opt, net in (("selector", self.opt_k, self.selector), ("discriminator", self.opt_d, self.discriminator)):
            names = dict((id(p), n) for n, p in net.named_parameters())
            for p, st in opt.state.items():
                for key, val in st.items():
                    if key != "step" and torch.is_tensor(val):
                        out[f"optim.{tag}.{names[id(p)]}.{key}"] = val.detach().numpy()
        return out

    def _adam_step(self) -> int:
        steps = {int(st["step"]) for st in self.opt_k.state.values() if "step" in st}
        return steps.pop() if steps else 0

    def save(self, path) -> None:
        meta = {
            "network": self.network.to_dict(),
            "train": self.config.to_dict(),
            "state": {"step": self.step, "epoch": self.epoch, "adam_step": self._adam_step()},
        }
        arrays = module_arrays("selector", self.selector)
        arrays.update(module_arrays("discriminator", self.discriminator))
        arrays.update(self._optimizer_arrays())
        write_checkpoint(path, meta, arrays)

    @classmethod
    def load(cls, path, config: Optional[TrainConfig] = None) -> "TrainState":
        meta, arrays = read_checkpoint(path)
        network = NetworkConfig.from_dict(meta["network"])
        cfg = config or TrainConfig.from_dict(meta["train"])
        state = cls(network, cfg, KeyframeSelector(network), SummaryDiscriminator(network))
        load_module_arrays("selector", state.selector, arrays)
        load_module_arrays("discriminator", state.discriminator, arrays)
        state.step = meta["state"]["step"]
        state.epoch = meta["state"]["epoch"]
        adam_step = meta["state"].get("adam_step", 0)
        for tag, opt, net in (("selector", state.opt_k, state.selector), ("discriminator", state.opt_d, state.discriminator)):
            for name, p in net.named_parameters():
                prefix = f"optim.{tag}.{name}."
                st = {k[len(prefix):]: torch.as_tensor(v) for k, v in arrays.items() if k.startswith(prefix)}
                if not st:
                    continue
                if tag == "selector":
                    st["step"] = torch.tensor(float(adam_step))
                opt.state[p] = st
        return state

    def snapshot(self) -> dict:
        """Copies of all parameters, for isolation checks."""
        return {
            **{f"selector.{k}": v.detach().clone() for k, v in self.selector.state_dict().items()},
            **{f"discriminator.{k}": v.detach().clone() for k, v in self.discriminator.state_dict().items()},
        }


def _to_tensor(features, dtype) -> torch.Tensor:
    return torch.tensor(np.array(features), dtype=dtype)


def _clip(params, state: TrainState, which: str) -> None:
    limit = state.config.clip_norm
    if limit is None:
        return
    norm = torch.nn.utils.clip_grad_norm_(params, limit)
    if norm > limit:
        log.debug("step %d: clipped %s gradient norm %.4g to %.4g", state.step, which, float(norm), limit)


def _check_finite(value: torch.Tensor, state: TrainState, what: str) -> None:
    if not torch.isfinite(value):
        raise NumericError(f"non-finite {what} at step {state.step} (epoch {state.epoch})")


def train_step_discriminator(state: TrainState, v: FrameFeatureSequence, s: SummaryFeatureSequence) -> dict:
    """One SGD step on the discriminator; the selector is only evaluated."""
    dtype = next(state.selector.parameters()).dtype
    x = _to_tensor(v.features, dtype)
    with torch.no_grad():
        k = num_keyframes(v.T, state.network.k_ratio)
        _, _, merged, conf = state.selector(x, k)
    real_logit = state.discriminator(_to_tensor(s.features, dtype))
    fake_logit = state.discriminator(weighted_summary(merged, conf))
    adv = obj.adversarial_loss_from_logits(real_logit, fake_logit)
    _check_finite(adv, state, "discriminator loss")
    params = list(state.discriminator.parameters())
    grads = torch.autograd.grad(-adv, params)
    for p, g in zip(params, grads):
        p.grad = g
    _clip(params, state, "discriminator")
    state.opt_d.step()
    state.opt_d.zero_grad(set_to_none=True)
    return {
        "adv": float(adv.detach()),
        "d_real_score": float(torch.sigmoid(real_logit).detach()),
        "d_fake_score": float(torch.sigmoid(fake_logit).detach()),
    }


def train_step_selector(
    state: TrainState, v: FrameFeatureSequence, is_paired: bool = False, ann: Optional[KeyframeAnnotation] = None
) -> obj.LossReport:
    """One Adam step on the selector under the active preset's objective."""
    if is_paired != (ann is not None):
        raise ValidationError("an annotation must be given exactly when the video is paired")
    cfg = state.config
    preset = cfg.preset
    dtype = next(state.selector.parameters()).dtype
    x = _to_tensor(v.features, dtype)
    k = num_keyframes(v.T, state.network.k_ratio)
    scores, idx, merged, conf = state.selector(x, k)

    reconst = obj.reconstruction_loss(merged, x, idx)
    div = obj.diversity_loss(merged)
    adv = None
    if cfg.uses_discriminator:
        adv = obj.selector_adversarial_term_from_logits(
            state.discriminator(weighted_summary(merged, conf)), cfg.weights.gan_objective
        )
    psup = None
    use_psup = preset == "unpaired_psup" and is_paired
    if use_psup:
        psup = obj.supervised_loss(scores, ann.mask)

    weights = cfg.weights if preset != "unpaired_adv" else replace(cfg.weights, beta=0.0)
    adv_term = adv if adv is not None else torch.zeros((), dtype=dtype)
    total = obj.total_selector_loss(adv_term, reconst, div, psup, weights, use_psup)
    _check_finite(total, state, "selector loss")

    params = list(state.selector.parameters())
    grads = torch.autograd.grad(total, params, allow_unused=True)
    for p, g in zip(params, grads):
        p.grad = torch.zeros_like(p) if g is None else g
    _clip(params, state, "selector")
    state.opt_k.step()
    state.opt_k.zero_grad(set_to_none=True)
    return obj.LossReport(
        adv=None if adv is None else float(adv.detach()),
        reconst=float(reconst.detach()),
        div=float(div.detach()),
        psup=None if psup is None else float(psup.detach()),
        total=float(total.detach()),
    )


def _check_dataset(dataset: UnpairedDataset, config: TrainConfig) -> None:
    if not dataset.raw_videos:
        raise ValidationError("dataset has no raw videos")
    if config.uses_discriminator and not dataset.real_summaries:
        raise ValidationError(f"preset {config.preset} needs real summaries, dataset has none")
    if config.preset == "unpaired_psup" and config.psup_fraction > 0:
        need = math.ceil(config.psup_fraction * len(dataset.raw_videos))
        have = len(dataset.paired_subset)
        if have < need:
            raise ValidationError(
                f"psup_fraction {config.psup_fraction} needs {need} paired videos, dataset has {have}"
            )


def epoch_schedule(seed: int, epoch: int, n_raw: int, n_summaries: int):
    """Seeded visiting order of raw videos and the real summary drawn for each."""
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(n_raw)
    picks = rng.integers(0, max(n_summaries, 1), size=n_raw)
    return order, picks


def train(
    dataset: UnpairedDataset,
    config: TrainConfig,
    network: Optional[NetworkConfig] = None,
    out_dir=None,
    resume_from=None,
    metrics_path=None,
) -> tuple:
    """Train for ``config.epochs`` epochs; return (state, list of metrics records).

    With ``resume_from`` the state (parameters, optimizer moments, counters)
    is restored and training continues at the saved epoch.
    """
    _check_dataset(dataset, config)
    D = dataset.raw_videos[0].D
    if resume_from is not None:
        state = TrainState.load(resume_from, config)
    else:
        network = network or NetworkConfig(D=D)
        state = TrainState(network, config)
    if state.network.D != D:
        raise ValidationError(f"network expects D={state.network.D}, dataset has D={D}")

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    sink = open(metrics_path, "a", encoding="utf-8") if metrics_path is not None else None
    paired = {seq.video_id: ann for seq, ann in dataset.paired_subset}
    metrics = []
    try:
        while state.epoch < config.epochs:
            order, picks = epoch_schedule(config.seed, state.epoch, len(dataset.raw_videos), len(dataset.real_summaries))
            for i, j in zip(order, picks):
                v = dataset.raw_videos[i]
                rec = {"step": state.step, "epoch": state.epoch, "video_id": v.video_id}
                d_out = None

                def d_step():
                    return train_step_discriminator(state, v, dataset.real_summaries[j])

                if config.uses_discriminator and config.discriminator_first:
                    d_out = d_step()
                ann = paired.get(v.video_id)
                report = train_step_selector(state, v, ann is not None, ann)
                if config.uses_discriminator and not config.discriminator_first:
                    d_out = d_step()
                rec.update(report.as_dict())
                if d_out is not None:
                    rec["d_real_score"] = d_out["d_real_score"]
                    rec["d_fake_score"] = d_out["d_fake_score"]
                metrics.append(rec)
                if sink is not None:
                    sink.write(json.dumps(rec) + "\n")
                state.step += 1
            state.epoch += 1
            if out_dir is not None:
                state.save(out_dir / f"epoch_{state.epoch:04d}.uvsc")
            if metrics:
                last = [m["total"] for m in metrics if m["epoch"] == state.epoch - 1]
                log.info("epoch %d: mean selector loss %.5f", state.epoch, float(np.mean(last)))
    finally:
        if sink is not None:
            sink.close()
    if out_dir is not None:
        state.save(out_dir / "final.uvsc")
    return state, metrics
