"""Command-line entry point: ``uvsn <command> [options] [--section.key=value ...]``.

Settings come from an optional flat config file (``section.key = value``
lines) overlaid with ``--section.key=value`` arguments. Sections are
network, train, eval, split and synth; see ``uvsn <command> --help`` and
``SCHEMA`` below for the keys.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from multiprocessing import get_context
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from . import __version__
from .core import (
    ANNOTATION_MAGIC,
    FEATURE_MAGIC,
    FormatError,
    ValidationError,
    load_unpaired_dataset,
    read_annotation,
    read_features,
    read_manifest,
    write_annotation,
)
from .datagen import SplitSpec, SynthSpec, generate_synthetic_corpus, make_unpaired_split, mark_partial_supervision
from .datagen import split_summary, write_split
from .evalkit import EvalConfig, evaluate_dataset, evaluate_random_baseline, load_test_set, summarize_video
from .network import CHECKPOINT_MAGIC, NetworkConfig, load_networks, read_checkpoint
from .objectives import LossWeights
from .tempseg import KTSConfig, kts_with_config
from .trainer import AdamConfig, NumericError, SGDConfig, TrainConfig, train

log = logging.getLogger("unpaired_vsn")

OUTPUT_ROOT_ENV = "UVSN_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Bad command line or configuration; maps to exit code 2."""


# -- value parsers ---------------------------------------------------------------


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple:
    return tuple(int(p) for p in s.replace(" ", "").split(",") if p)


def _optional(parse: Callable) -> Callable:
    def inner(s: str):
        return None if s.strip().lower() in ("", "none", "null", "auto") else parse(s)

    return inner


def parse_seeds(s: str) -> list:
    """``"1..5"`` -> [1, 2, 3, 4, 5]; ``"3,7"`` -> [3, 7]."""
    out = []
    for part in s.replace(" ", "").split(","):
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("no seeds given")
    return out


_opt_int, _opt_float, _opt_ints = _optional(int), _optional(float), _optional(_ints)

# section -> key -> (parser, default)
SCHEMA = {
    "network": {
        "D": (int, 16),
        "encoder_channels": (_ints, (32, 32, 64, 64)),
        "encoder_depth": (int, 4),
        "kernel_size": (int, 3),
        "k_ratio": (float, 0.15),
        "discriminator_channels": (_opt_ints, None),
        "discriminator_depth": (_opt_int, None),
        "skip_block": (_opt_int, None),
        "confidence": (str, "relative"),
    },
    "train": {
        "preset": (str, "unpaired"),
        "epochs": (int, 50),
        "seed": (int, 0),
        "selector_lr": (float, 1e-5),
        "selector_beta1": (float, 0.9),
        "selector_beta2": (float, 0.999),
        "selector_eps": (float, 1e-8),
        "discriminator_lr": (float, 2e-4),
        "discriminator_momentum": (float, 0.0),
        # None -> chosen from the target dataset name
        "beta": (_opt_float, None),
        "gamma": (float, 0.001),
        "gan_objective": (str, "minimax"),
        "psup_fraction": (float, 0.0),
        "discriminator_first": (_bool, True),
        "clip_norm": (_opt_float, 5.0),
    },
    "eval": {
        "budget_ratio": (float, 0.15),
        "user_aggregation": (str, "mean"),
        "kts_max_segments": (int, 0),
        "kts_frames_per_segment": (int, 4),
        "kts_penalty_coeff": (float, 1.0),
        "kts_normalize": (_bool, True),
        "kts_n_segments": (_opt_int, None),
    },
    "split": {
        "target": (_optional(str), None),
        "mode": (str, "standard"),
        "test_fraction": (float, 0.2),
        "unpaired_fraction": (float, 0.5),
        "psup_fraction": (float, 0.0),
        "seed": (int, 0),
    },
    "synth": {
        f.name: ({tuple: _ints, int: int, float: float, str: str}[type(f.default)], f.default)
        for f in fields(SynthSpec)
    },
}

# target-name substring -> diversity weight
BETA_BY_TARGET = (("summe", 1.0), ("tvsum", 0.001))
DEFAULT_BETA = 1.0


def beta_for_target(target: Optional[str]) -> float:
    name = (target or "").lower()
    for key, beta in BETA_BY_TARGET:
        if key in name:
            return beta
    return DEFAULT_BETA


class RunConfig:
    """Resolved settings of one invocation, one dict per section."""

    def __init__(self):
        self.values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}

    def set(self, dotted: str, raw: str, origin: str = "command line") -> None:
        if "." not in dotted:
            raise ConfigError(f"{origin}: expected section.key, got {dotted!r}")
        sec, key = dotted.split(".", 1)
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"{origin}: unknown setting {dotted!r}")
        parse = SCHEMA[sec][key][0]
        try:
            self.values[sec][key] = parse(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{origin}: bad value for {dotted}: {exc}") from None

    def load_file(self, path) -> None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from None
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{p}:{n}: expected 'section.key = value'")
            key, val = line.split("=", 1)
            self.set(key.strip(), val, f"{p}:{n}")

    def __getitem__(self, dotted: str):
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    # -- typed views (each validates its section) --------------------------------

    def network(self, D: Optional[int] = None) -> NetworkConfig:
        v = dict(self.values["network"])
        if D is not None:
            v["D"] = D
        return _build(NetworkConfig, v)

    def beta(self) -> float:
        b = self.values["train"]["beta"]
        return beta_for_target(self.values["split"]["target"]) if b is None else b

    def train(self, seed: Optional[int] = None) -> TrainConfig:
        t = self.values["train"]

        def make():
            return TrainConfig(
                preset=t["preset"],
                epochs=t["epochs"],
                seed=t["seed"] if seed is None else seed,
                selector_optimizer=AdamConfig(
                    lr=t["selector_lr"], beta1=t["selector_beta1"], beta2=t["selector_beta2"], eps=t["selector_eps"]
                ),
                discriminator_optimizer=SGDConfig(lr=t["discriminator_lr"], momentum=t["discriminator_momentum"]),
                weights=LossWeights(beta=self.beta(), gamma=t["gamma"], gan_objective=t["gan_objective"]),
                psup_fraction=t["psup_fraction"],
                discriminator_first=t["discriminator_first"],
                clip_norm=t["clip_norm"],
            )

        return _build(make)

    def eval(self) -> EvalConfig:
        e = self.values["eval"]

        def make():
            kts = KTSConfig(
                max_segments=e["kts_max_segments"],
                frames_per_segment=e["kts_frames_per_segment"],
                penalty_coeff=e["kts_penalty_coeff"],
                normalize=e["kts_normalize"],
                n_segments=e["kts_n_segments"],
            )
            if kts.max_segments < 0 or kts.frames_per_segment < 1 or kts.penalty_coeff < 0:
                raise ValidationError("invalid KTS settings")
            return EvalConfig(e["budget_ratio"], e["user_aggregation"], kts)

        return _build(make)

    def split(self) -> SplitSpec:
        s = dict(self.values["split"])
        target = s.pop("target")
        if not target:
            raise ConfigError("a target dataset is required (--target or split.target)")
        return _build(SplitSpec, {"target_dataset": target, **s})

    def synth(self) -> SynthSpec:
        return _build(SynthSpec, self.values["synth"])

    def to_dict(self, sections=None) -> dict:
        out = {}
        for sec in sections or SCHEMA:
            out[sec] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.values[sec].items()}
        return out


def _build(factory, kwargs=None):
    try:
        return factory(**kwargs) if kwargs is not None else factory()
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# -- argument handling ---------------------------------------------------------


def _split_overrides(argv: list) -> tuple:
    """Separate ``--section.key=value`` tokens from ordinary arguments."""
    rest, overrides = [], []
    for tok in argv:
        if tok.startswith("--") and "=" in tok and "." in tok[2:].split("=", 1)[0]:
            key, val = tok[2:].split("=", 1)
            overrides.append((key, val))
        else:
            rest.append(tok)
    return rest, overrides


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _out_dir(args, name: str) -> Path:
    return Path(args.out) if args.out else default_output_root() / name


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _need_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


# -- commands ----------------------------------------------------------------------


def cmd_gen_synth(args, cfg: RunConfig) -> int:
    spec = cfg.synth()
    out = _out_dir(args, "synth")
    catalog = generate_synthetic_corpus(spec, out)
    print(f"wrote {spec.n_videos} videos; catalog {catalog}")
    return 0


def _parse_datasets(items: list) -> dict:
    catalogs = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--dataset expects name=catalog.tsv, got {item!r}")
        name, path = item.split("=", 1)
        if name in catalogs:
            raise ConfigError(f"dataset {name!r} given twice")
        catalogs[name] = path
    if not catalogs:
        raise ConfigError("at least one --dataset name=catalog.tsv is required")
    return catalogs


def cmd_make_splits(args, cfg: RunConfig) -> int:
    spec = cfg.split()
    paths = _parse_datasets(args.dataset)
    catalogs = {name: read_manifest(_need_file(p)) for name, p in paths.items()}
    train_recs, test_recs = make_unpaired_split(catalogs, spec)
    train_recs = mark_partial_supervision(train_recs, spec.psup_fraction, catalogs)
    out = _out_dir(args, "splits")
    train_path, test_path = write_split(out, train_recs, test_recs)
    counts = split_summary(train_recs, test_recs)
    _write_json(
        out / "split.json",
        {
            "config": {**cfg.to_dict(["split"]), "datasets": paths},
            "counts": counts,
            "train_manifest": str(train_path),
            "test_manifest": str(test_path),
            "test_ids": [r.video_id for r in test_recs],
        },
    )
    line = f"raw={counts['raw']} summary={counts['summary']} test={counts['test']}"
    if counts["paired"]:
        line += f" paired={counts['paired']}"
    print(line)
    return 0


def _train_one(cfg_values: dict, seed: int, manifest_path: str, out: str, resume: Optional[str]) -> dict:
    cfg = RunConfig()
    cfg.values = cfg_values
    dataset = load_unpaired_dataset(read_manifest(manifest_path))
    tcfg = cfg.train(seed)
    net = cfg.network(D=dataset.raw_videos[0].D)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.jsonl"
    if resume is None and metrics_path.exists():
        metrics_path.unlink()
    state, metrics = train(dataset, tcfg, net, out_dir=out_dir, resume_from=resume, metrics_path=metrics_path)
    last = [m for m in metrics if m["epoch"] == state.epoch - 1]
    summary = {"seed": seed, "checkpoint": str(out_dir / "final.uvsc"), "epochs": state.epoch, "steps": state.step}
    if last:
        for key in ("total", "reconst", "div", "adv", "d_real_score", "d_fake_score"):
            vals = [m[key] for m in last if m.get(key) is not None]
            if vals:
                summary[f"last_epoch_mean_{key}"] = float(np.mean(vals))
    return summary


def cmd_train(args, cfg: RunConfig) -> int:
    manifest = _need_file(args.train_manifest)
    seeds = parse_seeds(args.seeds) if args.seeds else [cfg["train.seed"]]
    for s in seeds:
        cfg.train(s)
    if args.resume and len(seeds) != 1:
        raise ConfigError("--resume works with a single seed")
    read_manifest(manifest)
    out = _out_dir(args, "train")
    jobs = [(cfg.values, s, str(manifest), str(out / f"seed_{s}"), args.resume) for s in seeds]
    if args.parallel and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel, mp_context=get_context("spawn")) as pool:
            runs = list(pool.map(_train_one, *zip(*jobs)))
    else:
        runs = [_train_one(*job) for job in jobs]
    report = {
        "config": {**cfg.to_dict(["network", "train"]), "resolved_beta": cfg.beta(), "seeds": seeds},
        "train_manifest": str(manifest),
        "runs": runs,
    }
    _write_json(out / "train_report.json", report)
    for r in runs:
        print(f"seed {r['seed']}: {r['checkpoint']}")
    return 0


def _table(rows: list) -> str:
    w = max(len(r["run"]) for r in rows)
    lines = [f"{'run':<{w}}  {'P':>8}  {'R':>8}  {'F':>8}"]
    for r in rows:
        lines.append(f"{r['run']:<{w}}  {r['P']:8.2f}  {r['R']:8.2f}  {r['F']:8.2f}")
    return "\n".join(lines)


def _mean_row(rows: list, label: str) -> dict:
    return {"run": label, **{m: round(float(np.mean([r[m] for r in rows])), 4) for m in ("P", "R", "F")}}


def cmd_evaluate(args, cfg: RunConfig) -> int:
    ecfg = cfg.eval()
    ckpts = [_need_file(c) for c in args.checkpoint]
    test_set = load_test_set(read_manifest(_need_file(args.test_manifest)), ecfg)
    rows, details = [], []
    k_ratio = None
    for path in ckpts:
        selector, _, meta = load_networks(path)
        k_ratio = selector.config.k_ratio
        rep = evaluate_dataset(selector, test_set, ecfg)
        seed = meta.get("train", {}).get("seed")
        rows.append({"run": f"seed={seed}" if seed is not None else path.stem, "P": rep["mean_P"], "R": rep["mean_R"], "F": rep["mean_F"]})
        details.append({"checkpoint": str(path), "seed": seed, "per_video": rep["per_video"]})
    mean = _mean_row(rows, "mean")
    report = {"config": {**cfg.to_dict(["eval"]), "test_manifest": str(args.test_manifest)}, "runs": rows, "mean": mean, "details": details}
    out_rows = rows + [mean]
    if args.baseline_seeds:
        base = []
        for s in parse_seeds(args.baseline_seeds):
            rep = evaluate_random_baseline(test_set, ecfg, k_ratio, s)
            base.append({"run": f"random seed={s}", "P": rep["mean_P"], "R": rep["mean_R"], "F": rep["mean_F"]})
        report["random_baseline"] = {"runs": base, "mean": _mean_row(base, "random mean")}
        out_rows += [report["random_baseline"]["mean"]]
    print(_table(out_rows))
    report_path = Path(args.report) if args.report else default_output_root() / "evaluate" / "report.json"
    _write_json(report_path, report)
    return 0


def _input_sequences(args) -> list:
    seqs = []
    if args.manifest:
        m = read_manifest(_need_file(args.manifest))
        seen = set()
        for r in m.records:
            if r.video_id not in seen:
                seen.add(r.video_id)
                seqs.append(read_features(m.resolve(r.feature_path), r.video_id))
    for f in args.features or []:
        seqs.append(read_features(_need_file(f)))
    if not seqs:
        raise ConfigError("give --features files or --manifest")
    return seqs


def cmd_summarize(args, cfg: RunConfig) -> int:
    ecfg = cfg.eval()
    selector, _, meta = load_networks(_need_file(args.checkpoint))
    seqs = _input_sequences(args)
    out = _out_dir(args, "summaries")
    out.mkdir(parents=True, exist_ok=True)
    for v in seqs:
        if v.D != selector.config.D:
            raise ValidationError(f"{v.video_id}: checkpoint expects D={selector.config.D}, features have D={v.D}")
        with torch.no_grad():
            res = summarize_video(selector, v, ecfg)
        mask = res["summary"].mask
        write_annotation(out / f"{v.video_id}.summary.uvsa", mask[None, :])
        _write_json(
            out / f"{v.video_id}.summary.json",
            {
                "video_id": v.video_id,
                "T": v.T,
                "keyframes": [int(i) for i in res["keyframes"]],
                "boundaries": res["segments"].boundaries.tolist(),
                "summary_frames": int(mask.sum()),
                "checkpoint": str(args.checkpoint),
                "config": {**cfg.to_dict(["eval"]), "network": meta["network"]},
            },
        )
        print(f"{v.video_id}: {int(mask.sum())}/{v.T} frames")
    return 0


def cmd_segment(args, cfg: RunConfig) -> int:
    ecfg = cfg.eval()
    videos = []
    for v in _input_sequences(args):
        seg = kts_with_config(v, ecfg.kts)
        videos.append({"video_id": v.video_id, "T": v.T, "boundaries": seg.boundaries.tolist()})
    report = {"config": {"kts": asdict(ecfg.kts)}, "videos": videos}
    if args.out:
        _write_json(Path(args.out), report)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def describe_file(path) -> dict:
    p = _need_file(path)
    with open(p, "rb") as fh:
        magic = fh.read(4)
    if magic == FEATURE_MAGIC:
        seq = read_features(p)
        f = seq.features
        return {"kind": "features", "video_id": seq.video_id, "T": seq.T, "D": seq.D, "min": float(f.min()), "max": float(f.max()), "mean": float(f.mean())}
    if magic == ANNOTATION_MAGIC:
        m = read_annotation(p)
        return {"kind": "annotation", "U": int(m.shape[0]), "T": int(m.shape[1]), "ones_per_row": m.sum(axis=1).astype(int).tolist()}
    if magic == CHECKPOINT_MAGIC:
        meta, arrays = read_checkpoint(p)
        return {"kind": "checkpoint", "config": meta, "arrays": {k: list(v.shape) for k, v in sorted(arrays.items())}}
    if p.suffix in (".tsv", ".txt", ".manifest"):
        m = read_manifest(p)
        roles = {}
        for r in m.records:
            roles[r.role] = roles.get(r.role, 0) + 1
        return {"kind": "manifest", "records": len(m.records), "roles": roles}
    raise FormatError(f"{p}: unrecognized file (magic {magic!r})")


def cmd_inspect(args, cfg: RunConfig) -> int:
    print(json.dumps(describe_file(args.path), indent=2, sort_keys=True))
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uvsn", description="Video summarization from unpaired data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str):
        sp = sub.add_parser(name, help=help, description=help + " Settings: --section.key=value.")
        sp.add_argument("--config", help="flat 'section.key = value' config file")
        sp.set_defaults(func=func)
        return sp

    sp = add("gen-synth", cmd_gen_synth, "Write a synthetic corpus with planted segments.")
    sp.add_argument("--out", help=f"corpus directory (default ${OUTPUT_ROOT_ENV}/synth)")
    sp.add_argument("--seed", type=int, help="shorthand for --synth.seed")
    sp.add_argument("--n-videos", type=int, help="shorthand for --synth.n_videos")

    sp = add("make-splits", cmd_make_splits, "Build unpaired train/test manifests.")
    sp.add_argument("--dataset", action="append", metavar="NAME=CATALOG", help="dataset catalog manifest (repeat)")
    sp.add_argument("--target", help="target dataset name")
    sp.add_argument("--mode", choices=("standard", "transfer"))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--psup-fraction", type=float)
    sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/splits)")

    sp = add("train", cmd_train, "Train selector and discriminator.")
    sp.add_argument("--train-manifest", required=True)
    sp.add_argument("--preset")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seeds", help="e.g. 1..5 or 1,3")
    sp.add_argument("--target", help="target dataset name (picks the default diversity weight)")
    sp.add_argument("--resume", help="checkpoint to continue from (single seed)")
    sp.add_argument("--parallel", type=int, metavar="N", help="train seeds in N worker processes")
    sp.add_argument("--out", help=f"run directory (default ${OUTPUT_ROOT_ENV}/train)")

    sp = add("evaluate", cmd_evaluate, "Score checkpoints on a test manifest.")
    sp.add_argument("--checkpoint", nargs="+", required=True)
    sp.add_argument("--test-manifest", required=True)
    sp.add_argument("--baseline-seeds", help="also score random key frames with these seeds")
    sp.add_argument("--report", help=f"JSON report path (default ${OUTPUT_ROOT_ENV}/evaluate/report.json)")

    sp = add("summarize", cmd_summarize, "Write keyshot summaries for feature files.")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--features", nargs="+")
    sp.add_argument("--manifest")
    sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/summaries)")

    sp = add("segment", cmd_segment, "Run kernel temporal segmentation on feature files.")
    sp.add_argument("--features", nargs="+")
    sp.add_argument("--manifest")
    sp.add_argument("--out", help="JSON output path (default stdout)")

    sp = add("inspect", cmd_inspect, "Describe a feature, annotation, checkpoint or manifest file.")
    sp.add_argument("path")
    return p


# flag -> setting it is shorthand for
_SHORTHANDS = {
    "gen-synth": {"seed": "synth.seed", "n_videos": "synth.n_videos"},
    "make-splits": {"target": "split.target", "mode": "split.mode", "seed": "split.seed", "psup_fraction": "split.psup_fraction"},
    "train": {"preset": "train.preset", "epochs": "train.epochs", "target": "split.target"},
}


def resolve_config(args, overrides: list) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg.load_file(args.config)
    for key, val in overrides:
        cfg.set(key, val)
    for flag, dotted in _SHORTHANDS.get(args.command, {}).items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg.set(dotted, str(val))
    return cfg


def main(argv: Optional[list] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    rest, overrides = _split_overrides(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args, overrides)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"uvsn {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"uvsn {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ValidationError, OSError) as exc:
        print(f"uvsn {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
