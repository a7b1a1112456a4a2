"""Command line front end: synth, train, eval, classify."""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import sampler
from .boosting import StageConfig, TrainingError
from .cascade import CascadeConfig, load_cascade, save_cascade, train_cascade
from .evaluation import confusion, render_mask, roc_sweep
from .imaging import load_pgm_file, save_pgm_file
from .sampler import SplitSpec, split_frames
from .synthdata import CorpusRanges, generate_corpus, load_corpus


class UsageError(Exception):
    """Bad flags or config; maps to exit code 2."""


# key -> (type, default); every key has a default so a config file is optional
CONFIG_SPEC = {
    "roi_size": (int, 15),
    "samples_per_class_per_frame": (int, 140),
    "mining_stride": (int, 5),
    "target_cascade_fpr": (float, 0.05),
    "max_stages": (int, 8),
    "max_trees": (int, 40),
    "target_stage_dr": (float, 0.995),
    "target_stage_fpr": (float, 0.5),
    "eps_min": (float, 1e-10),
    "seed": (int, 0),
    "split_seed": (int, 0),
    "n_train": (int, 0),  # 0 means 60% of the corpus
    "frame_width": (int, 640),
    "frame_height": (int, 480),
}


def load_run_config(path=None) -> dict:
    """Typed config from a key=value file; unknown keys are rejected."""
    cfg = {key: default for key, (_, default) in CONFIG_SPEC.items()}
    if path is None:
        return cfg
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_SPEC:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        typ, _ = CONFIG_SPEC[key]
        try:
            cfg[key] = typ(value)
        except ValueError:
            raise UsageError(
                f"{path}:{lineno}: cannot parse {value!r} as {typ.__name__}"
            ) from None
    return cfg


def _cascade_config(cfg: dict, seed: int) -> CascadeConfig:
    return CascadeConfig(
        roi_size=cfg["roi_size"],
        samples_per_class_per_frame=cfg["samples_per_class_per_frame"],
        target_cascade_fpr=cfg["target_cascade_fpr"],
        max_stages=cfg["max_stages"],
        mining_stride=cfg["mining_stride"],
        seed=seed,
        stage=StageConfig(
            max_trees=cfg["max_trees"],
            target_stage_dr=cfg["target_stage_dr"],
            target_stage_fpr=cfg["target_stage_fpr"],
            eps_min=cfg["eps_min"],
        ),
    )


def _resolve_n_train(cfg: dict, flag_value, total: int) -> int:
    n_train = flag_value if flag_value is not None else cfg["n_train"]
    if n_train == 0:
        n_train = max(1, round(0.6 * total))
    if not 1 <= n_train <= total:
        raise ValueError(
            f"n_train {n_train} not usable with a {total}-frame corpus"
        )
    return n_train


def _split(frames, cfg, args):
    split_seed = (
        args.split_seed if args.split_seed is not None else cfg["split_seed"]
    )
    n_train = _resolve_n_train(cfg, args.n_train, len(frames))
    return split_frames(frames, SplitSpec(seed=split_seed, n_train=n_train))


def _heldout_samples(test_frames, cfg, roi_size: int):
    samples = []
    for i, (ann, img) in enumerate(test_frames):
        rng = np.random.default_rng(np.random.SeedSequence([cfg["seed"], i]))
        samples.extend(
            sampler.sample_random_rois(
                ann, img, cfg["samples_per_class_per_frame"], roi_size, rng
            )
        )
    return samples


def cmd_synth(args) -> int:
    cfg = load_run_config(args.config)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    ranges = CorpusRanges(width=cfg["frame_width"], height=cfg["frame_height"])
    frames = generate_corpus(args.n, args.seed, args.out, ranges=ranges)
    print(f"wrote {len(frames)} frames + annotations.xml to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    frames = load_corpus(args.data)
    train, _ = _split(frames, cfg, args)
    seed = args.seed if args.seed is not None else cfg["seed"]
    model, report = train_cascade(train, _cascade_config(cfg, seed))
    save_cascade(model, args.out)
    text = report.to_text()
    print(text, end="")
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    print(f"model written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    model = load_cascade(args.model)
    frames = load_corpus(args.data)
    _, test = _split(frames, cfg, args)
    if not test:
        raise ValueError("split leaves no held-out frames to evaluate on")
    samples = _heldout_samples(test, cfg, model.roi_w)
    counts = confusion(model, samples)
    curve = roc_sweep(model, samples)
    Path(args.roc_out).write_text(curve.to_csv(), encoding="ascii")
    print(
        f"held-out frames: {len(test)}   samples: {len(samples)}\n"
        f"tp={counts.tp} fp={counts.fp} tn={counts.tn} fn={counts.fn}\n"
        f"DR={counts.detection_rate:.6f} FPR={counts.false_positive_rate:.6f}\n"
        f"ROC written to {args.roc_out}"
    )
    return 0


def cmd_classify(args) -> int:
    model = load_cascade(args.model)
    img = load_pgm_file(args.image)
    mask = render_mask(model, img, args.stride)
    save_pgm_file(args.out, mask)
    print(f"mask written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadboost",
        description="Road / non-road classification with a boosted cascade",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p.add_argument("--n", type=int, required=True, help="number of frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a cascade on a corpus")
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", default=None, help="also write the report here")
    p.add_argument("--config", default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="ROC + confusion on held-out frames")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--roc-out", required=True, help="ROC CSV to write")
    p.add_argument("--config", default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="render a road mask for one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=5)
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
