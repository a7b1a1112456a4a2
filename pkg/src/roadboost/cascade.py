"""Cascade of boosted stages: training with hard-negative mining."""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import sampler
from .annotation import label_roi
from .boosting import (
    LabeledSample,
    StageConfig,
    StageModel,
    stage_from_dict,
    stage_to_dict,
    train_stage_array,
)
from .features import extract_features_sliding, feature_dim
from .imaging import gradient_field

MODEL_FORMAT = "road-cascade"
MODEL_VERSION = 1


@dataclass(frozen=True)
class CascadeConfig:
    """Training knobs for the whole cascade."""

    roi_size: int = 15
    samples_per_class_per_frame: int = 140
    target_cascade_fpr: float = 0.05
    max_stages: int = 8
    mining_stride: int = 5
    seed: int = 0
    stage: StageConfig = StageConfig()

    def __post_init__(self):
        if min(self.roi_size, self.max_stages, self.mining_stride) < 1:
            raise ValueError("counts must be >= 1")
        if self.samples_per_class_per_frame < 1:
            raise ValueError("samples_per_class_per_frame must be >= 1")
        if not 0.0 < self.target_cascade_fpr <= 1.0:
            raise ValueError("target_cascade_fpr must be in (0, 1]")


def cascade_rates(detection_rates, false_positive_rates):
    """Overall (DR, FPR) as componentwise products of the stage rates."""
    drs = list(detection_rates)
    fprs = list(false_positive_rates)
    if len(drs) != len(fprs):
        raise ValueError(
            f"rate lists differ in length: {len(drs)} vs {len(fprs)}"
        )
    return float(np.prod(drs)) if drs else 1.0, (
        float(np.prod(fprs)) if fprs else 1.0
    )


@dataclass(eq=False)
class CascadeModel:
    """Ordered stages; a vector passes only if every stage accepts it."""

    stages: tuple
    stage_detection_rates: tuple
    stage_false_positive_rates: tuple
    roi_w: int
    roi_h: int
    config: CascadeConfig

    def __post_init__(self):
        self.stages = tuple(self.stages)
        self.stage_detection_rates = tuple(
            float(r) for r in self.stage_detection_rates
        )
        self.stage_false_positive_rates = tuple(
            float(r) for r in self.stage_false_positive_rates
        )
        if len(self.stages) < 1:
            raise ValueError("cascade needs >= 1 stage")
        if not (
            len(self.stages)
            == len(self.stage_detection_rates)
            == len(self.stage_false_positive_rates)
        ):
            raise ValueError("one DR/FPR pair per stage required")
        for r in self.stage_detection_rates + self.stage_false_positive_rates:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rate {r} outside [0, 1]")

    @property
    def n_features(self) -> int:
        return self.stages[0].n_features

    def overall_rates(self):
        return cascade_rates(
            self.stage_detection_rates, self.stage_false_positive_rates
        )

    def evaluate(self, x):
        """(accepted, stages evaluated); stops at the first rejection."""
        for i, stage in enumerate(self.stages):
            if not stage.accepts(x):
                return False, i + 1
        return True, len(self.stages)

    def accepts(self, x) -> bool:
        return self.evaluate(x)[0]

    def accept_mask(self, X: np.ndarray, n_stages: int | None = None) -> np.ndarray:
        """Vectorized accepts over the rows of X (optionally a stage prefix)."""
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected (n, {self.n_features}) feature matrix, got {X.shape}"
            )
        stages = self.stages if n_stages is None else self.stages[:n_stages]
        alive = np.arange(len(X))
        for stage in stages:
            if alive.size == 0:
                break
            scores = stage.scores_batch(X, alive)
            alive = alive[scores >= stage.threshold]
        mask = np.zeros(len(X), dtype=bool)
        mask[alive] = True
        return mask


def cascade_accepts(model: CascadeModel, x) -> bool:
    """True iff every stage accepts; evaluation short-circuits."""
    return model.accepts(x)


@dataclass
class StageRecord:
    """Summary of one trained stage for the report."""

    index: int
    n_trees: int
    detection_rate: float
    false_positive_rate: float
    n_positives: int
    n_negatives: int
    mined_negatives: int
    error_bound: float
    pool_provenance: dict


@dataclass
class TrainingReport:
    stage_records: list = field(default_factory=list)
    overall_detection_rate: float = 1.0
    overall_false_positive_rate: float = 1.0
    n_frames: int = 0
    wall_time_s: float = 0.0
    stop_reason: str = ""
    pool_snapshots: list | None = None

    def to_text(self) -> str:
        lines = [
            "cascade training report",
            f"frames: {self.n_frames}   stages: {len(self.stage_records)}   "
            f"stop: {self.stop_reason}   wall time: {self.wall_time_s:.1f} s",
            "stage  trees  DR_i            FPR_i           pos    neg    "
            "mined  bound",
        ]
        for r in self.stage_records:
            lines.append(
                f"{r.index:>5}  {r.n_trees:>5}  {r.detection_rate:<14.12f}  "
                f"{r.false_positive_rate:<14.12f}  {r.n_positives:<5}  "
                f"{r.n_negatives:<5}  {r.mined_negatives:<5}  "
                f"{r.error_bound:.3g}"
            )
            prov = ", ".join(
                f"{k}={v}" for k, v in sorted(r.pool_provenance.items())
            )
            lines.append(f"       negative pool: {prov}")
        lines.append(
            f"overall: DR_t = {self.overall_detection_rate:.12f}   "
            f"FPR_t = {self.overall_false_positive_rate:.12f}"
        )
        return "\n".join(lines) + "\n"


def _provenance_counts(samples) -> dict:
    counts: dict = {}
    for s in samples:
        counts[s.provenance.value] = counts.get(s.provenance.value, 0) + 1
    return counts


def _mine_hard_negatives(frames, grads, model: CascadeModel, config, quota: int):
    """Sliding-window false positives of the current cascade, in frame order."""
    mined: list = []
    for i, (ann, img) in enumerate(frames):
        if len(mined) >= quota:
            break
        X, rects = extract_features_sliding(
            img, grads(i), config.roi_size, config.mining_stride
        )
        if not rects:
            continue
        accepted = model.accept_mask(X)
        for j in np.flatnonzero(accepted):
            label = label_roi(rects[j], ann)
            if label.positive:
                continue
            mined.append(LabeledSample(X[j], -1, label.provenance))
            if len(mined) >= quota:
                break
    return mined


def train_cascade(frames, config: CascadeConfig = CascadeConfig(), record_pools=False):
    """Train the full cascade on annotated frames.

    frames is a sequence of (FrameAnnotation, GrayImage) pairs. Stage by
    stage: train on the current pools, keep only pool samples the new stage
    accepts (so later rates are conditional on survival), then refill the
    negative pool with sliding-window false positives of the cascade built
    so far. Stops on the cascade FPR target, the stage cap, or when mining
    finds no false positives left.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("no training frames")
    t0 = time.perf_counter()

    grad_cache: dict = {}

    def grads(i):
        if i not in grad_cache:
            grad_cache[i] = gradient_field(frames[i][1])
        return grad_cache[i]

    positives: list = []
    negatives: list = []
    for i, (ann, img) in enumerate(frames):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, i]))
        drawn = sampler.sample_random_rois(
            ann,
            img,
            config.samples_per_class_per_frame,
            config.roi_size,
            rng,
            grad=grads(i),
        )
        for s in drawn:
            (positives if s.label > 0 else negatives).append(s)

    pool_target = config.samples_per_class_per_frame * len(frames)
    report = TrainingReport(n_frames=len(frames))
    if record_pools:
        report.pool_snapshots = []
    stages: list = []
    drs: list = []
    fprs: list = []
    model = None

    while True:
        if record_pools:
            report.pool_snapshots.append(
                (
                    np.stack([s.features for s in positives]),
                    np.stack([s.features for s in negatives]),
                )
            )
        X = np.stack([s.features for s in positives + negatives])
        y = np.concatenate(
            [np.ones(len(positives)), -np.ones(len(negatives))]
        )
        stage = train_stage_array(X, y, config.stage)
        accepted = stage.scores_batch(X) >= stage.threshold
        dr_i = float(accepted[: len(positives)].mean())
        fpr_i = float(accepted[len(positives) :].mean())
        stages.append(stage)
        drs.append(dr_i)
        fprs.append(fpr_i)
        record = StageRecord(
            index=len(stages),
            n_trees=len(stage.trees),
            detection_rate=dr_i,
            false_positive_rate=fpr_i,
            n_positives=len(positives),
            n_negatives=len(negatives),
            mined_negatives=0,
            error_bound=float(
                np.prod([2 * math.sqrt(e * (1 - e)) for e in stage.round_errors])
            ),
            pool_provenance=_provenance_counts(negatives),
        )
        report.stage_records.append(record)
        model = CascadeModel(
            stages=tuple(stages),
            stage_detection_rates=tuple(drs),
            stage_false_positive_rates=tuple(fprs),
            roi_w=config.roi_size,
            roi_h=config.roi_size,
            config=config,
        )

        n_pos = len(positives)
        positives = [s for s, a in zip(positives, accepted[:n_pos]) if a]
        negatives = [s for s, a in zip(negatives, accepted[n_pos:]) if a]

        if len(stages) >= config.max_stages:
            report.stop_reason = "max_stages"
            break
        if float(np.prod(fprs)) <= config.target_cascade_fpr:
            report.stop_reason = "target_fpr"
            break
        if not positives:
            report.stop_reason = "positives_exhausted"
            break
        mined = _mine_hard_negatives(
            frames, grads, model, config, pool_target - len(negatives)
        )
        record.mined_negatives = len(mined)
        negatives.extend(mined)
        if not negatives:
            report.stop_reason = "mining_exhausted"
            break

    report.overall_detection_rate, report.overall_false_positive_rate = (
        model.overall_rates()
    )
    report.wall_time_s = time.perf_counter() - t0
    return model, report


# ---------------------------------------------------------------------------
# serialization

def _config_to_dict(config: CascadeConfig) -> dict:
    return {
        "roi_size": config.roi_size,
        "samples_per_class_per_frame": config.samples_per_class_per_frame,
        "target_cascade_fpr": config.target_cascade_fpr,
        "max_stages": config.max_stages,
        "mining_stride": config.mining_stride,
        "seed": config.seed,
        "stage": {
            "max_trees": config.stage.max_trees,
            "target_stage_dr": config.stage.target_stage_dr,
            "target_stage_fpr": config.stage.target_stage_fpr,
            "eps_min": config.stage.eps_min,
        },
    }


def _config_from_dict(d: dict) -> CascadeConfig:
    return CascadeConfig(
        roi_size=int(d["roi_size"]),
        samples_per_class_per_frame=int(d["samples_per_class_per_frame"]),
        target_cascade_fpr=float(d["target_cascade_fpr"]),
        max_stages=int(d["max_stages"]),
        mining_stride=int(d["mining_stride"]),
        seed=int(d["seed"]),
        stage=StageConfig(
            max_trees=int(d["stage"]["max_trees"]),
            target_stage_dr=float(d["stage"]["target_stage_dr"]),
            target_stage_fpr=float(d["stage"]["target_stage_fpr"]),
            eps_min=float(d["stage"]["eps_min"]),
        ),
    )


def cascade_to_json(model: CascadeModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "roi_w": model.roi_w,
        "roi_h": model.roi_h,
        "feature_dim": model.n_features,
        "config": _config_to_dict(model.config),
        "stage_detection_rates": list(model.stage_detection_rates),
        "stage_false_positive_rates": list(model.stage_false_positive_rates),
        "stages": [stage_to_dict(s) for s in model.stages],
    }
    return json.dumps(doc, indent=2) + "\n"


def cascade_from_json(text: str) -> CascadeModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"model file is not valid JSON: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unknown model format {doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    model = CascadeModel(
        stages=tuple(stage_from_dict(s) for s in doc["stages"]),
        stage_detection_rates=tuple(doc["stage_detection_rates"]),
        stage_false_positive_rates=tuple(doc["stage_false_positive_rates"]),
        roi_w=int(doc["roi_w"]),
        roi_h=int(doc["roi_h"]),
        config=_config_from_dict(doc["config"]),
    )
    if model.n_features != int(doc["feature_dim"]):
        raise ValueError("feature_dim does not match the stored stages")
    expected = feature_dim(model.roi_w, model.roi_h)
    if model.n_features != expected:
        raise ValueError(
            f"stored feature dim {model.n_features} does not match "
            f"{model.roi_w}x{model.roi_h} ROI ({expected})"
        )
    return model


def save_cascade(model: CascadeModel, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(cascade_to_json(model))


def load_cascade(path) -> CascadeModel:
    with open(path, "r", encoding="ascii") as fh:
        return cascade_from_json(fh.read())
