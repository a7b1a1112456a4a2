"""Confusion counting, ROC threshold sweep, and mask rendering."""

import math
from dataclasses import dataclass

import numpy as np

from .cascade import CascadeModel
from .features import extract_features_batch, extract_features_sliding
from .imaging import GrayImage, Rect, gradient_field


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def detection_rate(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else 0.0

    @property
    def false_positive_rate(self) -> float:
        neg = self.fp + self.tn
        return self.fp / neg if neg else 0.0


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    dr: float


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by descending final-stage threshold."""

    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def to_csv(self) -> str:
        lines = ["threshold,fpr,dr"]
        for p in self.points:
            lines.append(f"{p.threshold:.6f},{p.fpr:.6f},{p.dr:.6f}")
        return "\n".join(lines) + "\n"


def _sample_matrix(samples):
    samples = list(samples)
    if not samples:
        raise ValueError("empty sample set")
    X = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
    y = np.array([s.label for s in samples], dtype=np.float64)
    return X, y


def confusion(model: CascadeModel, samples) -> ConfusionCounts:
    """Cascade decisions against the sample labels."""
    X, y = _sample_matrix(samples)
    accepted = model.accept_mask(X)
    pos = y > 0
    return ConfusionCounts(
        tp=int(np.sum(accepted & pos)),
        fp=int(np.sum(accepted & ~pos)),
        tn=int(np.sum(~accepted & ~pos)),
        fn=int(np.sum(~accepted & pos)),
    )


def roc_sweep(model: CascadeModel, samples) -> RocCurve:
    """ROC over the final-stage threshold, earlier stages held fixed.

    Rates are measured against all samples, so samples rejected by the
    earlier stages cap the reachable detection rate. The +inf endpoint
    accepts nothing; the -inf endpoint shows the prefix acceptance rates.
    """
    X, y = _sample_matrix(samples)
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    survivors = model.accept_mask(X, n_stages=len(model.stages) - 1)
    final = model.stages[-1]
    scores = final.scores_batch(X, np.flatnonzero(survivors))
    labels = y[survivors]

    order = np.argsort(scores)[::-1]
    scores = scores[order]
    labels = labels[order]
    cum_tp = np.cumsum(labels > 0)
    cum_fp = np.cumsum(labels < 0)

    def point(threshold, tp, fp):
        return RocPoint(
            threshold=float(threshold),
            fpr=fp / n_neg if n_neg else 0.0,
            dr=tp / n_pos if n_pos else 0.0,
        )

    points = [point(math.inf, 0, 0)]
    for i in range(len(scores)):
        last_of_run = i + 1 == len(scores) or scores[i + 1] != scores[i]
        if last_of_run:
            points.append(point(scores[i], int(cum_tp[i]), int(cum_fp[i])))
    total_tp = int(cum_tp[-1]) if len(scores) else 0
    total_fp = int(cum_fp[-1]) if len(scores) else 0
    points.append(point(-math.inf, total_tp, total_fp))
    return RocCurve(points=tuple(points))


def render_mask(model: CascadeModel, img: GrayImage, stride: int) -> GrayImage:
    """Classification mask: accepted windows painted black on white.

    Overlapping windows resolve in favour of acceptance, so contiguous
    accepted regions come out filled.
    """
    size_w, size_h = model.roi_w, model.roi_h
    if img.width < size_w or img.height < size_h:
        raise ValueError(
            f"image {img.width}x{img.height} smaller than the model's "
            f"{size_w}x{size_h} ROI"
        )
    grad = gradient_field(img)
    if size_w == size_h:
        X, rects = extract_features_sliding(img, grad, size_w, stride)
    else:
        rects = [
            Rect(x, y, size_w, size_h)
            for y in range(0, img.height - size_h + 1, stride)
            for x in range(0, img.width - size_w + 1, stride)
        ]
        X = extract_features_batch(img, grad, rects)
    accepted = model.accept_mask(X)
    canvas = np.full((img.height, img.width), 255, dtype=np.uint8)
    for j in np.flatnonzero(accepted):
        r = rects[j]
        canvas[r.y : r.y + r.h, r.x : r.x + r.w] = 0
    return GrayImage(canvas)
