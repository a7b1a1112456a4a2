"""Deterministic frame splitting, random ROI draws, window enumeration."""

from dataclasses import dataclass

import numpy as np

from .annotation import FrameAnnotation, label_roi
from .boosting import LabeledSample
from .features import extract_features
from .imaging import GradientField, GrayImage, Rect, gradient_field

# draws allowed per requested sample of each class before giving up
ATTEMPT_FACTOR = 10_000


class SamplingError(ValueError):
    """Random ROI collection cannot satisfy its quota."""


@dataclass(frozen=True)
class SplitSpec:
    """Seeded shuffle split: first n_train frames train, the rest test."""

    seed: int
    n_train: int


def split_frames(frames, spec: SplitSpec):
    """Disjoint, exhaustive train/test partition, stable per seed."""
    frames = list(frames)
    if spec.n_train > len(frames):
        raise ValueError(
            f"n_train {spec.n_train} exceeds {len(frames)} available frames"
        )
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(len(frames))
    train = [frames[i] for i in perm[: spec.n_train]]
    test = [frames[i] for i in perm[spec.n_train :]]
    return train, test


def sliding_windows(img_w: int, img_h: int, size: int, stride: int):
    """Row-major grid of size x size windows fully inside the image."""
    if size < 1 or stride < 1:
        raise ValueError("size and stride must be >= 1")
    return [
        Rect(x, y, size, size)
        for y in range(0, img_h - size + 1, stride)
        for x in range(0, img_w - size + 1, stride)
    ]


def sample_random_rois(
    frame: FrameAnnotation,
    img: GrayImage,
    count_per_class: int,
    roi_size: int,
    rng: np.random.Generator,
    grad: GradientField | None = None,
):
    """Uniform random ROIs, retried until both class quotas are filled.

    Positions are top-left corners drawn so the ROI fits the image; each
    draw is labeled from the frame's polygons and kept while its class
    still needs samples. Returns the samples in draw order.
    """
    if count_per_class < 0:
        raise ValueError("count_per_class must be >= 0")
    if count_per_class == 0:
        return []
    if img.width < roi_size or img.height < roi_size:
        raise SamplingError(
            f"image {img.width}x{img.height} smaller than {roi_size}x{roi_size} ROI"
        )
    if grad is None:
        grad = gradient_field(img)
    max_x = img.width - roi_size
    max_y = img.height - roi_size
    budget = 2 * ATTEMPT_FACTOR * count_per_class
    n_pos = n_neg = 0
    out = []
    for _ in range(budget):
        if n_pos >= count_per_class and n_neg >= count_per_class:
            break
        x = int(rng.integers(0, max_x + 1))
        y = int(rng.integers(0, max_y + 1))
        roi = Rect(x, y, roi_size, roi_size)
        label = label_roi(roi, frame)
        if label.positive:
            if n_pos >= count_per_class:
                continue
            n_pos += 1
        else:
            if n_neg >= count_per_class:
                continue
            n_neg += 1
        fv = extract_features(img, grad, roi)
        out.append(LabeledSample(fv.values, label.sign, label.provenance))
    if n_pos < count_per_class or n_neg < count_per_class:
        raise SamplingError(
            f"frame {frame.frame_id!r}: could not collect {count_per_class} "
            f"samples per class within {budget} draws "
            f"(got {n_pos} positive, {n_neg} negative)"
        )
    return out
