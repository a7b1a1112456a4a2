"""Per-ROI feature vectors: pixels, intensity histogram, gradients."""

from dataclasses import dataclass

import numpy as np

from .imaging import GradientField, GrayImage, Rect, _require_inside

HISTOGRAM_BINS = 256


def feature_dim(roi_w: int, roi_h: int) -> int:
    """Vector length for a w x h ROI: three pixel blocks plus the histogram."""
    return 3 * roi_w * roi_h + HISTOGRAM_BINS


@dataclass(frozen=True)
class FeatureVector:
    """Flat descriptor of one ROI.

    Layout: [normalized pixels (w*h)] ++ [histogram (256)] ++
    [gradient magnitudes (w*h)] ++ [gradient directions (w*h)],
    each pixel block row-major.
    """

    values: np.ndarray
    roi_w: int
    roi_h: int

    def __post_init__(self):
        if self.values.ndim != 1:
            raise ValueError("feature values must be a flat vector")
        expected = feature_dim(self.roi_w, self.roi_h)
        if self.values.size != expected:
            raise ValueError(
                f"feature vector of a {self.roi_w}x{self.roi_h} ROI must "
                f"have {expected} values, got {self.values.size}"
            )
        self.values.setflags(write=False)

    def __len__(self):
        return self.values.size


def _check_field(img: GrayImage, grad: GradientField):
    if (grad.height, grad.width) != (img.height, img.width):
        raise ValueError(
            f"gradient field {grad.width}x{grad.height} does not match "
            f"image {img.width}x{img.height}"
        )


def extract_features(img: GrayImage, grad: GradientField, roi: Rect) -> FeatureVector:
    """Assemble the feature vector of one ROI.

    Gradient blocks are cropped from the full-image field so window borders
    see true neighbours instead of artificial edge responses.
    """
    _check_field(img, grad)
    _require_inside(img, roi)
    ys, xs = slice(roi.y, roi.y + roi.h), slice(roi.x, roi.x + roi.w)
    raw = img.pixels[ys, xs]
    pix = raw.ravel().astype(np.float64) / 255.0
    hist = np.bincount(raw.ravel(), minlength=HISTOGRAM_BINS) / float(roi.w * roi.h)
    mag = grad.magnitude[ys, xs].ravel()
    direc = grad.direction[ys, xs].ravel()
    values = np.concatenate([pix, hist, mag, direc])
    return FeatureVector(values=values, roi_w=roi.w, roi_h=roi.h)


def extract_features_batch(img: GrayImage, grad: GradientField, rois) -> np.ndarray:
    """Feature matrix (n_rois, dim) for an arbitrary ROI list, all same size."""
    rois = list(rois)
    if not rois:
        return np.zeros((0, 0))
    vecs = [extract_features(img, grad, r) for r in rois]
    dim = len(vecs[0])
    if any(len(v) != dim for v in vecs):
        raise ValueError("all ROIs in a batch must share one size")
    return np.stack([v.values for v in vecs])


def extract_features_sliding(img: GrayImage, grad: GradientField, size: int, stride: int):
    """Feature matrix for the dense sliding grid, plus its row-major rects.

    Produces bit-identical rows to extract_features on each grid window.
    """
    if size < 1 or stride < 1:
        raise ValueError("size and stride must be >= 1")
    _check_field(img, grad)
    if size > img.width or size > img.height:
        return np.zeros((0, feature_dim(size, size))), []

    def grid(arr):
        view = np.lib.stride_tricks.sliding_window_view(arr, (size, size))
        return view[::stride, ::stride]

    raw = grid(img.pixels)
    ny, nx = raw.shape[:2]
    nwin = ny * nx
    raw = raw.reshape(nwin, size * size)
    pix = raw.astype(np.float64) / 255.0
    ids = raw.astype(np.int64) + HISTOGRAM_BINS * np.arange(nwin)[:, None]
    hist = np.bincount(
        ids.ravel(), minlength=HISTOGRAM_BINS * nwin
    ).reshape(nwin, HISTOGRAM_BINS) / float(size * size)
    mag = grid(grad.magnitude).reshape(nwin, size * size)
    direc = grid(grad.direction).reshape(nwin, size * size)
    matrix = np.concatenate([pix, hist, mag, direc], axis=1)
    rects = [
        Rect(ix * stride, iy * stride, size, size)
        for iy in range(ny)
        for ix in range(nx)
    ]
    return matrix, rects
