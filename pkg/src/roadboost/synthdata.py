"""Synthetic annotated road scenes: deterministic stand-in training data."""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotation import (
    FrameAnnotation,
    ObjectClass,
    Polygon,
    RoiRelation,
    polygon_is_simple,
    parse_annotation_xml,
    rect_polygon_relation,
    serialize_annotation_xml,
)
from .imaging import GrayImage, Rect, load_pgm_file, save_pgm_file

_CAR_PLACEMENT_ATTEMPTS = 5000

ANNOTATION_FILE = "annotations.xml"


class SceneError(ValueError):
    """Scene parameters cannot be rendered."""


def _default_road_corners(width: int, height: int):
    w, h = float(width), float(height)
    return (
        (0.08 * w, h),
        (0.92 * w, h),
        (0.60 * w, 0.45 * h),
        (0.40 * w, 0.45 * h),
    )


@dataclass(frozen=True)
class SceneParams:
    """Everything needed to render one frame and its ground truth."""

    width: int = 640
    height: int = 480
    road_corners: tuple | None = None  # trapezoid, bottom edge first
    road_brightness: float = 80.0
    background_brightness: float = 165.0
    road_texture: float = 10.0
    background_texture: float = 10.0
    car_count: int = 2
    car_size_range: tuple = (24, 48)
    car_brightness: float = 200.0
    car_texture: float = 6.0
    noise: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SceneError("frame must be at least 1x1")
        if self.road_corners is None:
            object.__setattr__(
                self, "road_corners", _default_road_corners(self.width, self.height)
            )
        for b in (self.road_brightness, self.background_brightness, self.car_brightness):
            if not 0.0 <= b <= 255.0:
                raise SceneError(f"brightness {b} outside [0, 255]")
        poly = Polygon(self.road_corners)
        for x, y in poly.vertices:
            if not (0 <= x <= self.width and 0 <= y <= self.height):
                raise SceneError(f"road vertex ({x}, {y}) outside the frame")
        if not polygon_is_simple(poly):
            raise SceneError("road polygon must be simple")
        if self.car_count < 0:
            raise SceneError("car_count must be >= 0")
        lo, hi = self.car_size_range
        if lo < 1 or hi < lo:
            raise SceneError(f"bad car size range {self.car_size_range}")

    @property
    def road_polygon(self) -> Polygon:
        return Polygon(self.road_corners)


def polygon_fill_mask(polygon: Polygon, width: int, height: int) -> np.ndarray:
    """Even-odd rasterization of the polygon at pixel centers (col+0.5, row+0.5)."""
    mask = np.zeros((height, width), dtype=bool)
    edges = polygon.edges()
    for row in range(height):
        py = row + 0.5
        xs = []
        for (x1, y1), (x2, y2) in edges:
            if (y1 > py) != (y2 > py):
                xs.append(x1 + (py - y1) * (x2 - x1) / (y2 - y1))
        xs.sort()
        for j in range(0, len(xs) - 1, 2):
            lo = max(math.ceil(xs[j] - 0.5), 0)
            hi = min(math.ceil(xs[j + 1] - 0.5), width)
            if hi > lo:
                mask[row, lo:hi] = True
    return mask


def generate_scene(params: SceneParams, frame_id=None, image_ref=None):
    """Render one frame; returns (GrayImage, FrameAnnotation).

    The annotation carries the exact road and car polygons used for
    rendering, so it is pixel-consistent ground truth.
    """
    if frame_id is None:
        frame_id = f"{params.seed:05d}"
    if image_ref is None:
        image_ref = f"frame_{frame_id}.pgm"
    rng = np.random.default_rng(params.seed)
    h, w = params.height, params.width
    road_poly = params.road_polygon

    canvas = np.full((h, w), params.background_brightness, dtype=np.float64)
    canvas += rng.uniform(-params.background_texture, params.background_texture, (h, w))
    road_mask = polygon_fill_mask(road_poly, w, h)
    road_vals = params.road_brightness + rng.uniform(
        -params.road_texture, params.road_texture, (h, w)
    )
    canvas[road_mask] = road_vals[road_mask]

    cars = []
    lo, hi = params.car_size_range
    for _ in range(params.car_count):
        for _ in range(_CAR_PLACEMENT_ATTEMPTS):
            cw = int(rng.integers(lo, hi + 1))
            ch = int(rng.integers(lo, hi + 1))
            if cw > w or ch > h:
                continue
            x = int(rng.integers(0, w - cw + 1))
            y = int(rng.integers(0, h - ch + 1))
            rect = Rect(x, y, cw, ch)
            if rect_polygon_relation(rect, road_poly) is RoiRelation.INSIDE:
                break
        else:
            raise SceneError(
                f"could not place a {lo}-{hi} px car inside the road region"
            )
        canvas[y : y + ch, x : x + cw] = params.car_brightness + rng.uniform(
            -params.car_texture, params.car_texture, (ch, cw)
        )
        cars.append(
            Polygon(((x, y), (x + cw, y), (x + cw, y + ch), (x, y + ch)))
        )

    canvas += rng.uniform(-params.noise, params.noise, (h, w))
    pixels = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
    objects = [(ObjectClass.ROAD, road_poly)]
    objects += [(ObjectClass.CAR, car) for car in cars]
    annotation = FrameAnnotation(frame_id, image_ref, w, h, tuple(objects))
    return GrayImage(pixels), annotation


@dataclass(frozen=True)
class CorpusRanges:
    """Per-frame randomization ranges for corpus generation."""

    width: int = 640
    height: int = 480
    road_brightness: tuple = (85.0, 110.0)
    background_brightness: tuple = (130.0, 160.0)
    road_texture: tuple = (10.0, 16.0)
    background_texture: tuple = (10.0, 16.0)
    car_brightness: tuple = (185.0, 215.0)
    car_texture: tuple = (4.0, 9.0)
    noise: tuple = (5.0, 9.0)
    car_count: tuple = (0, 3)
    car_size: tuple = (24, 48)
    top_y: tuple = (0.35, 0.55)  # fractions of the frame size
    bottom_x0: tuple = (0.02, 0.15)
    bottom_x1: tuple = (0.85, 0.98)
    top_center: tuple = (0.40, 0.60)
    top_halfwidth: tuple = (0.08, 0.16)


def _random_params(rng: np.random.Generator, ranges: CorpusRanges) -> SceneParams:
    w, h = ranges.width, ranges.height

    def pick(bounds):
        return float(rng.uniform(bounds[0], bounds[1]))

    top_y = pick(ranges.top_y) * h
    bx0 = pick(ranges.bottom_x0) * w
    bx1 = pick(ranges.bottom_x1) * w
    center = pick(ranges.top_center) * w
    half = pick(ranges.top_halfwidth) * w
    corners = (
        (bx0, float(h)),
        (bx1, float(h)),
        (min(center + half, w), top_y),
        (max(center - half, 0.0), top_y),
    )
    return SceneParams(
        width=w,
        height=h,
        road_corners=corners,
        road_brightness=pick(ranges.road_brightness),
        background_brightness=pick(ranges.background_brightness),
        road_texture=pick(ranges.road_texture),
        background_texture=pick(ranges.background_texture),
        car_count=int(rng.integers(ranges.car_count[0], ranges.car_count[1] + 1)),
        car_size_range=ranges.car_size,
        car_brightness=pick(ranges.car_brightness),
        car_texture=pick(ranges.car_texture),
        noise=pick(ranges.noise),
        seed=int(rng.integers(0, 2**63)),
    )


def generate_corpus(n_frames: int, master_seed: int, out_dir, ranges=None):
    """Write n_frames PGM files plus one annotation XML; returns the frames.

    Per-frame parameters come from independent streams derived from the
    master seed, so any prefix of the corpus is stable under a fixed seed.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    ranges = ranges or CorpusRanges()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(master_seed).spawn(n_frames)
    frames = []
    annotations = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        params = _random_params(rng, ranges)
        frame_id = f"{i:05d}"
        image_ref = f"frame_{i:05d}.pgm"
        img, ann = generate_scene(params, frame_id=frame_id, image_ref=image_ref)
        save_pgm_file(out / image_ref, img)
        frames.append((ann, img))
        annotations.append(ann)
    with open(out / ANNOTATION_FILE, "w", encoding="ascii") as fh:
        fh.write(serialize_annotation_xml(annotations))
    return frames


def load_corpus(path):
    """Read a corpus directory back as (FrameAnnotation, GrayImage) pairs."""
    root = Path(path)
    xml_path = root / ANNOTATION_FILE
    if not xml_path.is_file():
        raise FileNotFoundError(f"no {ANNOTATION_FILE} in {root}")
    annotations = parse_annotation_xml(xml_path.read_text(encoding="ascii"))
    frames = []
    for ann in annotations:
        img = load_pgm_file(root / ann.image_ref)
        if (img.width, img.height) != (ann.width, ann.height):
            raise ValueError(
                f"{ann.image_ref}: image is {img.width}x{img.height} but the "
                f"annotation says {ann.width}x{ann.height}"
            )
        frames.append((ann, img))
    return frames
