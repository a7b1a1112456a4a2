"""Gray-scale raster images, binary PGM I/O, and derived pixel fields."""

from dataclasses import dataclass

import numpy as np

_WHITESPACE = b" \t\r\n"


class PgmError(ValueError):
    """Byte stream is not a binary PGM we support (magic P5, maxval 255)."""


class OutOfBoundsError(ValueError):
    """A rectangle reaches outside the image it indexes."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel box, half-open: columns [x, x+w), rows [y, y+h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect sides must be >= 1, got {self.w}x{self.h}")

    def corners(self):
        """Corner points as floats, clockwise from top-left."""
        x0, y0 = float(self.x), float(self.y)
        x1, y1 = float(self.x + self.w), float(self.y + self.h)
        return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))

    def edges(self):
        c = self.corners()
        return tuple((c[i], c[(i + 1) % 4]) for i in range(4))


class GrayImage:
    """Immutable 8-bit gray-scale raster; pixels indexed [row, col]."""

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype == np.uint8:
            arr = arr.copy()
        else:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("pixel samples must be integers")
            if int(arr.min()) < 0 or int(arr.max()) > 255:
                raise ValueError("pixel samples must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        self.pixels = arr

    @classmethod
    def from_samples(cls, width, height, samples):
        """Build from a flat row-major sample sequence of length width*height."""
        if width < 1 or height < 1:
            raise ValueError("image must be at least 1x1")
        flat = np.asarray(samples)
        if flat.ndim != 1 or flat.size != width * height:
            raise ValueError(
                f"expected {width * height} samples, got {flat.size}"
            )
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def samples(self) -> np.ndarray:
        """Flat row-major view of the raw 8-bit samples."""
        return self.pixels.ravel()

    def contains(self, roi: Rect) -> bool:
        return (
            roi.x >= 0
            and roi.y >= 0
            and roi.x + roi.w <= self.width
            and roi.y + roi.h <= self.height
        )

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def _require_inside(img: GrayImage, roi: Rect):
    if not img.contains(roi):
        raise OutOfBoundsError(
            f"roi {roi} outside {img.width}x{img.height} image"
        )


def _next_token(buf: bytes, pos: int):
    """Next header token, skipping whitespace and '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            nl = buf.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in _WHITESPACE and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmError("truncated PGM header")
    return buf[start:pos], pos


def _header_int(token: bytes, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise PgmError(f"non-numeric {what} in PGM header: {token!r}") from None


def load_pgm(data: bytes) -> GrayImage:
    """Decode a binary PGM (magic P5, maxval 255) byte stream."""
    buf = bytes(data)
    if buf[:2] != b"P5":
        raise PgmError("not a binary PGM: magic 'P5' missing")
    pos = 2
    tok, pos = _next_token(buf, pos)
    width = _header_int(tok, "width")
    tok, pos = _next_token(buf, pos)
    height = _header_int(tok, "height")
    if width < 1 or height < 1:
        raise PgmError(f"non-positive dimensions {width}x{height}")
    tok, pos = _next_token(buf, pos)
    maxval = _header_int(tok, "maxval")
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval}, only 255 is handled")
    if pos >= len(buf) or buf[pos : pos + 1] not in _WHITESPACE:
        raise PgmError("missing whitespace between maxval and payload")
    payload = buf[pos + 1 : pos + 1 + width * height]
    if len(payload) < width * height:
        raise PgmError(
            f"truncated payload: expected {width * height} bytes, "
            f"got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def save_pgm(img: GrayImage) -> bytes:
    """Encode as canonical binary PGM: 'P5\\n<w> <h>\\n255\\n' + raw samples."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def load_pgm_file(path) -> GrayImage:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def save_pgm_file(path, img: GrayImage):
    with open(path, "wb") as fh:
        fh.write(save_pgm(img))


def normalize(sample: int) -> float:
    """Map an 8-bit sample to unit-interval brightness (sample / 255)."""
    if not 0 <= sample <= 255:
        raise ValueError(f"sample {sample} outside [0, 255]")
    return sample / 255.0


def normalized(img: GrayImage) -> np.ndarray:
    """Whole raster as float64 unit-interval brightness."""
    return img.pixels.astype(np.float64) / 255.0


@dataclass(frozen=True)
class GradientField:
    """Per-pixel gradient magnitude and direction of a brightness raster.

    Directions are atan2(dy, dx) in (-pi, pi], forced to 0 where the
    magnitude is 0.
    """

    magnitude: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        if self.magnitude.shape != self.direction.shape:
            raise ValueError("magnitude/direction shape mismatch")
        self.magnitude.setflags(write=False)
        self.direction.setflags(write=False)

    @property
    def width(self) -> int:
        return self.magnitude.shape[1]

    @property
    def height(self) -> int:
        return self.magnitude.shape[0]


def gradient_field(img: GrayImage) -> GradientField:
    """Central differences on normalized brightness, replicated borders."""
    norm = normalized(img)
    padded = np.pad(norm, 1, mode="edge")
    dx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    dy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    magnitude = np.hypot(dx, dy)
    direction = np.arctan2(dy, dx)
    direction[magnitude == 0.0] = 0.0
    return GradientField(magnitude=magnitude, direction=direction)


def intensity_histogram(img: GrayImage, roi: Rect) -> np.ndarray:
    """256-bin frequency distribution of raw samples inside the ROI."""
    _require_inside(img, roi)
    window = img.pixels[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w]
    counts = np.bincount(window.ravel(), minlength=256)
    return counts / float(roi.w * roi.h)


def crop(img: GrayImage, roi: Rect) -> GrayImage:
    """Copy of the ROI as its own image."""
    _require_inside(img, roi)
    return GrayImage(img.pixels[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w])
