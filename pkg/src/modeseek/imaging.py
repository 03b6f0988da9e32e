"""RGB images as 5-D feature vectors (x, y, R, G, B), and binary PPM I/O."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import DomainError, FeatureSpaceLayout, Partition, PointSet

IMAGE_LAYOUT = FeatureSpaceLayout((1, 1, 1, 1, 1))
DOMAIN_NAMES = ("x", "y", "r", "g", "b")


class PPMError(ValueError):
    """Malformed or unsupported PPM data. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major 8-bit RGB image; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DomainError(f"expected (height, width, 3) pixels, got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DomainError("image must have at least one pixel")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255) or np.any(px != np.round(px)):
                raise DomainError("channels must be integers in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.pixels, other.pixels)


def image_to_features(img: RasterImage) -> PointSet:
    """Point ``row * width + col`` is ``[col, row, R, G, B]``."""
    rows, cols = np.mgrid[0:img.height, 0:img.width]
    feats = np.column_stack([cols.ravel(), rows.ravel(), img.pixels.reshape(-1, 3)]).astype(np.float64)
    return PointSet(feats, IMAGE_LAYOUT)


def render_segmentation(width: int, height: int, partition: Partition) -> RasterImage:
    """Paint each pixel with the color of its converged mode (rounded half-up)."""
    if partition.n != width * height:
        raise DomainError(f"partition has {partition.n} points, image has {width * height} pixels")
    colors = np.clip(np.floor(partition.modes[:, 2:5] + 0.5), 0, 255).astype(np.uint8)
    return RasterImage(colors.reshape(height, width, 3))


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PPMError("unexpected end of header", start)
    return buf[start:pos], start, pos


def _header_int(buf: bytes, pos: int, name: str) -> tuple[int, int]:
    tok, start, pos = _read_token(buf, pos)
    if not tok.isdigit():
        raise PPMError(f"invalid {name} {tok!r}", start)
    return int(tok), pos


def decode_ppm(buf: bytes) -> RasterImage:
    magic = buf[:2]
    if magic != b"P6":
        if magic[:1] == b"P" and magic[1:2].isdigit():
            raise PPMError(f"unsupported format {magic.decode('ascii', 'replace')}; only binary P6 is read", 0)
        raise PPMError("not a PPM file", 0)
    pos = 2
    width, pos = _header_int(buf, pos, "width")
    height, pos = _header_int(buf, pos, "height")
    maxval_start = pos
    maxval, pos = _header_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise PPMError(f"image dimensions must be positive, got {width}x{height}", maxval_start)
    if maxval != 255:
        raise PPMError(f"maxval must be 255, got {maxval}", maxval_start)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise PPMError("missing whitespace after header", pos)
    pos += 1
    expected = width * height * 3
    actual = len(buf) - pos
    if actual < expected:
        raise PPMError(f"truncated pixel data: expected {expected} bytes, got {actual}", pos)
    pixels = np.frombuffer(buf, dtype=np.uint8, count=expected, offset=pos).reshape(height, width, 3)
    return RasterImage(pixels.copy())


def encode_ppm(img: RasterImage) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def load_ppm(path: str | os.PathLike) -> RasterImage:
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())


def save_ppm(img: RasterImage, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))
