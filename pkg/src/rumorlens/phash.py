"""64-bit DCT perceptual hashing and sliding-window deduplication.

Pipeline for one frame: area-average resize to 32x32, quantise to 64 grey
levels, 32x32 orthonormal DCT-II, keep the top-left 8x8 block, threshold each
coefficient against the mean of all 64 (DC included).  Bit 63 holds
coefficient (0, 0); bits run row-major from there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from rumorlens.exceptions import (
    EmptyMatrix,
    InvalidImage,
    NonFiniteComponent,
    ParseError,
    UnsortedInput,
    ZeroWindow,
)

HASH_BITS = 64
DCT_SIZE = 32
BLOCK = 8
LEVELS = 64
SIMILARITY_THRESHOLD = 8
FRAME_WINDOW = 10
TEXTBOX_WINDOW = 100

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grey-scale raster with intensities in [0, 255], stored as ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidImage(f"expected a non-empty 2-D pixel array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InvalidImage("pixel intensities must be finite")
        if px.min() < 0 or px.max() > 255:
            raise InvalidImage("pixel intensities must lie in [0, 255]")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_flat(cls, width: int, height: int, pixels) -> "GrayImage":
        flat = np.asarray(pixels, dtype=np.float64).reshape(-1)
        if width < 1 or height < 1 or flat.size != width * height:
            raise InvalidImage(f"{flat.size} pixels do not fill a {width}x{height} image")
        return cls(flat.reshape(height, width))

    @classmethod
    def from_rgb(cls, rgb) -> "GrayImage":
        """Convert an ``(h, w, 3)`` RGB array with BT.601 luma weights."""
        arr = np.asarray(rgb, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidImage(f"expected an (h, w, 3) array, got shape {arr.shape}")
        return cls(arr @ np.array([0.299, 0.587, 0.114]))


@dataclass(frozen=True)
class FrameHash:
    hash: int
    index: int
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {"hash": f"{self.hash:016x}", "index": self.index, "timestamp": self.timestamp}


@lru_cache(maxsize=None)
def _dct_basis(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    basis = np.cos(np.pi * (2 * x + 1) * k / (2 * n))
    basis[0] *= math.sqrt(1.0 / n)
    basis[1:] *= math.sqrt(2.0 / n)
    basis.flags.writeable = False
    return basis


def dct2d(block) -> np.ndarray:
    """Orthonormal 2-D DCT-II of a square matrix."""
    X = np.asarray(block, dtype=np.float64)
    if X.size == 0:
        raise EmptyMatrix("cannot transform an empty matrix")
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"dct2d expects a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteComponent("matrix has non-finite entries")
    C = _dct_basis(X.shape[0])
    return C @ X @ C.T


def idct2d(coeffs) -> np.ndarray:
    Y = np.asarray(coeffs, dtype=np.float64)
    if Y.size == 0:
        raise EmptyMatrix("cannot transform an empty matrix")
    C = _dct_basis(Y.shape[0])
    return C.T @ Y @ C


@lru_cache(maxsize=64)
def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    # row i averages input cells over [i*s, (i+1)*s) with fractional overlap
    scale = n_in / n_out
    W = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        for j in range(int(math.floor(lo)), min(n_in, int(math.ceil(hi)))):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                W[i, j] = overlap
        W[i] /= W[i].sum()
    W.flags.writeable = False
    return W


def resize_area(image: GrayImage, size: int = DCT_SIZE) -> np.ndarray:
    """Box-filter resample to ``size x size``; exact identity when already that size."""
    px = image.pixels
    if px.shape == (size, size):
        return px.copy()
    rows = _area_weights(px.shape[0], size)
    cols = _area_weights(px.shape[1], size)
    return np.clip(rows @ px @ cols.T, 0.0, 255.0)


def quantize(pixels) -> np.ndarray:
    """Map [0, 255] onto 64 levels with ``floor(v / 4)``."""
    # rounding first keeps 4.0 - 1e-15 from falling into the lower bucket
    return np.floor(np.round(np.asarray(pixels, dtype=np.float64), 9) / 4.0)


def hash_bits(image: GrayImage) -> np.ndarray:
    """The 8x8 boolean bit matrix behind :func:`phash`."""
    if not isinstance(image, GrayImage):
        image = GrayImage(image)
    coeffs = dct2d(quantize(resize_area(image)))[:BLOCK, :BLOCK]
    return coeffs >= coeffs.mean()


def bits_to_int(bits) -> int:
    value = 0
    for b in np.asarray(bits, dtype=bool).reshape(-1):
        value = (value << 1) | int(b)
    return value


def phash(image) -> int:
    return bits_to_int(hash_bits(image))


def hamming(a: int, b: int) -> int:
    return bin((int(a) ^ int(b)) & _MASK64).count("1")


def is_similar(a: int, b: int, threshold: int = SIMILARITY_THRESHOLD) -> bool:
    return hamming(a, b) < threshold


def dedup_stream(
    hashes: Sequence[FrameHash],
    window: int = FRAME_WINDOW,
    threshold: int = SIMILARITY_THRESHOLD,
) -> list[FrameHash]:
    """Drop frames that look like every one of their trailing neighbours.

    Frame ``i`` is discarded when it is similar to all of the ``min(i, window)``
    frames directly before it in the *original* stream.  The first frame is
    always kept.  Use ``window=10`` for video frames and ``window=100`` for
    text-box crops.
    """
    if window < 1:
        raise ZeroWindow("dedup window must be at least 1")
    hashes = list(hashes)
    for prev, cur in zip(hashes, hashes[1:]):
        if cur.index < prev.index:
            raise UnsortedInput(f"frame {cur.index} follows frame {prev.index}")
    kept = []
    for i, fh in enumerate(hashes):
        preceding = hashes[max(0, i - window):i]
        if preceding and all(is_similar(fh.hash, p.hash, threshold) for p in preceding):
            continue
        kept.append(fh)
    return kept


class PerceptualHasher(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping a sequence of images to 64-bit hashes.

    Images may be :class:`GrayImage` instances or 2-D intensity arrays.  The
    output is a ``uint64`` array.
    """

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return np.array([phash(img) for img in X], dtype=np.uint64)


# -- file formats --------------------------------------------------------


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> GrayImage:
    """Read an 8-bit binary (P5) PGM file."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        tokens, offset = _pgm_tokens(data, 4)
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None
    if tokens[0] != b"P5":
        raise ParseError("not a binary P5 PGM file", path=path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("bad PGM header", path=path) from None
    if not (0 < maxval < 256):
        raise ParseError(f"only 8-bit PGM is supported (maxval {maxval})", path=path)
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=offset) \
        if len(data) - offset >= width * height else None
    if raster is None:
        raise ParseError("PGM raster is truncated", path=path)
    px = raster.astype(np.float64).reshape(height, width)
    if maxval != 255:
        px = px * (255.0 / maxval)
    return GrayImage(px)


def write_pgm(path, image: GrayImage) -> None:
    px = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(px.tobytes())


def read_image_json(path) -> GrayImage:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
            return GrayImage.from_flat(int(obj["width"]), int(obj["height"]), obj["pixels"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidImage):
                raise
            raise ParseError(f"bad image JSON: {exc}", path=path) from None


def load_image(path) -> GrayImage:
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path)
    return read_image_json(path)


def parse_hash(value) -> int:
    """Accept an int or a hex string (with or without ``0x``)."""
    if isinstance(value, bool):
        raise ValueError("hash must be an integer or hex string")
    if isinstance(value, int):
        h = value
    elif isinstance(value, str):
        h = int(value, 16)
    else:
        raise ValueError(f"hash must be an integer or hex string, got {type(value).__name__}")
    if not (0 <= h <= _MASK64):
        raise ValueError(f"hash {value!r} does not fit in 64 bits")
    return h
