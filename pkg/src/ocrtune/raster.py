"""8-bit grayscale rasters and binary PGM (P5) input/output."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MalformedInput(ValueError):
    """Raised when image data or an image file cannot be interpreted."""


@dataclass(frozen=True, eq=False)
class Raster:
    """A grayscale image stored row-major as a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise MalformedInput(f"raster must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
                raise MalformedInput("raster contains non-finite values")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise MalformedInput("pixel values must lie in [0, 255]")
            if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.floor(arr)):
                raise MalformedInput("pixel values must be integers")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_list(cls, width: int, height: int, values) -> Raster:
        values = list(values)
        if len(values) != width * height:
            raise MalformedInput(
                f"expected {width * height} pixels for {width}x{height}, got {len(values)}"
            )
        return cls(np.array(values, dtype=np.int64).reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def tolist(self) -> list[int]:
        return self.pixels.ravel().tolist()

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"Raster({self.width}x{self.height})"


def to_grayscale(rgb) -> Raster:
    """Luma conversion ``0.299 R + 0.587 G + 0.114 B`` of an (H, W, 3) array.

    Also accepts a ``(R, G, B)`` triple of equally shaped 2-D arrays.
    """
    if isinstance(rgb, (tuple, list)) and len(rgb) == 3:
        chans = [np.asarray(c) for c in rgb]
        if any(c.shape != chans[0].shape for c in chans):
            raise MalformedInput("colour channels have mismatched shapes")
        arr = np.stack(chans, axis=-1)
    else:
        arr = np.asarray(rgb)
    if arr.ndim == 1 and arr.shape[0] == 3:
        arr = arr.reshape(1, 1, 3)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise MalformedInput(f"expected an (H, W, 3) array, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise MalformedInput("channel values must lie in [0, 255]")
    arr = arr.astype(np.float64)
    gray = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return Raster(round_half_away(gray))


def round_half_away(values) -> np.ndarray:
    """Round half away from zero and clamp to [0, 255].

    Values are first snapped to 9 decimals so that different summation orders
    of the same weighted mean round identically.
    """
    x = np.round(np.asarray(values, dtype=np.float64), 9)
    out = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedInput("truncated PGM header")
    return data[start:pos], pos


def decode_pgm(data: bytes) -> Raster:
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise MalformedInput(f"not a binary PGM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise MalformedInput(f"bad PGM header field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedInput(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise MalformedInput(f"only maxval 255 is supported, got {maxval}")
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise MalformedInput(
            f"PGM raster truncated: expected {width * height} bytes, got {len(body)}"
        )
    return Raster(np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy())


def encode_pgm(r: Raster) -> bytes:
    header = f"P5\n{r.width} {r.height}\n255\n".encode("ascii")
    return header + r.pixels.tobytes()


def read_pgm(path) -> Raster:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, r: Raster) -> None:
    Path(path).write_bytes(encode_pgm(r))
