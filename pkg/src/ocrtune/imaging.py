"""Binarization, smoothing and morphological operators on 8-bit rasters.

Every operator is a pure function ``Raster -> Raster`` (the automatic
thresholds additionally return the threshold they picked).  Border codes
follow the usual convention::

    0 constant (zero padding)     1 replicate      2 reflect (edge duplicated)
    3 reflect without duplicating the edge pixel   4 isolated (no padding)

Under ``isolated`` the window is clipped to the image and any normalising
constant is recomputed from the pixels that remain.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .raster import Raster, round_half_away


class InvalidParameter(ValueError):
    """An operator argument lies outside its admissible domain."""


BORDER_CONSTANT = 0
BORDER_REPLICATE = 1
BORDER_REFLECT = 2
BORDER_REFLECT_101 = 3
BORDER_ISOLATED = 4

_NP_PAD_MODE = {
    BORDER_CONSTANT: "constant",
    BORDER_REPLICATE: "edge",
    BORDER_REFLECT: "symmetric",
    BORDER_REFLECT_101: "reflect",
}

THRESH_BINARY = 0
THRESH_BINARY_INV = 1
THRESH_TRUNC = 2
THRESH_TOZERO = 3
THRESH_TOZERO_INV = 4


def _check_border(border_type):
    if border_type not in (0, 1, 2, 3, 4):
        raise InvalidParameter(f"borderType must be one of 0..4, got {border_type!r}")


def _check_odd(name, value, minimum=1):
    if int(value) != value or value < minimum or value % 2 == 0:
        raise InvalidParameter(f"{name} must be an odd integer >= {minimum}, got {value!r}")


def _check_byte(name, value):
    if int(value) != value or not 0 <= value <= 255:
        raise InvalidParameter(f"{name} must be an integer in [0, 255], got {value!r}")


def anchor_of(size: int) -> int:
    """Window anchor for a kernel of ``size``: the centre, ``size // 2``."""
    return size // 2


def _pad(arr, before, after, border_type, fill):
    """Pad both axes; ``fill`` stands in for missing pixels under isolated mode."""
    pad = ((before, after), (before, after))
    if border_type == BORDER_ISOLATED:
        return np.pad(arr, pad, mode="constant", constant_values=fill)
    return np.pad(arr, pad, mode=_NP_PAD_MODE[border_type])


def _window_reduce(padded, size, reduce):
    """Separable ``size x size`` window reduction of an already padded array."""
    rows = reduce(sliding_window_view(padded, size, axis=1), axis=-1)
    return reduce(sliding_window_view(rows, size, axis=0), axis=-1)


def _window_weighted(padded, weights):
    """Separable correlation with a symmetric 1-D kernel on a padded array."""
    k = len(weights)
    rows = sliding_window_view(padded, k, axis=1) @ weights
    return sliding_window_view(rows, k, axis=0) @ weights


def _validity_mask(shape, before, after):
    mask = np.zeros((shape[0] + before + after, shape[1] + before + after))
    mask[before:before + shape[0], before:before + shape[1]] = 1.0
    return mask


# --------------------------------------------------------------------------
# thresholding

def simple_threshold(r: Raster, thresh: int = 127, maxValue: int = 255, type: int = 0) -> Raster:
    _check_byte("thresh", thresh)
    _check_byte("maxValue", maxValue)
    return Raster(_apply_threshold(r.pixels, thresh, maxValue, type))


def _apply_threshold(px, thresh, max_value, kind):
    above = px > thresh
    if kind == THRESH_BINARY:
        out = np.where(above, max_value, 0)
    elif kind == THRESH_BINARY_INV:
        out = np.where(above, 0, max_value)
    elif kind == THRESH_TRUNC:
        out = np.where(above, thresh, px)
    elif kind == THRESH_TOZERO:
        out = np.where(above, px, 0)
    elif kind == THRESH_TOZERO_INV:
        out = np.where(above, 0, px)
    else:
        raise InvalidParameter(f"threshold type must be one of 0..4, got {kind!r}")
    return out.astype(np.uint8)


def otsu_level(px: np.ndarray) -> int:
    """Threshold maximising the between-class variance, smallest on ties.

    Pixels ``<= t`` form the lower class.  The criterion
    ``w0 * w1 * (mu0 - mu1)**2`` is proportional to
    ``(N * S0 - n0 * S)**2 / (n0 * n1)`` and is compared in exact integers.
    """
    hist = np.bincount(px.ravel(), minlength=256).tolist()
    total = sum(hist)
    total_sum = sum(i * h for i, h in enumerate(hist))
    best_t, best_num, best_den = 0, 0, 1
    n0 = s0 = 0
    for t in range(256):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (total * s0 - n0 * total_sum) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_threshold(r: Raster, maxValue: int = 255, type: int = 0) -> tuple[Raster, int]:
    _check_byte("maxValue", maxValue)
    t = otsu_level(r.pixels)
    return Raster(_apply_threshold(r.pixels, t, maxValue, type)), t


def triangle_level(px: np.ndarray) -> int:
    """Geometric triangle threshold.

    A chord joins the histogram peak to the non-empty bin farthest from it;
    the chosen bin is the one lying deepest below that chord, nearest the
    peak on ties.  When no bin lies below the chord the peak is returned.
    """
    hist = np.bincount(px.ravel(), minlength=256).tolist()
    nonzero = [i for i, h in enumerate(hist) if h]
    left, right = nonzero[0], nonzero[-1]
    peak = max(range(256), key=lambda i: (hist[i], -i))
    far = left if peak - left > right - peak else right
    if far == peak:
        return peak
    step = 1 if far > peak else -1
    span = abs(far - peak)
    hp, hf = hist[peak], hist[far]
    best, best_depth = peak, 0
    for i in range(peak, far + step, step):
        # (chord height - histogram height) * span, exact in integers
        depth = hp * span + (hf - hp) * abs(i - peak) - hist[i] * span
        if depth > best_depth:
            best, best_depth = i, depth
    return best


def triangle_threshold(r: Raster, maxValue: int = 255, type: int = 0) -> tuple[Raster, int]:
    _check_byte("maxValue", maxValue)
    t = triangle_level(r.pixels)
    return Raster(_apply_threshold(r.pixels, t, maxValue, type)), t


def adaptive_threshold(r: Raster, maxValue: int = 255, adaptiveMethod: int = 0,
                       thresholdType: int = 0, blockSize: int = 11, c: int = 2) -> Raster:
    _check_byte("maxValue", maxValue)
    _check_odd("blockSize", blockSize, minimum=3)
    if adaptiveMethod not in (0, 1):
        raise InvalidParameter(f"adaptiveMethod must be 0 or 1, got {adaptiveMethod!r}")
    if thresholdType not in (0, 1):
        raise InvalidParameter(f"thresholdType must be 0 or 1, got {thresholdType!r}")
    px = r.pixels.astype(np.int64)
    half = blockSize // 2
    padded = _pad(px, half, half, BORDER_REPLICATE, 0)
    if adaptiveMethod == 0:
        sums = _window_reduce(padded, blockSize, np.sum)
        n = blockSize * blockSize
        above = px * n > sums - c * n
    else:
        w = np.asarray(gaussian_kernel(blockSize))
        level = np.round(_window_weighted(padded.astype(np.float64), w), 9) - c
        above = px > level
    if thresholdType == 1:
        above = ~above
    return Raster(np.where(above, maxValue, 0).astype(np.uint8))


# --------------------------------------------------------------------------
# smoothing

def gaussian_kernel(ksize: int) -> list[float]:
    """Normalised 1-D Gaussian weights with ``sigma = 0.3*((ksize-1)*0.5 - 1) + 0.8``."""
    _check_odd("ksize", ksize)
    sigma = 0.3 * ((ksize - 1) * 0.5 - 1) + 0.8
    centre = (ksize - 1) // 2
    raw = [math.exp(-((i - centre) ** 2) / (2 * sigma * sigma)) for i in range(ksize)]
    total = math.fsum(raw)
    return [v / total for v in raw]


def box_blur(r: Raster, ksize: int = 5, borderType: int = 3) -> Raster:
    _check_odd("ksize", ksize)
    _check_border(borderType)
    if ksize == 1:
        return r
    half = ksize // 2
    padded = _pad(r.pixels.astype(np.int64), half, half, borderType, 0)
    sums = _window_reduce(padded, ksize, np.sum)
    if borderType == BORDER_ISOLATED:
        mask = _validity_mask(r.pixels.shape, half, half).astype(np.int64)
        counts = _window_reduce(mask, ksize, np.sum)
    else:
        counts = ksize * ksize
    # round(sum / count) with ties away from zero, exactly in integers
    return Raster(((2 * sums + counts) // (2 * counts)).astype(np.uint8))


def gaussian_blur(r: Raster, ksize: int = 5, borderType: int = 3) -> Raster:
    w = np.asarray(gaussian_kernel(ksize))
    _check_border(borderType)
    if ksize == 1:
        return r
    half = ksize // 2
    padded = _pad(r.pixels.astype(np.float64), half, half, borderType, 0.0)
    acc = _window_weighted(padded, w)
    if borderType == BORDER_ISOLATED:
        acc = acc / _window_weighted(_validity_mask(r.pixels.shape, half, half), w)
    return Raster(round_half_away(acc))


def median_blur(r: Raster, ksize: int = 5) -> Raster:
    _check_odd("ksize", ksize)
    if ksize == 1:
        return r
    half = ksize // 2
    padded = np.pad(r.pixels, half, mode="edge")
    windows = sliding_window_view(padded, (ksize, ksize)).reshape(r.height, r.width, -1)
    mid = ksize * ksize // 2
    return Raster(np.partition(windows, mid, axis=-1)[..., mid])


def bilateral_offsets(d: int) -> list[tuple[int, int]]:
    """Offsets ``(dy, dx)`` inside the disc of radius ``d // 2``."""
    radius = d // 2
    return [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
            if dy * dy + dx * dx <= radius * radius]


def bilateral_filter(r: Raster, d: int = 9, sigmaColor: float = 75, sigmaSpace: float = 75) -> Raster:
    if int(d) != d or d < 1:
        raise InvalidParameter(f"d must be a positive integer, got {d!r}")
    if not (sigmaColor > 0 and sigmaSpace > 0):
        raise InvalidParameter("sigmaColor and sigmaSpace must be positive")
    radius = d // 2
    if radius == 0:
        return r
    px = r.pixels.astype(np.float64)
    padded = np.pad(px, radius, mode="edge")
    h, w = px.shape
    num = np.zeros_like(px)
    den = np.zeros_like(px)
    for dy, dx in bilateral_offsets(d):
        q = padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w]
        wt = np.exp(-(dy * dy + dx * dx) / (2.0 * sigmaSpace ** 2)
                    - (px - q) ** 2 / (2.0 * sigmaColor ** 2))
        num += wt * q
        den += wt
    return Raster(round_half_away(num / den))


# --------------------------------------------------------------------------
# morphology

def _morph(px, kernel, iterations, border_type, reduce, fill, reflected=False):
    if int(kernel) != kernel or kernel < 1:
        raise InvalidParameter(f"kernel must be a positive integer, got {kernel!r}")
    if int(iterations) != iterations or iterations < 1:
        raise InvalidParameter(f"iterations must be a positive integer, got {iterations!r}")
    _check_border(border_type)
    if kernel == 1:
        return px
    before = anchor_of(kernel)
    after = kernel - 1 - before
    if reflected:
        # dilation visits the footprint mirrored through the anchor
        before, after = after, before
    out = px.astype(np.int16)
    for _ in range(iterations):
        pad = ((before, after), (before, after))
        if border_type == BORDER_ISOLATED:
            padded = np.pad(out, pad, mode="constant", constant_values=fill)
        else:
            padded = np.pad(out, pad, mode=_NP_PAD_MODE[border_type])
        out = _window_reduce(padded, kernel, reduce)
    return out.astype(np.uint8)


def erode(r: Raster, kernel: int = 5, iterations: int = 1, borderType: int = 3) -> Raster:
    """Minimum over a ``kernel x kernel`` all-ones footprint, ``iterations`` times."""
    return Raster(_morph(r.pixels, kernel, iterations, borderType, np.min, 256))


def dilate(r: Raster, kernel: int = 5, iterations: int = 1, borderType: int = 3) -> Raster:
    """Maximum over the footprint mirrored through the anchor, so opening and
    closing stay idempotent for even kernel sizes too."""
    return Raster(_morph(r.pixels, kernel, iterations, borderType, np.max, -1, reflected=True))


MORPH_MODES = ("opening", "closing", "gradient", "tophat", "blackhat")


def _saturating_sub(a: Raster, b: Raster) -> Raster:
    return Raster(np.clip(a.pixels.astype(np.int16) - b.pixels, 0, 255).astype(np.uint8))


def morph_composite(r: Raster, mode: str, kernel: int = 5, iterations: int = 1,
                    borderType: int = 3) -> Raster:
    args = (kernel, iterations, borderType)
    if mode == "opening":
        return dilate(erode(r, *args), *args)
    if mode == "closing":
        return erode(dilate(r, *args), *args)
    if mode == "gradient":
        return _saturating_sub(dilate(r, *args), erode(r, *args))
    if mode == "tophat":
        return _saturating_sub(r, morph_composite(r, "opening", *args))
    if mode == "blackhat":
        return _saturating_sub(morph_composite(r, "closing", *args), r)
    raise InvalidParameter(f"unknown morphology mode {mode!r}; expected one of {MORPH_MODES}")


def invert(r: Raster) -> Raster:
    return Raster(255 - r.pixels)


# --------------------------------------------------------------------------
# registry: uniform ``apply_operator(name, raster, params)`` entry point

def _drop_level(fn):
    def run(r, **kw):
        return fn(r, **kw)[0]
    return run


def _composite(mode):
    def run(r, **kw):
        return morph_composite(r, mode, **kw)
    return run


OPERATORS = {
    "adaptive_threshold": adaptive_threshold,
    "otsu_threshold": _drop_level(otsu_threshold),
    "simple_threshold": simple_threshold,
    "triangle_threshold": _drop_level(triangle_threshold),
    "bilateral_filter": bilateral_filter,
    "gaussian_blur": gaussian_blur,
    "box_blur": box_blur,
    "median_blur": median_blur,
    "black_hat": _composite("blackhat"),
    "closing": _composite("closing"),
    "dilation": dilate,
    "erosion": erode,
    "morph_gradient": _composite("gradient"),
    "opening": _composite("opening"),
    "top_hat": _composite("tophat"),
}


def apply_operator(algorithm: str, r: Raster, params) -> Raster:
    try:
        fn = OPERATORS[algorithm]
    except KeyError:
        raise KeyError(f"unknown algorithm {algorithm!r}") from None
    return fn(r, **dict(params))
