"""Enhancement operations for captured drone imagery.

Every operation is pure and deterministic: identical input bytes give
identical output bytes, on any platform. Two conventions hold throughout
and are relied on by the tests:

* rounding is half away from zero (``floor(x + 0.5)`` for x >= 0), and
* every convolution replicates the edge pixels at the borders.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

# Luminance weights applied to (R, G, B), in that order.
GRAY_WEIGHTS = (0.2989, 0.5870, 0.1140)

# Gradient kernels indexed [dy][dx], dy/dx in {-1, 0, 1} row-major.
SOBEL_GX = ((-1, 0, 1), (-2, 0, 2), (-1, 0, 1))
SOBEL_GY = ((-1, -2, -1), (0, 0, 0), (1, 2, 1))
PREWITT_GX = ((-1, 0, 1), (-1, 0, 1), (-1, 0, 1))
PREWITT_GY = ((-1, -1, -1), (0, 0, 0), (1, 1, 1))

# Sector boundaries for gradient direction quantization: tan(22.5deg)
# and tan(67.5deg), pinned as literals so every implementation agrees.
TAN_22_5 = 0.4142135623730951
TAN_67_5 = 2.414213562373095

# Results are sized for a 64-bit unsigned counter.
MAX_BIT_COUNT = 2**64 - 1


class ImagingError(Exception):
    """Base class for imaging failures."""


class Overflow(ImagingError):
    pass


class InvalidWindow(ImagingError):
    pass


class BadKernel(ImagingError):
    pass


class BadParams(ImagingError):
    pass


class TypeMismatch(ImagingError):
    """A gray-only operation was applied to an RGB image (or vice versa).

    ``step`` is the 1-based position of the offending pipeline step, or 0
    when the operation was invoked directly.
    """

    def __init__(self, message: str, step: int = 0):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class RgbImage:
    """Row-major 8-bit RGB raster: 3 bytes per pixel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 3}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RgbImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("expected an (h, w, 3) array")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr.tobytes())

    def to_array(self) -> np.ndarray:
        """Read-only (h, w, 3) uint8 view of the pixel buffer."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )


@dataclass(frozen=True)
class GrayImage:
    """Row-major 8-bit grayscale raster: 1 byte per pixel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {self.width * self.height}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "GrayImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("expected an (h, w) array")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr.tobytes())

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width
        )

    def is_binary(self) -> bool:
        return set(self.pixels) <= {0, 255}


Image = RgbImage | GrayImage


@dataclass(frozen=True)
class Histogram256:
    """Frequency of each gray level, 256 bins."""

    bins: tuple[int, ...]

    def __post_init__(self):
        if len(self.bins) != 256:
            raise ValueError("a histogram has exactly 256 bins")

    def total(self) -> int:
        return sum(self.bins)


def raw_image_bits(width: int, height: int, bpp: int) -> int:
    """Bit count of a raw raster: width x height x bits-per-pixel."""
    if width <= 0 or height <= 0 or bpp <= 0:
        raise ValueError("width, height and bpp must all be positive")
    bits = width * height * bpp
    if bits > MAX_BIT_COUNT:
        raise Overflow(f"{bits} bits exceeds the 64-bit counter range")
    return bits


def rgb_to_gray(img: RgbImage) -> GrayImage:
    """Collapse color to luminance: round(0.2989 R + 0.5870 G + 0.1140 B)."""
    arr = img.to_array().astype(np.float64)
    lum = (
        GRAY_WEIGHTS[0] * arr[..., 0]
        + GRAY_WEIGHTS[1] * arr[..., 1]
        + GRAY_WEIGHTS[2] * arr[..., 2]
    )
    out = np.clip(np.floor(lum + 0.5), 0, 255)
    return GrayImage.from_array(out.astype(np.uint8))


def complement(img: Image) -> Image:
    """Invert every channel value: v -> 255 - v."""
    arr = img.to_array()
    out = (255 - arr.astype(np.int16)).astype(np.uint8)
    if isinstance(img, RgbImage):
        return RgbImage.from_array(out)
    return GrayImage.from_array(out)


def histogram(img: GrayImage) -> Histogram256:
    counts = np.bincount(img.to_array().ravel(), minlength=256)
    return Histogram256(bins=tuple(int(c) for c in counts))


def gray_adjust_lut(low_in: float, high_in: float, gamma: float) -> list[int]:
    """256-entry contrast/gamma map; the per-pixel formula evaluated per level."""
    if not (0.0 <= low_in < high_in <= 1.0):
        raise InvalidWindow(f"need 0 <= low_in < high_in <= 1, got [{low_in}, {high_in}]")
    if gamma <= 0:
        raise InvalidWindow(f"gamma must be positive, got {gamma}")
    span = high_in - low_in
    lut = []
    for v in range(256):
        vn = v / 255.0
        clamped = min(max(vn, low_in), high_in)
        t = ((clamped - low_in) / span) ** gamma
        lut.append(min(255, int(math.floor(255.0 * t + 0.5))))
    return lut


def gray_adjust(img: GrayImage, low_in: float, high_in: float, gamma: float) -> GrayImage:
    """Stretch the [low_in, high_in] input window to full range with a gamma curve."""
    lut = np.asarray(gray_adjust_lut(low_in, high_in, gamma), dtype=np.uint8)
    return GrayImage.from_array(lut[img.to_array()])


def _sliding_windows(arr: np.ndarray, k: int) -> np.ndarray:
    r = k // 2
    padded = np.pad(arr, r, mode="edge")
    return np.lib.stride_tricks.sliding_window_view(padded, (k, k))


def noise_filter(img: GrayImage, kind: str = "median", k: int = 3) -> GrayImage:
    """k x k mean or median smoothing with edge replication at the borders."""
    if k % 2 == 0 or k < 3:
        raise BadKernel(f"window size must be odd and >= 3, got {k}")
    if k > min(img.width, img.height):
        raise BadKernel(f"{k}x{k} window exceeds the {img.width}x{img.height} image")
    windows = _sliding_windows(img.to_array(), k)
    if kind == "median":
        out = np.median(windows, axis=(2, 3)).astype(np.uint8)
    elif kind == "mean":
        # Exact round-half-away-from-zero on the integer sum.
        sums = windows.sum(axis=(2, 3), dtype=np.int64)
        k2 = k * k
        out = ((2 * sums + k2) // (2 * k2)).astype(np.uint8)
    else:
        raise BadKernel(f"unknown filter kind {kind!r}")
    return GrayImage.from_array(out)


def convolve_replicated(arr: np.ndarray, kernel) -> np.ndarray:
    """Correlate a float64 image with a small kernel, replicating borders.

    Taps accumulate in row-major kernel order so results are bit-identical
    to a per-pixel loop doing the same.
    """
    kh = len(kernel)
    kw = len(kernel[0])
    ry, rx = kh // 2, kw // 2
    padded = np.pad(arr.astype(np.float64), ((ry, ry), (rx, rx)), mode="edge")
    h, w = arr.shape
    acc = np.zeros((h, w), dtype=np.float64)
    for dy in range(kh):
        for dx in range(kw):
            acc = acc + kernel[dy][dx] * padded[dy : dy + h, dx : dx + w]
    return acc


def gaussian_kernel(sigma: float) -> list[list[float]]:
    """Normalized 2D Gaussian, radius ceil(3 sigma), built in row-major order."""
    if sigma <= 0:
        raise BadParams(f"sigma must be positive, got {sigma}")
    r = max(1, math.ceil(3.0 * sigma))
    rows = []
    total = 0.0
    for dy in range(-r, r + 1):
        row = []
        for dx in range(-r, r + 1):
            w = math.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
            row.append(w)
            total += w
        rows.append(row)
    return [[w / total for w in row] for row in rows]


def _gradient_int(arr: np.ndarray, kernel) -> np.ndarray:
    padded = np.pad(arr.astype(np.int64), 1, mode="edge")
    h, w = arr.shape
    acc = np.zeros((h, w), dtype=np.int64)
    for dy in range(3):
        for dx in range(3):
            acc += kernel[dy][dx] * padded[dy : dy + h, dx : dx + w]
    return acc


def _threshold_edges(gx_sq_plus_gy_sq: np.ndarray, threshold_frac: float) -> np.ndarray:
    m2 = gx_sq_plus_gy_sq
    mmax2 = int(m2.max())
    if mmax2 == 0:
        return np.zeros(m2.shape, dtype=np.uint8)
    mag = np.sqrt(m2.astype(np.float64))
    thr = threshold_frac * math.sqrt(float(mmax2))
    return np.where(mag >= thr, 255, 0).astype(np.uint8)


def _canny(img: GrayImage, sigma: float, low_frac: float, high_frac: float) -> GrayImage:
    # Smoothing lands back on an 8-bit raster, so the gradient stage is
    # exact integer arithmetic and flat regions cancel to literal zero.
    smoothed_f = convolve_replicated(
        img.to_array().astype(np.float64), gaussian_kernel(sigma)
    )
    smoothed = np.clip(np.floor(smoothed_f + 0.5), 0, 255).astype(np.uint8)
    gx = _gradient_int(smoothed, SOBEL_GX)
    gy = _gradient_int(smoothed, SOBEL_GY)
    m2 = gx * gx + gy * gy
    mmax2 = int(m2.max())
    if mmax2 == 0:
        return GrayImage.from_array(np.zeros(m2.shape, dtype=np.uint8))
    mag = np.sqrt(m2.astype(np.float64))
    mmax = math.sqrt(float(mmax2))

    # Non-maximum suppression: compare against the two neighbors along the
    # quantized gradient direction; beyond the border a neighbor counts as 0.
    ax = np.abs(gx)
    ay = np.abs(gy)
    horiz = ay <= TAN_22_5 * ax
    vert = ay >= TAN_67_5 * ax
    diag_pos = (gx > 0) == (gy > 0)
    p = np.pad(mag, 1, mode="constant", constant_values=0.0)
    n_l, n_r = p[1:-1, :-2], p[1:-1, 2:]
    n_u, n_d = p[:-2, 1:-1], p[2:, 1:-1]
    n_ul, n_dr = p[:-2, :-2], p[2:, 2:]
    n_ur, n_dl = p[:-2, 2:], p[2:, :-2]
    keep = (mag > 0) & (
        (horiz & (mag >= n_l) & (mag >= n_r))
        | (~horiz & vert & (mag >= n_u) & (mag >= n_d))
        | (~horiz & ~vert & diag_pos & (mag >= n_ul) & (mag >= n_dr))
        | (~horiz & ~vert & ~diag_pos & (mag >= n_ur) & (mag >= n_dl))
    )
    nms = np.where(keep, mag, 0.0)

    high = high_frac * mmax
    low = low_frac * mmax
    strong = nms >= high
    weak = nms >= low

    # Hysteresis: flood from strong pixels through weak ones, 8-connected.
    h, w = m2.shape
    visited = strong.copy()
    queue = deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for ny in (y - 1, y, y + 1):
            for nx in (x - 1, x, x + 1):
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    queue.append((ny, nx))
    return GrayImage.from_array(np.where(visited, 255, 0).astype(np.uint8))


def edge_detect(
    img: GrayImage,
    operator: str = "sobel",
    *,
    threshold_frac: float = 0.25,
    sigma: float = 1.4,
    low_frac: float = 0.1,
    high_frac: float = 0.3,
) -> GrayImage:
    """Binary edge map via Sobel, Prewitt or Canny.

    Sobel/Prewitt mark pixels whose gradient magnitude reaches
    ``threshold_frac`` of the image maximum; a flat image maps to all
    zeros. Canny adds Gaussian smoothing, non-maximum suppression and
    two-level hysteresis with thresholds at ``low_frac``/``high_frac``
    of the maximum magnitude.
    """
    if operator in ("sobel", "prewitt"):
        if not (0.0 < threshold_frac <= 1.0):
            raise BadParams(f"threshold_frac must be in (0, 1], got {threshold_frac}")
        gx_k, gy_k = (
            (SOBEL_GX, SOBEL_GY) if operator == "sobel" else (PREWITT_GX, PREWITT_GY)
        )
        arr = img.to_array()
        gx = _gradient_int(arr, gx_k)
        gy = _gradient_int(arr, gy_k)
        return GrayImage.from_array(_threshold_edges(gx * gx + gy * gy, threshold_frac))
    if operator == "canny":
        if sigma <= 0:
            raise BadParams(f"sigma must be positive, got {sigma}")
        if not (0.0 < low_frac < high_frac <= 1.0):
            raise BadParams(
                f"need 0 < low_frac < high_frac <= 1, got {low_frac}/{high_frac}"
            )
        return _canny(img, sigma, low_frac, high_frac)
    raise BadParams(f"unknown edge operator {operator!r}")


def rotate_quarter(img: Image, turns: int) -> Image:
    """Lossless clockwise rotation by 90 degrees x turns."""
    if turns not in (0, 1, 2, 3):
        raise ValueError(f"turns must be 0..3, got {turns}")
    arr = img.to_array()
    out = np.rot90(arr, k=-turns, axes=(0, 1))
    if isinstance(img, RgbImage):
        return RgbImage.from_array(out)
    return GrayImage.from_array(out)
