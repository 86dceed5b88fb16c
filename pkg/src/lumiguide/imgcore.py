"""Image tensors, Gaussian kernels, and mirror-padded 2D convolution.

Conventions shared across the package:

* color images are ``(H, W, 3)`` float64 arrays holding linear-light values,
* single-channel maps are ``(H, W)`` float64 arrays,
* kernels are odd-sized square float64 arrays (Gaussian ones sum to one).

Boundary handling is mirror padding without edge repetition, i.e. the
extension ``d c b | a b c d | c b a``, continued periodically when the kernel
radius exceeds the image size. Every convolution entry point has an exact
adjoint under the Euclidean inner product, so gradient code can backpropagate
through the padding without approximation.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ParameterError, ShapeError


def as_image(arr, channels: int | None = None) -> np.ndarray:
    """Validate an array as an image tensor and return it as float64.

    Accepts ``(H, W)`` maps and ``(H, W, C)`` tensors with C in {1, 3}. Raises
    :class:`ShapeError` for anything else and :class:`ParameterError` when the
    data contains NaN or infinities.
    """
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        c = 1
    elif a.ndim == 3 and a.shape[2] in (1, 3):
        c = a.shape[2]
    else:
        raise ShapeError(
            f"expected (H, W) or (H, W, C) with C in {{1, 3}}, got shape {a.shape}"
        )
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"image dimensions must be positive, got shape {a.shape}")
    if channels is not None and c != channels:
        raise ShapeError(f"expected {channels} channel(s), got {c}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("image contains non-finite values")
    return a


@lru_cache(maxsize=256)
def _mirror_indices_cached(n: int, radius: int) -> np.ndarray:
    positions = np.arange(-radius, n + radius)
    if n == 1:
        idx = np.zeros_like(positions)
    else:
        period = 2 * n - 2
        m = np.abs(positions) % period
        idx = np.where(m >= n, period - m, m)
    idx.setflags(write=False)
    return idx


def mirror_indices(n: int, radius: int) -> np.ndarray:
    """Source index for each position of a length-``n`` axis padded by ``radius``.

    Index ``-1`` maps to ``1``, ``-2`` to ``2`` and so on (no edge repeat); the
    reflection continues with period ``2n - 2`` for radii larger than the axis.
    """
    if n < 1:
        raise ParameterError(f"axis length must be positive, got {n}")
    if radius < 0:
        raise ParameterError(f"pad radius must be non-negative, got {radius}")
    return _mirror_indices_cached(int(n), int(radius))


def reflect_pad(img: np.ndarray, radius: int) -> np.ndarray:
    """Mirror-pad the two leading (spatial) axes by ``radius`` pixels."""
    a = np.asarray(img, dtype=np.float64)
    rows = mirror_indices(a.shape[0], radius)
    cols = mirror_indices(a.shape[1], radius)
    return a[np.ix_(rows, cols)]


def reflect_pad_adjoint(padded: np.ndarray, radius: int) -> np.ndarray:
    """Adjoint of :func:`reflect_pad`: fold padded values back to their sources."""
    p = np.asarray(padded, dtype=np.float64)
    h = p.shape[0] - 2 * radius
    w = p.shape[1] - 2 * radius
    if h < 1 or w < 1:
        raise ShapeError(
            f"padded shape {p.shape} too small for radius {radius}"
        )
    rows = mirror_indices(h, radius)
    cols = mirror_indices(w, radius)
    folded = np.zeros((h,) + p.shape[1:], dtype=np.float64)
    np.add.at(folded, rows, p)
    out_t = np.zeros((w, h) + p.shape[2:], dtype=np.float64)
    np.add.at(out_t, cols, np.swapaxes(folded, 0, 1))
    return np.swapaxes(out_t, 0, 1)


def _gaussian_radius(sigma: float, radius: int | None) -> int:
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if radius is None:
        radius = math.ceil(3.0 * sigma)
    radius = int(radius)
    if radius < 1:
        raise ParameterError(f"kernel radius must be >= 1, got {radius}")
    return radius


@lru_cache(maxsize=256)
def _gaussian_taps_1d_cached(sigma: float, radius: int) -> np.ndarray:
    g = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(g * g) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    taps.setflags(write=False)
    return taps


def gaussian_taps_1d(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalized 1D Gaussian taps; default radius is ``ceil(3 sigma)``."""
    return _gaussian_taps_1d_cached(float(sigma), _gaussian_radius(sigma, radius))


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalized, truncated 2D Gaussian kernel.

    Tap (i, j) on the centered grid is proportional to
    ``exp(-(i^2 + j^2) / (2 sigma^2))``; the taps are renormalized to sum to
    one exactly, which keeps convolution mean-preserving after truncation.
    """
    r = _gaussian_radius(sigma, radius)
    g = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-(g[:, None] ** 2 + g[None, :] ** 2) / (2.0 * float(sigma) ** 2))
    return taps / taps.sum()


def _validate_kernel(kernel) -> tuple[np.ndarray, int]:
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise ShapeError(f"kernel must be odd-sized and square, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ParameterError("kernel contains non-finite values")
    return k, (k.shape[0] - 1) // 2


def convolve2d(img: np.ndarray, kernel) -> np.ndarray:
    """Per-channel 2D convolution with mirror boundary, same output size."""
    a = as_image(img)
    k, r = _validate_kernel(kernel)
    h, w = a.shape[:2]
    xp = reflect_pad(a, r)
    out = np.zeros_like(a)
    for ta in range(2 * r + 1):
        row = xp[2 * r - ta : 2 * r - ta + h]
        for tb in range(2 * r + 1):
            weight = k[ta, tb]
            if weight != 0.0:
                out += weight * row[:, 2 * r - tb : 2 * r - tb + w]
    return out


def convolve2d_adjoint(cotangent: np.ndarray, kernel) -> np.ndarray:
    """Exact adjoint of :func:`convolve2d` in its image argument.

    Satisfies ``<convolve2d(x, k), y> == <x, convolve2d_adjoint(y, k)>`` up to
    rounding, for any kernel and image shape.
    """
    u = as_image(cotangent)
    k, r = _validate_kernel(kernel)
    h, w = u.shape[:2]
    gxp = np.zeros((h + 2 * r, w + 2 * r) + u.shape[2:], dtype=np.float64)
    for ta in range(2 * r + 1):
        for tb in range(2 * r + 1):
            weight = k[ta, tb]
            if weight != 0.0:
                gxp[2 * r - ta : 2 * r - ta + h, 2 * r - tb : 2 * r - tb + w] += (
                    weight * u
                )
    return reflect_pad_adjoint(gxp, r)


def _correlate_axis0(a: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    r = (taps.shape[0] - 1) // 2
    xp = a[mirror_indices(n, r)]
    out = np.zeros_like(a)
    for t in range(taps.shape[0]):
        weight = taps[t]
        if weight != 0.0:
            out += weight * xp[t : t + n]
    return out


def _correlate_axis0_adjoint(u: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    r = (taps.shape[0] - 1) // 2
    zp = np.zeros((n + 2 * r,) + u.shape[1:], dtype=np.float64)
    for t in range(taps.shape[0]):
        weight = taps[t]
        if weight != 0.0:
            zp[t : t + n] += weight * u
    out = np.zeros_like(u)
    np.add.at(out, mirror_indices(n, r), zp)
    return out


def gaussian_blur(img: np.ndarray, sigma: float, radius: int | None = None) -> np.ndarray:
    """Separable Gaussian smoothing, equal to ``convolve2d(img, gaussian_kernel(sigma))``.

    The normalized 2D kernel factors exactly into the outer product of the
    normalized 1D taps, so two 1D passes reproduce the 2D result at a fraction
    of the cost. This is the hot path of the guidance energy.
    """
    taps = gaussian_taps_1d(sigma, radius)
    a = np.asarray(img, dtype=np.float64)
    out = _correlate_axis0(a, taps)
    out = np.swapaxes(_correlate_axis0(np.swapaxes(out, 0, 1), taps), 0, 1)
    return out


def gaussian_blur_adjoint(
    cotangent: np.ndarray, sigma: float, radius: int | None = None
) -> np.ndarray:
    """Exact adjoint of :func:`gaussian_blur` (mirror padding included)."""
    taps = gaussian_taps_1d(sigma, radius)
    u = np.asarray(cotangent, dtype=np.float64)
    out = np.swapaxes(_correlate_axis0_adjoint(np.swapaxes(u, 0, 1), taps), 0, 1)
    return _correlate_axis0_adjoint(out, taps)


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB between two equally shaped arrays."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
