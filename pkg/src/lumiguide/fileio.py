"""PPM (P6, 8-bit) and PFM (32-bit float) image files.

PPM carries display images: bytes pass through the sRGB transfer function on
load/save so in-memory data is always linear light. PFM carries linear maps
verbatim as little-endian float32 with the bottom-to-top row order of the
format; the round trip is bit exact for float32-representable data.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError
from .imgcore import as_image

_WHITESPACE = b" \t\n\r\x0b\x0c"


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    """Map sRGB-encoded values in [0, 1] to linear light (exact curve)."""
    u = np.asarray(encoded, dtype=np.float64)
    return np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Map linear-light values in [0, 1] to the sRGB transfer curve."""
    v = np.asarray(linear, dtype=np.float64)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1.0 / 2.4) - 0.055)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, token_start, position_after_token), skipping comments."""
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise FormatError("unexpected end of header", offset=n)
    start = pos
    while pos < n and data[pos] not in _WHITESPACE:
        pos += 1
    return data[start:pos], start, pos


def _int_token(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, start, pos = _next_token(data, pos)
    try:
        value = int(token)
    except ValueError:
        raise FormatError(f"expected integer {what}, got {token!r}", offset=start)
    if value <= 0:
        raise FormatError(f"{what} must be positive, got {value}", offset=start)
    return value, pos


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 PPM into an (H, W, 3) linear-light float64 array."""
    data = Path(path).read_bytes()
    magic, start, pos = _next_token(data, 0)
    if magic != b"P6":
        raise FormatError(f"unsupported magic {magic!r}, expected P6", offset=start)
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    maxval, pos = _int_token(data, pos, "maxval")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}", offset=pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval", offset=pos)
    pos += 1
    need = width * height * 3
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise FormatError(
            f"truncated payload: expected {need} bytes, got {len(payload)}",
            offset=len(data),
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return srgb_decode(raw.astype(np.float64) / 255.0)


def write_ppm(path, img: np.ndarray) -> None:
    """Write an (H, W, 3) linear image as binary P6 PPM (values clamped to [0, 1])."""
    a = as_image(img, channels=3)
    encoded = srgb_encode(np.clip(a, 0.0, 1.0))
    raw = np.rint(encoded * 255.0).astype(np.uint8)
    h, w = a.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(raw.tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into (H, W) or (H, W, 3) float64, top-to-bottom rows."""
    data = Path(path).read_bytes()
    magic, start, pos = _next_token(data, 0)
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise FormatError(
            f"unsupported magic {magic!r}, expected PF or Pf", offset=start
        )
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    token, tstart, pos = _next_token(data, pos)
    try:
        scale = float(token)
    except ValueError:
        raise FormatError(f"expected scale factor, got {token!r}", offset=tstart)
    if scale == 0.0:
        raise FormatError("scale factor must be non-zero", offset=tstart)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after scale", offset=pos)
    pos += 1
    count = width * height * channels
    need = count * 4
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise FormatError(
            f"truncated payload: expected {need} bytes, got {len(payload)}",
            offset=len(data),
        )
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(payload, dtype=dtype)
    if channels == 3:
        arr = flat.reshape(height, width, 3)
    else:
        arr = flat.reshape(height, width)
    # PFM stores rows bottom-to-top.
    return np.flipud(arr).astype(np.float64)


def write_pfm(path, img: np.ndarray) -> None:
    """Write (H, W) or (H, W, C) data as little-endian PFM (scale -1.0)."""
    a = as_image(img)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    magic = b"PF" if a.ndim == 3 else b"Pf"
    h, w = a.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n-1.0\n" % (w, h))
        f.write(np.flipud(a).astype("<f4").tobytes())


def load_image(path) -> np.ndarray:
    """Load .ppm or .pfm by extension; always returns linear-light float64."""
    suffix = os.path.splitext(str(path))[1].lower()
    if suffix == ".ppm":
        return read_ppm(path)
    if suffix == ".pfm":
        return read_pfm(path)
    raise ParameterError(f"unsupported image extension {suffix!r} (use .ppm or .pfm)")


def save_image(path, img: np.ndarray) -> None:
    """Save to .ppm (8-bit sRGB) or .pfm (float32 linear) by extension."""
    suffix = os.path.splitext(str(path))[1].lower()
    if suffix == ".ppm":
        write_ppm(path, img)
    elif suffix == ".pfm":
        write_pfm(path, img)
    else:
        raise ParameterError(
            f"unsupported image extension {suffix!r} (use .ppm or .pfm)"
        )
