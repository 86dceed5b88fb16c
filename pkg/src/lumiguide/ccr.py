"""Cross-color ratios: an illumination-invariant geometry feature.

For a pixel and its neighbor the ratio of cross-channel products, e.g.
``(R1 * G2) / (R2 * G1)``, cancels any shading factor that multiplies all
channels of one pixel equally. Stored in the log domain the three channel
pairs (RG, RB, GB) give an (H, W, 3) map that depends only on reflectance
transitions, which makes it a natural target for geometry-preserving
guidance.

Channel values are floored at zero (diffusion iterates can be negative) and
offset by a small epsilon before the log, so maps stay finite at black
pixels. At the image border the last row/column pairs with itself and the
map is zero there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .imgcore import as_image

_OFFSETS = {"right": 1, "down": 0}

# channel pairs (c1, c2) per output channel: RG, RB, GB
_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class CcrConfig:
    """Channel floor and neighbor choice for cross-color ratios."""

    epsilon: float = 1e-4
    neighbor: str = "right"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.neighbor not in _OFFSETS:
            raise ParameterError(
                f"neighbor must be one of {sorted(_OFFSETS)}, got {self.neighbor!r}"
            )

    @property
    def axis(self) -> int:
        return _OFFSETS[self.neighbor]


def _shift_forward(a: np.ndarray, axis: int) -> np.ndarray:
    """a[p + offset] with the border clamped (last entry pairs with itself)."""
    if axis == 0:
        return np.concatenate([a[1:], a[-1:]], axis=0)
    return np.concatenate([a[:, 1:], a[:, -1:]], axis=1)


def _shift_forward_adjoint(u: np.ndarray, axis: int) -> np.ndarray:
    z = np.zeros_like(u)
    if axis == 0:
        z[1:] = u[:-1]
        z[-1] += u[-1]
    else:
        z[:, 1:] = u[:, :-1]
        z[:, -1] += u[:, -1]
    return z


def extract_ccr(img: np.ndarray, cfg: CcrConfig = CcrConfig()) -> np.ndarray:
    """Log cross-color ratios of a 3-channel image, shape (H, W, 3).

    Output channel k holds
    ``log(c1_p + e) + log(c2_q + e) - log(c1_q + e) - log(c2_p + e)``
    for channel pair (c1, c2) in (RG, RB, GB), pixel p and neighbor q.
    """
    a = as_image(img, channels=3)
    logs = np.log(np.maximum(a, 0.0) + cfg.epsilon)
    diffs = np.stack([logs[..., c1] - logs[..., c2] for c1, c2 in _PAIRS], axis=-1)
    return diffs - _shift_forward(diffs, cfg.axis)


def extract_ccr_adjoint(
    img: np.ndarray, cotangent: np.ndarray, cfg: CcrConfig = CcrConfig()
) -> np.ndarray:
    """Gradient of ``<cotangent, extract_ccr(img)>`` with respect to ``img``.

    Valid for the non-negative images the energy is evaluated on; negative
    channel values sit on the flat side of the zero floor and get gradient 0.
    """
    a = as_image(img, channels=3)
    u = np.asarray(cotangent, dtype=np.float64)
    if u.shape != a.shape:
        raise ParameterError(f"cotangent shape {u.shape} != image shape {a.shape}")
    w = u - _shift_forward_adjoint(u, cfg.axis)
    dlogs = np.zeros_like(a)
    dlogs[..., 0] = w[..., 0] + w[..., 1]
    dlogs[..., 1] = -w[..., 0] + w[..., 2]
    dlogs[..., 2] = -w[..., 1] - w[..., 2]
    slope = np.where(a >= 0.0, 1.0 / (np.maximum(a, 0.0) + cfg.epsilon), 0.0)
    return dlogs * slope
