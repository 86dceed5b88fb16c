"""Illumination extraction and target light prompts.

The extractor estimates per-pixel lighting as a weighted combination of
Gaussian blurs of the image at several spatial scales, pooled over the three
color channels. It is linear, which keeps the guidance energy differentiable
in closed form; the matching adjoint lives here as well.

Target lighting is expressed as a mixture of planar Gaussian bumps plus a
constant ambient floor. Bumps are peak-normalized (value 1 at the mean) so a
component's weight reads directly as its brightness contribution, and the
composed map is clamped to [0, 1] to remain a valid illumination map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .imgcore import as_image, gaussian_blur, gaussian_blur_adjoint

DEFAULT_SCALES = (1.0, 4.0, 16.0)


@dataclass(frozen=True)
class RetinexConfig:
    """Scales (sigma, px) and combination weights for illumination extraction.

    Weights default to uniform and are normalized to sum to one at
    construction. With ``channel_average`` (the default) a constant image of
    value c extracts to the constant map c, which keeps extractions on the
    same [0, 1] scale as prompts.
    """

    scales: tuple[float, ...] = DEFAULT_SCALES
    weights: tuple[float, ...] | None = None
    channel_average: bool = True

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if len(scales) < 1:
            raise ParameterError("at least one scale is required")
        if any(s <= 0 for s in scales):
            raise ParameterError(f"scales must be positive, got {scales}")
        if self.weights is None:
            weights = tuple(1.0 / len(scales) for _ in scales)
        else:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(scales):
                raise ParameterError(
                    f"{len(weights)} weights for {len(scales)} scales"
                )
            if any(w < 0 for w in weights):
                raise ParameterError(f"weights must be non-negative, got {weights}")
            total = sum(weights)
            if total <= 0:
                raise ParameterError("weights must not all be zero")
            weights = tuple(w / total for w in weights)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)


def extract_illumination(img: np.ndarray, cfg: RetinexConfig = RetinexConfig()) -> np.ndarray:
    """Estimate the lighting map of a 3-channel image.

    Returns the (H, W) map ``sum_k w_k * G_{sigma_k} * pooled`` where
    ``pooled`` is the channel mean (or channel sum when ``channel_average``
    is off). Blurring the pooled image equals pooling the blurred channels
    because all channels share the same kernels.
    """
    a = as_image(img, channels=3)
    pooled = a.mean(axis=2) if cfg.channel_average else a.sum(axis=2)
    out = np.zeros(pooled.shape, dtype=np.float64)
    for sigma, weight in zip(cfg.scales, cfg.weights):
        out += weight * gaussian_blur(pooled, sigma)
    return out


def extract_illumination_adjoint(
    cotangent: np.ndarray, cfg: RetinexConfig = RetinexConfig()
) -> np.ndarray:
    """Adjoint of :func:`extract_illumination`: map-space cotangent to image space."""
    u = np.asarray(cotangent, dtype=np.float64)
    if u.ndim != 2:
        raise ShapeError(f"expected an (H, W) cotangent, got shape {u.shape}")
    acc = np.zeros(u.shape, dtype=np.float64)
    for sigma, weight in zip(cfg.scales, cfg.weights):
        acc += weight * gaussian_blur_adjoint(u, sigma)
    factor = 1.0 / 3.0 if cfg.channel_average else 1.0
    return np.repeat((factor * acc)[:, :, None], 3, axis=2)


@dataclass(frozen=True)
class GaussianSpot:
    """One light component: weight, mean (row, col) and 2x2 SPD covariance (px^2)."""

    alpha: float
    mu: tuple[float, float]
    sigma: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError(f"component weight must be non-negative, got {self.alpha}")
        mu = tuple(float(x) for x in self.mu)
        if len(mu) != 2:
            raise ParameterError("mu must be a (row, col) pair")
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.shape != (2, 2):
            raise ParameterError(f"sigma must be 2x2, got shape {s.shape}")
        if abs(s[0, 1] - s[1, 0]) > 1e-9 * max(1.0, abs(s).max()):
            raise ParameterError("sigma must be symmetric")
        if np.linalg.det(s) <= 0 or np.trace(s) <= 0:
            raise ParameterError("sigma must be symmetric positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", tuple(tuple(row) for row in s))


@dataclass(frozen=True)
class LightPrompt:
    """Target lighting as a mixture of Gaussian bumps over an ambient floor.

    Component weights must sum to one (within 1e-9).
    """

    components: tuple[GaussianSpot, ...]
    base: float = 0.1

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ParameterError("a prompt needs at least one component")
        total = sum(c.alpha for c in components)
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"component weights must sum to 1, got {total}")
        if self.base < 0:
            raise ParameterError(f"base must be non-negative, got {self.base}")
        object.__setattr__(self, "components", components)


def compose_prompt(prompt: LightPrompt, shape: tuple[int, int]) -> np.ndarray:
    """Evaluate a prompt on an (H, W) pixel grid, clamped to [0, 1].

    Each component contributes ``alpha * exp(-0.5 d^T Sigma^-1 d)`` with
    ``d = (row, col) - mu``; the bump peaks at exactly ``alpha`` at its mean.
    """
    h, w = shape
    if h < 1 or w < 1:
        raise ParameterError(f"shape must be positive, got {shape}")
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    out = np.full((h, w), float(prompt.base))
    for comp in prompt.components:
        (a, b), (_, d) = comp.sigma
        det = a * d - b * b
        inv00, inv01, inv11 = d / det, -b / det, a / det
        dr = rows - comp.mu[0]
        dc = cols - comp.mu[1]
        quad = inv00 * dr * dr + 2.0 * inv01 * dr * dc + inv11 * dc * dc
        out += comp.alpha * np.exp(-0.5 * quad)
    return np.clip(out, 0.0, 1.0)


def prompt_to_json(prompt: LightPrompt) -> dict:
    """Plain-dict form of a prompt, suitable for JSON serialization."""
    return {
        "components": [
            {
                "alpha": c.alpha,
                "mu": list(c.mu),
                "sigma": [list(row) for row in c.sigma],
            }
            for c in prompt.components
        ],
        "base": prompt.base,
    }


def prompt_from_json(obj: dict) -> LightPrompt:
    """Parse the dict form produced by :func:`prompt_to_json`."""
    if not isinstance(obj, dict):
        raise ParameterError("prompt must be a JSON object")
    try:
        components = tuple(
            GaussianSpot(
                alpha=float(c["alpha"]),
                mu=tuple(c["mu"]),
                sigma=tuple(tuple(row) for row in c["sigma"]),
            )
            for c in obj["components"]
        )
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed prompt component: {exc}") from exc
    return LightPrompt(components=components, base=float(obj.get("base", 0.1)))
