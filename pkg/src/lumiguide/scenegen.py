"""Procedural Lambertian scenes with ground-truth reflectance and shading.

The renderer uses an orthographic camera: pixel (row, col) sits at x = col
(rightward), y = row (downward), z toward the viewer. Shading is Lambert's
cosine law plus a constant ambient term, evaluated against per-pixel surface
normals, so every render satisfies ``image == reflectance * shading``
exactly by construction. Reflectance is the per-channel albedo of the
frontmost object; uncovered pixels get the background albedo and a
view-facing normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_ALBEDO_TOL = 1e-12


def unit(v) -> tuple[float, float, float]:
    """Normalize a 3-vector to unit length."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ParameterError(f"expected a 3-vector, got shape {a.shape}")
    n = float(np.linalg.norm(a))
    if n == 0.0:
        raise ParameterError("cannot normalize the zero vector")
    return tuple(a / n)


def _check_albedo(albedo, what: str) -> tuple[float, float, float]:
    a = np.asarray(albedo, dtype=np.float64)
    if a.shape != (3,):
        raise ParameterError(f"{what} must be an RGB triple, got shape {a.shape}")
    if np.any(a < -_ALBEDO_TOL) or np.any(a > 1.0 + _ALBEDO_TOL):
        raise ParameterError(f"{what} must lie in [0, 1], got {a.tolist()}")
    return tuple(np.clip(a, 0.0, 1.0))


@dataclass(frozen=True)
class Sphere:
    """Sphere of given pixel radius centered at (row, col), bulging toward the viewer."""

    center: tuple[float, float]
    radius: float
    albedo: tuple[float, float, float]

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "albedo", _check_albedo(self.albedo, "sphere albedo"))


@dataclass(frozen=True)
class HalfPlane:
    """Flat, view-facing region covering pixels with ``normal . (row, col) >= offset``."""

    normal: tuple[float, float]
    offset: float
    albedo: tuple[float, float, float]

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (2,) or np.allclose(n, 0.0):
            raise ParameterError("half-plane normal must be a non-zero 2-vector")
        object.__setattr__(
            self, "albedo", _check_albedo(self.albedo, "half-plane albedo")
        )


@dataclass(frozen=True)
class SceneSpec:
    """Background albedo plus a z-ordered list of objects at a fixed resolution."""

    background_albedo: tuple[float, float, float]
    objects: tuple
    resolution: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(
            self,
            "background_albedo",
            _check_albedo(self.background_albedo, "background albedo"),
        )
        object.__setattr__(self, "objects", tuple(self.objects))
        h, w = self.resolution
        if h < 1 or w < 1:
            raise ParameterError(f"resolution must be positive, got {self.resolution}")


@dataclass(frozen=True)
class DirectionalLight:
    """Distant light: unit direction toward the source, plus a constant ambient floor.

    ``intensity + ambient <= 1`` keeps rendered values inside [0, 1].
    """

    direction: tuple[float, float, float]
    intensity: float
    ambient: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if d.shape != (3,):
            raise ParameterError("light direction must be a 3-vector")
        if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
            raise ParameterError("light direction must be unit length (within 1e-9)")
        if self.intensity <= 0:
            raise ParameterError(f"intensity must be positive, got {self.intensity}")
        if self.ambient < 0:
            raise ParameterError(f"ambient must be non-negative, got {self.ambient}")
        if self.intensity + self.ambient > 1.0 + 1e-12:
            raise ParameterError("intensity + ambient must not exceed 1")
        object.__setattr__(self, "direction", tuple(d))


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """A render with its intrinsic ground truth: image = reflectance * shading."""

    image: np.ndarray       # (H, W, 3)
    reflectance: np.ndarray  # (H, W, 3)
    shading: np.ndarray      # (H, W)
    normals: np.ndarray      # (H, W, 3), unit vectors


def render(spec: SceneSpec, light: DirectionalLight) -> RenderOutput:
    """Render a scene under a directional light.

    Per pixel the frontmost object (largest z; earlier objects win ties)
    supplies albedo and normal; shading is
    ``intensity * max(0, n . l) + ambient``.
    """
    h, w = spec.resolution
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]

    albedo = np.empty((h, w, 3), dtype=np.float64)
    albedo[:] = spec.background_albedo
    normals = np.zeros((h, w, 3), dtype=np.float64)
    normals[..., 2] = 1.0
    zbuf = np.full((h, w), -np.inf)

    for obj in spec.objects:
        if isinstance(obj, Sphere):
            dr = rows - obj.center[0]
            dc = cols - obj.center[1]
            rr = dr * dr + dc * dc
            mask = rr <= obj.radius * obj.radius
            dz = np.sqrt(np.clip(obj.radius * obj.radius - rr, 0.0, None))
            sel = mask & (dz > zbuf)
            n = np.stack(
                [
                    np.broadcast_to(dc, (h, w)),
                    np.broadcast_to(dr, (h, w)),
                    dz,
                ],
                axis=-1,
            ) / obj.radius
            normals[sel] = n[sel]
            zbuf[sel] = dz[sel]
        elif isinstance(obj, HalfPlane):
            side = obj.normal[0] * rows + obj.normal[1] * cols
            mask = np.broadcast_to(side >= obj.offset, (h, w))
            sel = mask & (0.0 > zbuf)
            normals[sel] = (0.0, 0.0, 1.0)
            zbuf[sel] = 0.0
        else:
            raise ParameterError(f"unsupported object type {type(obj).__name__}")
        albedo[sel] = obj.albedo

    ndotl = normals @ np.asarray(light.direction)
    shading = light.intensity * np.clip(ndotl, 0.0, None) + light.ambient
    image = albedo * shading[:, :, None]
    return RenderOutput(image=image, reflectance=albedo, shading=shading, normals=normals)


def light_ring(
    count: int = 8,
    z: float = 0.5,
    intensity: float = 0.8,
    ambient: float = 0.2,
) -> list[DirectionalLight]:
    """Evenly spaced azimuthal light directions with a common elevation ``z``."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if not 0.0 <= z < 1.0:
        raise ParameterError(f"elevation z must lie in [0, 1), got {z}")
    s = math.sqrt(1.0 - z * z)
    lights = []
    for k in range(count):
        az = 2.0 * math.pi * k / count
        direction = unit((s * math.cos(az), s * math.sin(az), z))
        lights.append(DirectionalLight(direction=direction, intensity=intensity, ambient=ambient))
    return lights


def random_sphere_scene(rng: np.random.Generator, resolution=(32, 32)) -> SceneSpec:
    """One or two random spheres over a random background albedo."""
    h, w = resolution
    background = tuple(rng.uniform(0.15, 0.9, size=3))
    n_spheres = int(rng.integers(1, 3))
    spheres = []
    for _ in range(n_spheres):
        center = (rng.uniform(0.25 * h, 0.75 * h), rng.uniform(0.25 * w, 0.75 * w))
        radius = rng.uniform(min(h, w) / 5.0, min(h, w) / 3.0)
        albedo = tuple(rng.uniform(0.1, 0.95, size=3))
        spheres.append(Sphere(center=center, radius=radius, albedo=albedo))
    return SceneSpec(
        background_albedo=background, objects=tuple(spheres), resolution=(h, w)
    )


def make_dataset(seed: int, count: int, spec_template, lights) -> list[np.ndarray]:
    """Render a deterministic image list for a seed.

    ``spec_template`` is either a fixed :class:`SceneSpec` or a callable
    ``rng -> SceneSpec`` drawing per-image scene variations. Lights are
    assigned round-robin: image ``i`` uses ``lights[i % len(lights)]``.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    lights = list(lights)
    if not lights:
        raise ParameterError("at least one light is required")
    rng = np.random.default_rng(seed)
    images = []
    for i in range(count):
        spec = spec_template(rng) if callable(spec_template) else spec_template
        images.append(render(spec, lights[i % len(lights)]).image)
    return images
