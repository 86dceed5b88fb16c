"""Shared scene and dataset fixtures for the test suite."""

import numpy as np
import pytest

from lumiguide import scenegen


@pytest.fixture(scope="session")
def sphere_scene():
    """A single centered sphere on a neutral background, 32x32."""
    return scenegen.SceneSpec(
        background_albedo=(0.5, 0.5, 0.5),
        objects=(scenegen.Sphere(center=(16.0, 16.0), radius=10.0, albedo=(0.7, 0.4, 0.3)),),
        resolution=(32, 32),
    )


@pytest.fixture(scope="session")
def grid_dataset():
    """8 random scenes rendered under all 8 ring lights (64 images).

    Every scene appears under every light, so relighting targets exist
    inside the dataset.
    """
    rng = np.random.default_rng(11)
    scenes = [scenegen.random_sphere_scene(rng) for _ in range(8)]
    lights = scenegen.light_ring(8)
    images = [scenegen.render(s, l).image for s in scenes for l in lights]
    return scenes, lights, images
