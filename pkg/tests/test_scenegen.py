"""Renderer contracts: Lambert shading, intrinsic factorization, datasets."""

import math

import numpy as np
import pytest

from lumiguide import scenegen
from lumiguide.errors import ParameterError


def axis_light(intensity=0.8, ambient=0.2):
    return scenegen.DirectionalLight(direction=(0.0, 0.0, 1.0), intensity=intensity, ambient=ambient)


class TestRender:
    def test_shading_at_sphere_center_under_axial_light(self, sphere_scene):
        out = scenegen.render(sphere_scene, axis_light())
        assert out.shading[16, 16] == pytest.approx(1.0, abs=1e-12)

    def test_shading_at_rim_is_ambient(self, sphere_scene):
        out = scenegen.render(sphere_scene, axis_light())
        # (16, 26) sits exactly on the silhouette: normal is horizontal
        assert out.shading[16, 26] == pytest.approx(0.2, abs=1e-12)

    def test_off_center_pixel_matches_closed_form_normal(self, sphere_scene):
        light = scenegen.DirectionalLight(
            direction=scenegen.unit((1.0, 0.0, 1.0)), intensity=0.8, ambient=0.2
        )
        out = scenegen.render(sphere_scene, light)
        # analytic normal from the sphere equation at pixel (12, 20)
        dr, dc = 12 - 16.0, 20 - 16.0
        dz = math.sqrt(10.0**2 - dr * dr - dc * dc)
        n = np.array([dc, dr, dz]) / 10.0
        expected = 0.8 * max(0.0, float(n @ light.direction)) + 0.2
        assert out.shading[12, 20] == pytest.approx(expected, abs=1e-12)

    def test_image_factorizes_exactly(self, sphere_scene):
        out = scenegen.render(sphere_scene, axis_light())
        assert np.array_equal(out.image, out.reflectance * out.shading[:, :, None])

    def test_doubling_intensity_doubles_shading_and_image(self, sphere_scene):
        l1 = scenegen.DirectionalLight(direction=scenegen.unit((1.0, 2.0, 2.0)), intensity=0.4, ambient=0.0)
        l2 = scenegen.DirectionalLight(direction=l1.direction, intensity=0.8, ambient=0.0)
        a = scenegen.render(sphere_scene, l1)
        b = scenegen.render(sphere_scene, l2)
        assert np.array_equal(b.shading, 2.0 * a.shading)
        assert np.array_equal(b.image, 2.0 * a.image)
        assert np.array_equal(a.reflectance, b.reflectance)

    def test_normals_are_unit_length(self, sphere_scene):
        out = scenegen.render(sphere_scene, axis_light())
        norms = np.linalg.norm(out.normals, axis=2)
        assert np.abs(norms - 1.0).max() < 1e-9

    def test_background_has_view_facing_normal_and_background_albedo(self, sphere_scene):
        out = scenegen.render(sphere_scene, axis_light())
        assert np.array_equal(out.normals[0, 0], [0.0, 0.0, 1.0])
        assert np.array_equal(out.reflectance[0, 0], [0.5, 0.5, 0.5])

    def test_shading_is_non_negative(self, sphere_scene):
        for light in scenegen.light_ring(8, z=0.1, intensity=0.9, ambient=0.0):
            assert scenegen.render(sphere_scene, light).shading.min() >= 0.0

    def test_half_plane_covers_expected_pixels(self):
        spec = scenegen.SceneSpec(
            background_albedo=(0.2, 0.2, 0.2),
            objects=(scenegen.HalfPlane(normal=(0.0, 1.0), offset=4.0, albedo=(0.9, 0.1, 0.1)),),
            resolution=(8, 8),
        )
        out = scenegen.render(spec, axis_light())
        assert np.array_equal(out.reflectance[0, 4], [0.9, 0.1, 0.1])
        assert np.array_equal(out.reflectance[0, 3], [0.2, 0.2, 0.2])

    def test_sphere_occludes_half_plane(self):
        spec = scenegen.SceneSpec(
            background_albedo=(0.2, 0.2, 0.2),
            objects=(
                scenegen.HalfPlane(normal=(0.0, 1.0), offset=0.0, albedo=(0.9, 0.9, 0.9)),
                scenegen.Sphere(center=(4.0, 4.0), radius=2.0, albedo=(0.1, 0.5, 0.9)),
            ),
            resolution=(9, 9),
        )
        out = scenegen.render(spec, axis_light())
        assert np.array_equal(out.reflectance[4, 4], [0.1, 0.5, 0.9])


class TestValidation:
    def test_albedo_out_of_range(self):
        with pytest.raises(ParameterError):
            scenegen.Sphere(center=(1, 1), radius=2.0, albedo=(1.2, 0.5, 0.5))

    def test_non_positive_radius(self):
        with pytest.raises(ParameterError):
            scenegen.Sphere(center=(1, 1), radius=0.0, albedo=(0.5, 0.5, 0.5))

    def test_non_unit_light_direction(self):
        with pytest.raises(ParameterError):
            scenegen.DirectionalLight(direction=(1.0, 1.0, 1.0), intensity=0.5)

    def test_intensity_plus_ambient_capped(self):
        with pytest.raises(ParameterError):
            scenegen.DirectionalLight(direction=(0.0, 0.0, 1.0), intensity=0.9, ambient=0.2)

    def test_light_ring_is_unit(self):
        for light in scenegen.light_ring(16, z=0.3):
            assert abs(np.linalg.norm(light.direction) - 1.0) < 1e-9


class TestMakeDataset:
    def test_deterministic_for_fixed_seed(self):
        lights = scenegen.light_ring(4)
        a = scenegen.make_dataset(7, 4, scenegen.random_sphere_scene, lights)
        b = scenegen.make_dataset(7, 4, scenegen.random_sphere_scene, lights)
        assert len(a) == len(b) == 4
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_single_image_with_fixed_scene_equals_direct_render(self, sphere_scene):
        lights = [axis_light()]
        images = scenegen.make_dataset(0, 1, sphere_scene, lights)
        assert np.array_equal(images[0], scenegen.render(sphere_scene, lights[0]).image)

    def test_round_robin_light_assignment(self, sphere_scene):
        lights = scenegen.light_ring(8)
        images = scenegen.make_dataset(3, 64, sphere_scene, lights)
        # fixed scene: image i must equal the render under lights[i % 8]
        per_light = [scenegen.render(sphere_scene, l).image for l in lights]
        counts = [0] * 8
        for i, img in enumerate(images):
            assert np.array_equal(img, per_light[i % 8])
            counts[i % 8] += 1
        assert counts == [8] * 8

    def test_zero_count_rejected(self, sphere_scene):
        with pytest.raises(ParameterError):
            scenegen.make_dataset(0, 0, sphere_scene, [axis_light()])
