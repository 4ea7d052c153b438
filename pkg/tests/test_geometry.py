"""Core ray-physics tests: Snell refraction, sphere intersection, back-projection."""

import math

import numpy as np
import pytest

from domecal import (
    DEFAULT_TOLERANCES as TOL,
    CameraRig,
    DomeGeometry,
    DomeModel,
    MediaStack,
    Ray,
    angular_deviation,
    back_project,
    intersect_sphere,
    refraction_axis,
    snell_refract,
)
from domecal.errors import (
    AmbiguousTangent,
    CenteredCamera,
    InputError,
    NoIntersection,
    TotalInternalReflection,
)
from domecal.geometry import line_line_distance, snell_residuals

from conftest import make_rig, random_rig, random_visible_point


class TestSnellRefract:
    def test_identical_media_no_bending(self):
        out = snell_refract((0, 0, 1), (0, 0, -1), 1.0, 1.0)
        np.testing.assert_allclose(out, [0, 0, 1], atol=1e-15)

    def test_normal_incidence_unchanged(self):
        for mu_out in (1.0, 1.333, 1.473):
            out = snell_refract((0, 0, 1), (0, 0, -1), 1.0, mu_out)
            np.testing.assert_allclose(out, [0, 0, 1], atol=1e-15)

    def test_45_degrees_air_to_water(self):
        # scalar Snell oracle: asin(sin(45 deg) / 1.333)
        inc = np.array([math.sin(math.pi / 4), 0.0, math.cos(math.pi / 4)])
        out = snell_refract(inc, (0, 0, -1), 1.0, 1.333)
        expected_angle = math.asin(math.sin(math.pi / 4) / 1.333)
        got_angle = math.atan2(out[0], out[2])
        assert abs(got_angle - expected_angle) < 1e-12
        assert abs(math.degrees(expected_angle) - 32.04) < 0.01

    def test_unit_output_and_snell_law(self, rng):
        for _ in range(200):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            i = rng.normal(size=3)
            i /= np.linalg.norm(i)
            mu1, mu2 = sorted(rng.uniform(1.0, 1.6, size=2))
            out = snell_refract(i, n, mu1, mu2)
            assert abs(np.linalg.norm(out) - 1.0) < TOL.unit_norm
            sin_i = np.linalg.norm(np.cross(i, n))
            sin_t = np.linalg.norm(np.cross(out, n))
            assert abs(mu1 * sin_i - mu2 * sin_t) < TOL.snell_law
            # transmitted ray continues to the far side of the interface
            assert np.sign(i @ n) == np.sign(out @ n) or abs(i @ n) < 1e-12

    def test_flips_normal_facing_away(self):
        a = snell_refract((0, 0, 1), (0, 0, -1), 1.0, 1.333)
        b = snell_refract((0, 0, 1), (0, 0, 1), 1.0, 1.333)
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_total_internal_reflection(self):
        # dense to light at grazing incidence
        inc = np.array([math.sin(1.2), 0.0, math.cos(1.2)])
        with pytest.raises(TotalInternalReflection):
            snell_refract(inc, (0, 0, -1), 1.473, 1.0)


class TestIntersectSphere:
    def test_from_center(self):
        p = intersect_sphere(Ray((0, 0, 0), (0, 0, 1)), 0.05)
        np.testing.assert_allclose(p, [0, 0, 0.05], atol=1e-15)

    def test_outside_pointing_away(self):
        with pytest.raises(NoIntersection):
            intersect_sphere(Ray((0, 0, 0.06), (0, 0, 1)), 0.05)

    def test_chord_from_inside(self):
        # closed-form quadratic oracle: sqrt(0.05^2 - 0.02^2)
        p = intersect_sphere(Ray((0, 0, -0.02), (0, 1, 0)), 0.05)
        np.testing.assert_allclose(p, [0, math.sqrt(0.05**2 - 0.02**2), -0.02], atol=1e-12)

    def test_on_sphere_within_tolerance(self, rng):
        for _ in range(200):
            o = rng.normal(size=3) * 0.01
            d = rng.normal(size=3)
            p = intersect_sphere(Ray(o, d), 0.05)
            assert abs(np.linalg.norm(p) - 0.05) < 1e-12

    def test_grazing_rejected_distinctly(self):
        # ray tangent to the sphere from outside
        with pytest.raises(AmbiguousTangent):
            intersect_sphere(Ray((0.05, 0, -1.0), (0, 0, 1)), 0.05)

    def test_first_intersection_from_outside(self):
        p = intersect_sphere(Ray((0, 0, -1.0), (0, 0, 1)), 0.05)
        np.testing.assert_allclose(p, [0, 0, -0.05], atol=1e-12)


class TestBackProject:
    def test_refraction_center_ray_unrefracted(self, thick_rig):
        axis = refraction_axis(thick_rig)
        pixel = axis.center_point()
        path = back_project(thick_rig, pixel)
        cross = np.cross(path.water_segment.direction, axis.direction_world)
        assert np.linalg.norm(cross) < 1e-9

    def test_centered_camera_no_refraction(self, rng):
        rig = make_rig(v_off=(0, 0, 0), model=DomeModel.THICK)
        for _ in range(20):
            pixel = rng.uniform((0, 0), (2048, 1536))
            path = back_project(rig, pixel)
            cam_dir = path.air_segment.direction
            np.testing.assert_allclose(path.water_segment.direction, cam_dir, atol=1e-12)

    def test_snell_residuals_small(self):
        rig = make_rig(v_off=(0, 0.00281, 0.005), model=DomeModel.THICK)
        path = back_project(rig, (1500.0, 400.0))
        for res in snell_residuals(path, rig.media):
            assert res < TOL.snell_law

    def test_interface_points_on_spheres(self, rng):
        for _ in range(50):
            rig = random_rig(rng)
            pixel = rng.uniform((0, 0), rig.intrinsics.image_size)
            path = back_project(rig, pixel)
            assert abs(np.linalg.norm(path.inner_point) - rig.dome.inner_radius) < TOL.sphere_surface
            assert abs(np.linalg.norm(path.outer_point) - rig.dome.outer_radius) < TOL.sphere_surface

    def test_thin_model_has_no_glass_segment(self, thin_rig, rng):
        pixel = rng.uniform((0, 0), thin_rig.intrinsics.image_size)
        path = back_project(thin_rig, pixel)
        assert path.glass_segment is None
        np.testing.assert_array_equal(path.inner_point, path.outer_point)


class TestCoplanarityAndAxialityProperties:
    def test_coplanarity_lemma(self, rng):
        """Scalar triple products among segments and v_off stay below tolerance."""
        n_checked = 0
        while n_checked < 400:
            rig = random_rig(rng, model=DomeModel.THICK)
            pixel = rng.uniform((0, 0), rig.intrinsics.image_size)
            try:
                path = back_project(rig, pixel)
            except TotalInternalReflection:
                continue
            dirs = path.segment_directions() + [rig.v_off / np.linalg.norm(rig.v_off)]
            for a in range(len(dirs)):
                for b in range(a + 1, len(dirs)):
                    for c in range(b + 1, len(dirs)):
                        triple = abs(np.dot(dirs[a], np.cross(dirs[b], dirs[c])))
                        assert triple < TOL.coplanarity
            n_checked += 1

    def test_axial_camera_theorem(self, rng):
        """Every back-projected water line meets the refraction axis line."""
        n_checked = 0
        while n_checked < 300:
            rig = random_rig(rng, model=DomeModel.THICK)
            pixel = rng.uniform((0, 0), rig.intrinsics.image_size)
            try:
                path = back_project(rig, pixel)
            except TotalInternalReflection:
                continue
            axis_ray = Ray((0, 0, 0), rig.v_off)
            assert line_line_distance(path.water_segment, axis_ray) < TOL.axial_line_distance
            n_checked += 1


class TestRefractionAxis:
    def test_axial_decentering_center_is_principal_point(self):
        rig = make_rig(v_off=(0, 0, -0.02))
        axis = refraction_axis(rig)
        np.testing.assert_allclose(axis.center_point(), [1024, 768], atol=1e-9)

    def test_centered_camera_raises(self):
        rig = make_rig(v_off=(0, 0, 0))
        with pytest.raises(CenteredCamera):
            refraction_axis(rig)

    def test_lateral_decentering_ideal_center(self):
        # axis parallel to the image plane: homogeneous ideal point
        rig = make_rig(v_off=(0, 0.00281, 0))
        axis = refraction_axis(rig)
        assert axis.is_ideal
        with pytest.raises(CenteredCamera):
            axis.center_point()

    def test_direction_consistent_with_center(self, rng):
        for _ in range(50):
            rig = random_rig(rng)
            axis = refraction_axis(rig)
            K = rig.intrinsics.K
            a = rig.rotation.T @ np.linalg.solve(K, axis.refraction_center_px)
            a /= np.linalg.norm(a)
            np.testing.assert_allclose(a, axis.direction_world, atol=1e-10)

    def test_pole_ordering(self, rng):
        for _ in range(20):
            rig = random_rig(rng)
            axis = refraction_axis(rig)
            c = rig.v_off
            assert np.linalg.norm(axis.positive_pole - c) < np.linalg.norm(axis.negative_pole - c)
            assert abs(np.linalg.norm(axis.positive_pole) - rig.dome.inner_radius) < 1e-12


class TestAngularDeviation:
    def test_zero_incidence(self):
        assert angular_deviation(0.0, 1.0, 1.333) == 0.0

    def test_equal_media(self, rng):
        for alpha in rng.uniform(0, math.pi / 2, size=20):
            assert angular_deviation(float(alpha), 1.333, 1.333) == pytest.approx(0.0, abs=1e-12)

    def test_maximum_at_perpendicular(self):
        expected = math.pi / 2 - math.asin(1.0 / 1.333)
        assert angular_deviation(math.pi / 2, 1.0, 1.333) == pytest.approx(expected, abs=1e-12)
        assert math.degrees(expected) == pytest.approx(41.40, abs=0.02)

    def test_strictly_monotone(self):
        alphas = np.linspace(0, math.pi / 2, 2000)
        devs = [angular_deviation(float(a), 1.0, 1.333) for a in alphas]
        assert all(b > a for a, b in zip(devs, devs[1:]))
        assert all(0.0 <= v < math.pi / 2 for v in devs)

    def test_rejects_bad_inputs(self):
        with pytest.raises(InputError):
            angular_deviation(-0.1, 1.0, 1.333)
        with pytest.raises(InputError):
            angular_deviation(0.5, 1.333, 1.0)


class TestTypes:
    def test_media_ordering_enforced(self):
        with pytest.raises(InputError):
            MediaStack(mu_air=1.0, mu_glass=1.2, mu_water=1.333)
        with pytest.raises(InputError):
            MediaStack(mu_air=0.9)

    def test_rig_rejects_camera_outside_dome(self):
        with pytest.raises(InputError):
            make_rig(v_off=(0, 0, 0.06))

    def test_rig_rejects_bad_rotation(self):
        R = np.eye(3)
        R[0, 0] = 1.1
        with pytest.raises(InputError):
            make_rig(rotation=R)

    def test_projection_matrix(self, thick_rig):
        P = thick_rig.projection_matrix
        np.testing.assert_allclose(P[:, :3], thick_rig.rotation)
        np.testing.assert_allclose(P[:, 3], -thick_rig.rotation @ thick_rig.v_off)

    def test_ray_normalizes_direction(self):
        ray = Ray((0, 0, 0), (0, 0, 5.0))
        assert abs(np.linalg.norm(ray.direction) - 1.0) < TOL.unit_norm

    def test_thin_dome_outer_radius_collapses(self):
        dome = DomeGeometry(inner_radius=0.05, thickness=0.007, model=DomeModel.THIN)
        assert dome.outer_radius == 0.05
