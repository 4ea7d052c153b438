"""Simulation-kit tests: determinism, displacement fields, iso-curves, sweeps."""

import numpy as np
import pytest

from domecal import ChessboardSpec, DomeModel, project, refraction_axis
from domecal.calibrate import calibrate, make_problem
from domecal.errors import ThetaUnreachable
from domecal.homography import hartley_normalization, homogeneous
from domecal.simulate import (
    PoseSampler,
    SimConfig,
    displacement_field,
    generate_observations,
    iso_refraction_curve,
    noise_sweep,
)

from conftest import make_rig

BOARD = ChessboardSpec(7, 8, 0.05)


def paper_config(v_off, sigma=0.0, n_images=10, seed=0, **sampler_kw):
    rig = make_rig(v_off=v_off, model=DomeModel.THICK)
    return SimConfig(
        rig=rig,
        board=BOARD,
        n_images=n_images,
        pose_sampler=PoseSampler(**sampler_kw),
        noise_sigma_px=sigma,
        rng_seed=seed,
    )


class TestGenerateObservations:
    def test_noiseless_reproduces_projection(self):
        config = paper_config((0.0, 0.002, 0.005))
        sim = generate_observations(config)
        rig = config.rig
        for image, pose in zip(sim.observations, sim.poses):
            world = pose.apply(BOARD.points()) @ rig.rotation + rig.v_off
            for i in (0, 17, 39, 55):
                px = project(rig, world[i]).pixel
                np.testing.assert_allclose(px, image.corners_px[i], atol=1e-9)

    def test_fixed_seed_reproducible(self):
        config = paper_config((0.0, 0.002, 0.005), sigma=0.5, seed=1234)
        a = generate_observations(config)
        b = generate_observations(config)
        for img_a, img_b in zip(a.observations, b.observations):
            np.testing.assert_array_equal(img_a.corners_px, img_b.corners_px)

    def test_noise_standard_deviation(self):
        # empirical per-coordinate std over ~10^4 corners within chi-square bounds
        config = paper_config((0.0, 0.002, 0.005), sigma=0.5, n_images=180, seed=5)
        noisy = generate_observations(config)
        clean = generate_observations(
            paper_config((0.0, 0.002, 0.005), sigma=0.0, n_images=180, seed=5)
        )
        deltas = np.concatenate(
            [
                (a.corners_px - b.corners_px).ravel()
                for a, b in zip(noisy.observations, clean.observations)
            ]
        )
        assert deltas.size >= 10_000
        assert 0.49 < deltas.std() < 0.51

    def test_corners_inside_image(self):
        config = paper_config((0.0, 0.004, 0.012))
        sim = generate_observations(config)
        for image in sim.observations:
            assert (image.corners_px[:, 0] > 0).all()
            assert (image.corners_px[:, 0] < 2048).all()
            assert (image.corners_px[:, 1] > 0).all()
            assert (image.corners_px[:, 1] < 1536).all()

    def test_round_trip_through_calibration(self):
        config = paper_config((-0.001, 0.001, 0.002), seed=3, distance_range=(0.4, 1.0))
        sim = generate_observations(config)
        rig0 = config.rig.with_v_off((0, 0, 0))
        result = calibrate(make_problem(sim.observations, rig0))
        assert np.linalg.norm(result.v_off - config.rig.v_off) < 1e-6


class TestDisplacementField:
    def test_centered_rig_zero_arrows(self):
        rig = make_rig(v_off=(0, 0, 0), model=DomeModel.THICK)
        fld = displacement_field(rig, depth=1.0, grid_shape=(8, 6))
        assert fld.valid.all()
        assert np.abs(fld.arrows[fld.valid]).max() < 1e-9

    def test_backward_decentering_arrows_point_inward(self):
        rig = make_rig(v_off=(0, 0, -0.02), model=DomeModel.THICK)
        fld = displacement_field(rig, depth=1.0, grid_shape=(10, 8))
        center = refraction_axis(rig).center_point()
        toward = center[None, :] - fld.in_air_px
        dots = np.einsum("ni,ni->n", fld.arrows[fld.valid], toward[fld.valid])
        assert (dots > 0).all()

    def test_forward_decentering_arrows_point_outward(self):
        rig = make_rig(v_off=(0, 0, 0.02), model=DomeModel.THICK)
        fld = displacement_field(rig, depth=1.0, grid_shape=(10, 8))
        center = refraction_axis(rig).center_point()
        toward = center[None, :] - fld.in_air_px
        dots = np.einsum("ni,ni->n", fld.arrows[fld.valid], toward[fld.valid])
        assert (dots < 0).all()

    def test_arrow_collinearity_with_center(self):
        """Each arrow lies on the line joining its node and the center."""
        rig = make_rig(v_off=(0.001, -0.002, 0.01), model=DomeModel.THICK)
        fld = displacement_field(rig, depth=1.0, grid_shape=(10, 8))
        h = refraction_axis(rig).refraction_center_px
        h = h / np.linalg.norm(h)
        for ok, x_a, x_r in zip(fld.valid, fld.in_air_px, fld.refracted_px):
            if not ok:
                continue
            M = np.array([[*x_r, 1.0], [*x_a, 1.0], h])
            scale = np.abs(M[:2, :2]).max() + 1.0
            M[:2] /= scale
            assert abs(np.linalg.det(M)) < 1e-8

    def test_depth_dependence(self):
        rig = make_rig(v_off=(0, 0.002, 0.002), model=DomeModel.THICK)
        near = displacement_field(rig, depth=1.0, grid_shape=(8, 6))
        far = displacement_field(rig, depth=10.0, grid_shape=(8, 6))
        m_near = np.linalg.norm(near.arrows[near.valid], axis=1).mean()
        m_far = np.linalg.norm(far.arrows[far.valid], axis=1).mean()
        assert abs(m_near - m_far) > 1e-3


class TestIsoRefractionCurve:
    def test_zero_theta_degenerates_to_center(self):
        rig = make_rig(v_off=(0, 0, -0.02), model=DomeModel.THICK)
        pts = iso_refraction_curve(rig, 0.0)
        center = refraction_axis(rig).center_point()
        assert any(np.linalg.norm(p - center) < 1e-9 for p in pts)

    def test_centered_rig_unreachable(self):
        rig = make_rig(v_off=(0, 0, 0), model=DomeModel.THICK)
        with pytest.raises(ThetaUnreachable):
            iso_refraction_curve(rig, 0.01)

    def test_theta_above_max_unreachable(self):
        rig = make_rig(v_off=(0, 0, -0.005), model=DomeModel.THICK)
        with pytest.raises(ThetaUnreachable):
            iso_refraction_curve(rig, 0.5)

    def test_points_fit_a_conic(self):
        """Sampled points satisfy one conic equation to near machine level."""
        rig = make_rig(v_off=(0.002, 0.003, -0.012), model=DomeModel.THICK)
        pts = iso_refraction_curve(rig, 0.01, n_samples=120)
        assert len(pts) >= 50
        T = hartley_normalization(pts)
        p = homogeneous(pts) @ T.T
        A = np.column_stack(
            [p[:, 0] ** 2, p[:, 0] * p[:, 1], p[:, 1] ** 2, p[:, 0], p[:, 1], np.ones(len(p))]
        )
        _, sv, vt = np.linalg.svd(A)
        conic = vt[-1]
        residuals = np.abs(A @ conic)
        assert residuals.max() < 1e-8

    def test_deviation_matches_scalar_formula_thin(self):
        """In-plane traced deviation equals the closed-form single-interface law."""
        import math

        from domecal import angular_deviation
        from domecal.simulate import _deviation_at_cone_angle

        rig = make_rig(v_off=(0, 0, -0.02), model=DomeModel.THIN, thickness=0.0)
        d = np.linalg.norm(rig.v_off)
        r = rig.dome.inner_radius
        for phi in (0.1, 0.5, 1.0, 1.4):
            alpha = math.asin(d / r * math.sin(phi))
            expected = angular_deviation(alpha, rig.media.mu_air, rig.media.mu_water)
            got = _deviation_at_cone_angle(rig, phi)
            assert got == pytest.approx(expected, abs=1e-12)


class TestNoiseSweep:
    def test_zero_sigma_row_near_exact(self):
        rig = make_rig(v_off=(0.0, 0.004, 0.012), model=DomeModel.THICK)
        rows = noise_sweep(rig, BOARD, sigmas=[0.0], n_trials=2, n_images=6, seed=11)
        row = rows[0]
        assert row["center_error_median_px"] < 1e-3
        assert row["axis_error_mean_deg"] < 1e-3
        assert row["sign_correct_rate"] == 1.0
        assert row["n_failures"] == 0

    def test_deterministic(self):
        rig = make_rig(v_off=(0.0, 0.004, 0.012), model=DomeModel.THICK)
        a = noise_sweep(rig, BOARD, sigmas=[0.3], n_trials=2, n_images=4, seed=5)
        b = noise_sweep(rig, BOARD, sigmas=[0.3], n_trials=2, n_images=4, seed=5)
        assert a == b

    def test_errors_grow_with_noise(self):
        rig = make_rig(v_off=(0.0, 0.004, 0.012), model=DomeModel.THICK)
        rows = noise_sweep(
            rig,
            BOARD,
            sigmas=[0.0, 0.5],
            n_trials=3,
            n_images=6,
            seed=2,
            pose_sampler=PoseSampler(distance_range=(0.4, 1.0), margin_frac=0.12),
        )
        assert rows[0]["center_error_median_px"] < rows[1]["center_error_median_px"]
