import numpy as np
import pytest

from dynct.phantoms import (
    INTENSITY_CIRCLE,
    MASS_CIRCLE,
    add_noise,
    draw_noise,
    intensity_motion,
    intensity_phantom,
    intensity_template,
    mass_motion,
    mass_phantom,
    noise_level,
    phantom_times,
)
from dynct.radon import GeometrySpec, Sinogram, dynamic_forward, pixel_centers


class TestIntensityPhantom:
    def test_first_frame_is_template(self):
        vol = intensity_phantom(20, 41)
        # Gamma(0, .) is the identity, so frame 0 equals the antialiased template
        single = intensity_phantom(1, 41)
        np.testing.assert_array_equal(vol.values[0], single.values[0])

    def test_value_range(self):
        vol = intensity_phantom(20, 41)
        assert vol.values.min() == 0.0
        assert vol.values.max() == 1.0
        for k in range(vol.n_time):
            assert vol.values[k].max() == 1.0
            assert vol.values[k].min() == 0.0

    def test_circle_stretches_by_one_and_a_half(self):
        vol = intensity_phantom(20, 41)
        c = pixel_centers(41)
        (cx, cy), rad, _ = INTENSITY_CIRCLE
        col = int(np.argmin(np.abs(c - cx)))
        h = vol.pixel_size
        # column sum of coverage values = vertical extent / pixel size;
        # restrict to the lower half plane where only the circle lives
        lower = c < 0.0
        ext0 = vol.values[0][lower, col].sum() * h
        ext1 = vol.values[-1][lower, col].sum() * h
        assert abs(ext1 - 1.5 * ext0) <= h

    def test_support_stays_in_unit_disk(self):
        vol = intensity_phantom(20, 41)
        c = pixel_centers(41)
        xx, yy = np.meshgrid(c, c, indexing="xy")
        outside = xx**2 + yy**2 > 1.0
        assert np.all(vol.values[:, outside] == 0.0)

    def test_optical_flow_residual_shrinks_under_refinement(self):
        # || d_t theta + V . grad theta || decreases with grid refinement
        motion = intensity_motion()

        def residual(n_time, res):
            vol = intensity_phantom(n_time, res)
            h = vol.pixel_size
            dt = 1.0 / (n_time - 1)
            c = pixel_centers(res)
            xx, yy = np.meshgrid(c, c, indexing="xy")
            vals = []
            for k in range(1, n_time - 1):
                dtheta = (vol.values[k + 1] - vol.values[k - 1]) / (2 * dt)
                gx = np.gradient(vol.values[k], h, axis=1)
                gy = np.gradient(vol.values[k], h, axis=0)
                v = motion.velocity(k * dt, np.stack([xx, yy], axis=-1))
                vals.append(dtheta + v[..., 0] * gx + v[..., 1] * gy)
            r = np.stack(vals)
            return np.sqrt(np.mean(r**2))

        coarse = residual(20, 41)
        fine = residual(40, 81)
        assert fine < 0.9 * coarse

    def test_velocity_bounded(self):
        motion = intensity_motion()
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, size=(500, 2))
        for t in (0.0, 0.5, 1.0):
            v = motion.velocity(t, pts)
            assert np.all(np.isfinite(v))
            assert np.abs(v).max() <= 0.5 + 1e-12

    def test_gamma_inverts_phi(self):
        motion = intensity_motion()
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, size=(50, 2))
        for t in (0.0, 0.3, 1.0):
            np.testing.assert_allclose(motion.gamma(t, motion.phi(t, pts)), pts, rtol=1e-14)

    def test_template_values(self):
        x = np.array([INTENSITY_CIRCLE[0][0]])
        y = np.array([INTENSITY_CIRCLE[0][1]])
        assert intensity_template(x, y)[0] == 1.0
        assert intensity_template(np.array([0.9]), np.array([0.9]))[0] == 0.0


class TestMassPhantom:
    def test_circle_identical_across_frames(self):
        vol = mass_phantom(20, 83)
        (cx, cy), rad, _ = MASS_CIRCLE
        c = pixel_centers(83)
        xx, yy = np.meshgrid(c, c, indexing="xy")
        region = (xx - cx) ** 2 + (yy - cy) ** 2 <= (rad + 0.05) ** 2
        for k in range(1, vol.n_time):
            np.testing.assert_array_equal(vol.values[k][region], vol.values[0][region])

    def test_rectangle_mass_constant(self):
        vol = mass_phantom(20, 83)
        (cx, cy), rad, _ = MASS_CIRCLE
        c = pixel_centers(83)
        xx, yy = np.meshgrid(c, c, indexing="xy")
        circle_region = (xx - cx) ** 2 + (yy - cy) ** 2 <= (rad + 0.05) ** 2
        area = vol.pixel_size**2
        masses = [
            np.sum(vol.values[k][~circle_region]) * area for k in range(vol.n_time)
        ]
        assert (max(masses) - min(masses)) / masses[0] < 1e-10  # exact coverage

    def test_total_mass_constant_within_one_percent(self):
        vol = mass_phantom(20, 83)
        area = vol.pixel_size**2
        masses = vol.values.sum(axis=(1, 2)) * area
        assert (masses.max() - masses.min()) / masses[0] < 0.01

    def test_first_frame_matches_declared_geometry(self):
        from dynct.phantoms import MASS_RECT_CENTER0, MASS_RECT_HALF0, MASS_RECT_VALUE0

        vol = mass_phantom(1, 83)
        c = pixel_centers(83)
        ix = int(np.argmin(np.abs(c - MASS_RECT_CENTER0[0])))
        iy = int(np.argmin(np.abs(c - MASS_RECT_CENTER0[1])))
        assert vol.values[0][iy, ix] == pytest.approx(MASS_RECT_VALUE0, rel=1e-12)
        # outside the declared rectangle and circle everything is zero
        far = (np.abs(c - MASS_RECT_CENTER0[0]) > MASS_RECT_HALF0[0] + 0.1)[None, :] & (
            np.abs(c[:, None] - MASS_CIRCLE[0][1]) > MASS_CIRCLE[1] + 0.1
        ) * (np.abs(c[None, :] - MASS_CIRCLE[0][0]) > MASS_CIRCLE[1] + 0.1)
        assert np.all(vol.values[0][far.T | far] >= 0.0)

    def test_velocity_bounded_and_zero_on_circle(self):
        motion = mass_motion()
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1, 1, size=(500, 2))
        for t in (0.0, 0.5, 1.0):
            v = motion.velocity(t, pts)
            assert np.abs(v).max() <= 1.0
        (cx, cy), rad, _ = MASS_CIRCLE
        center = np.array([[cx, cy]])
        assert np.all(motion.velocity(0.5, center) == 0.0)

    def test_values_in_unit_interval(self):
        vol = mass_phantom(20, 83)
        assert vol.values.min() >= 0.0
        assert vol.values.max() <= 1.0


class TestPhantomTimes:
    def test_endpoints_included(self):
        t = phantom_times(20)
        assert t[0] == 0.0 and t[-1] == 1.0
        assert len(t) == 20
        np.testing.assert_allclose(np.diff(t), t[1] - t[0])

    def test_single_frame(self):
        np.testing.assert_array_equal(phantom_times(1), [0.0])

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            phantom_times(0)


class TestNoise:
    def geometry(self):
        return GeometrySpec(n_offsets=160, n_angles_per_step=7, n_time_steps=20)

    def test_zero_std(self):
        geometry = self.geometry()
        sino = Sinogram(np.ones((20, 7, 160)), geometry)
        noisy, delta = add_noise(sino, 0.0, seed=1)
        np.testing.assert_array_equal(noisy.values, sino.values)
        assert delta == 0.0

    def test_delta_matches_expected_l2_norm(self):
        # E ||noise||^2 = std^2 * sum(weights); 22400 samples
        geometry = self.geometry()
        sino = Sinogram(np.zeros((20, 7, 160)), geometry)
        _, delta = add_noise(sino, 0.05, seed=3)
        total_w = float(
            np.sum(geometry.time_weights[:, None, None] * geometry.data_weights(2.0))
        )
        assert delta == pytest.approx(0.05 * np.sqrt(total_w), rel=0.05)

    def test_deterministic_per_seed(self):
        geometry = self.geometry()
        sino = Sinogram(np.zeros((20, 7, 160)), geometry)
        a, da = add_noise(sino, 0.05, seed=7)
        b, db = add_noise(sino, 0.05, seed=7)
        np.testing.assert_array_equal(a.values, b.values)
        assert da == db
        c, _ = add_noise(sino, 0.05, seed=8)
        assert np.any(c.values != a.values)

    def test_negative_std_rejected(self):
        geometry = self.geometry()
        sino = Sinogram(np.zeros((20, 7, 160)), geometry)
        with pytest.raises(ValueError):
            add_noise(sino, -0.1, seed=0)

    def test_noise_level_norm_consistency(self):
        geometry = self.geometry()
        noise = draw_noise((20, 7, 160), 0.05, seed=0)
        d22 = noise_level(noise, geometry, 2.0, 2.0)
        d_qs = noise_level(noise, geometry, 3.5, 1.5)
        assert d22 > 0 and d_qs > 0 and d22 != d_qs


def test_projected_phantom_is_reasonable():
    # smoke: the shipped intensity phantom projects to a nonnegative sinogram
    geometry = GeometrySpec(n_offsets=40, n_angles_per_step=7, n_time_steps=20)
    vol = intensity_phantom(20, 41)
    sino = dynamic_forward(vol, geometry)
    assert sino.values.min() >= 0.0
    assert sino.values.max() > 0.1
