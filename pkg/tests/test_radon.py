import numpy as np
import pytest

from dynct.geometry import GridFunction, bochner_norm, inner_product
from dynct.phantoms import intensity_phantom
from dynct.radon import (
    DynamicRadon,
    GeometrySpec,
    Sinogram,
    Volume,
    disk_mask,
    dynamic_adjoint,
    dynamic_forward,
    estimate_operator_norm,
    operator_norm_estimate,
    pixel_centers,
    static_forward,
)


def adjointness_gap(op: DynamicRadon, s: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(op.image_shape)
    g = rng.standard_normal(op.data_shape)
    tw = op.time_weights.reshape(-1, 1, 1)
    lhs = float(np.sum(tw * op.data_weights(s) * op.forward(f) * g))
    rhs = float(np.sum(tw * op.pixel_area * f * op.adjoint(g, s=s)))
    nf = np.sqrt(np.sum(tw * op.pixel_area * f * f))
    ng = np.sqrt(np.sum(tw * op.data_weights(s) * g * g))
    return abs(lhs - rhs) / (nf * ng)


class TestGeometrySpec:
    def test_offsets_strictly_interior(self):
        g = GeometrySpec(n_offsets=40, n_angles_per_step=7, n_time_steps=20)
        assert np.all(np.abs(g.offsets) < 1.0)
        assert g.h_sigma == pytest.approx(0.05)

    def test_rotating_schedule_covers_each_angle_once(self):
        g = GeometrySpec(n_offsets=8, n_angles_per_step=7, n_time_steps=20)
        sched = g.angle_schedule()
        assert len(sched) == 20 and all(len(a) == 7 for a in sched)
        allangles = np.sort(np.concatenate(sched))
        assert len(np.unique(np.round(allangles, 12))) == 140
        np.testing.assert_allclose(allangles, np.arange(140) * np.pi / 140, atol=1e-12)

    def test_fixed_schedule_identical_steps(self):
        g = GeometrySpec(n_offsets=8, n_angles_per_step=5, n_time_steps=3, mode="fixed")
        sched = g.angle_schedule()
        for a in sched[1:]:
            np.testing.assert_array_equal(a, sched[0])

    def test_data_weights_positive_finite(self):
        g = GeometrySpec(n_offsets=40, n_angles_per_step=7, n_time_steps=20)
        for s in (1.5, 2.0, 3.5):
            w = g.data_weights(s)
            assert w.shape == (7, 40)
            assert np.all(np.isfinite(w)) and np.all(w > 0)

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            GeometrySpec(n_offsets=4, n_angles_per_step=2, n_time_steps=2, mode="spiral")


class TestStaticForward:
    def test_zero_image(self, small_geometry):
        angles = small_geometry.angle_schedule()[0]
        sino = static_forward(np.zeros((21, 21)), angles, small_geometry)
        assert np.all(sino == 0.0)

    def test_disk_chord_lengths(self):
        # projection of the unit-disk indicator is 2 sqrt(1 - sigma^2)
        geometry = GeometrySpec(n_offsets=40, n_angles_per_step=6, n_time_steps=1, mode="fixed")
        n = 128
        image = disk_mask(n).astype(float)
        angles = geometry.angle_schedule()[0]
        sino = static_forward(image, angles, geometry)
        expected = 2.0 * np.sqrt(1.0 - geometry.offsets**2)
        keep = np.abs(geometry.offsets) <= 0.9  # boundary pixels are ragged
        rel = np.abs(sino[:, keep] - expected[keep]) / expected[keep]
        assert rel.max() < 0.02

    def test_point_blob_traces_sinusoid(self):
        # peak offset of a small blob at x follows sigma(phi) = x . theta(phi)
        geometry = GeometrySpec(n_offsets=101, n_angles_per_step=12, n_time_steps=1, mode="fixed")
        n = 101
        c = pixel_centers(n)
        xx, yy = np.meshgrid(c, c, indexing="xy")
        x0, y0 = 0.31, -0.22
        image = np.exp(-((xx - x0) ** 2 + (yy - y0) ** 2) / (2 * 0.03**2))
        angles = geometry.angle_schedule()[0]
        sino = static_forward(image, angles, geometry)
        for a_idx, phi in enumerate(angles):
            peak = geometry.offsets[np.argmax(sino[a_idx])]
            predicted = x0 * np.cos(phi) + y0 * np.sin(phi)
            assert abs(peak - predicted) <= 1.5 * geometry.h_sigma

    def test_linearity(self, small_geometry):
        rng = np.random.default_rng(2)
        op = DynamicRadon(small_geometry, 21)
        f = rng.standard_normal(op.image_shape)
        g = rng.standard_normal(op.image_shape)
        lhs = op.forward(2.5 * f - 1.5 * g)
        rhs = 2.5 * op.forward(f) - 1.5 * op.forward(g)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-13)

    def test_rotation_covariance_fixed_geometry(self):
        # rotating the image by one angle step shifts sinogram angle rows
        geometry = GeometrySpec(n_offsets=64, n_angles_per_step=8, n_time_steps=1, mode="fixed")
        n = 128
        c = pixel_centers(n)
        xx, yy = np.meshgrid(c, c, indexing="xy")
        image = np.exp(-((xx - 0.25) ** 2 + (yy - 0.1) ** 2) / (2 * 0.05**2))
        dphi = np.pi / 8

        # bilinear sample of the image rotated by -dphi (so R image' (phi) = R image (phi - dphi))
        ct, st = np.cos(dphi), np.sin(dphi)
        rx = ct * xx - st * yy
        ry = st * xx + ct * yy
        h = 2.0 / n
        fx = np.clip((rx + 1.0) / h - 0.5, 0, n - 1 - 1e-9)
        fy = np.clip((ry + 1.0) / h - 0.5, 0, n - 1 - 1e-9)
        ix, iy = fx.astype(int), fy.astype(int)
        tx, ty = fx - ix, fy - iy
        rot = (
            image[iy, ix] * (1 - ty) * (1 - tx)
            + image[iy, np.minimum(ix + 1, n - 1)] * (1 - ty) * tx
            + image[np.minimum(iy + 1, n - 1), ix] * ty * (1 - tx)
            + image[np.minimum(iy + 1, n - 1), np.minimum(ix + 1, n - 1)] * ty * tx
        )

        angles = geometry.angle_schedule()[0]
        s0 = static_forward(image, angles, geometry)
        s1 = static_forward(rot, angles, geometry)
        scale = np.abs(s0).max()
        np.testing.assert_allclose(s1[:-1], s0[1:], rtol=0.0, atol=0.02 * scale)


class TestAdjoint:
    def test_zero_sinogram(self, small_geometry):
        op = DynamicRadon(small_geometry, 21)
        out = op.adjoint(np.zeros(op.data_shape), s=2.0)
        assert np.all(out == 0.0)

    @pytest.mark.parametrize("s", [1.5, 2.0, 3.5])
    def test_discrete_adjointness(self, small_geometry, s):
        op = DynamicRadon(small_geometry, 21)
        for seed in range(5):
            assert adjointness_gap(op, s, seed) <= 1e-8

    def test_adjoint_locality_in_time(self, small_geometry):
        op = DynamicRadon(small_geometry, 21)
        g = np.zeros(op.data_shape)
        g[2] = 1.0
        out = op.adjoint(g, s=2.0)
        assert np.any(out[2] != 0.0)
        assert np.all(out[[0, 1, 3]] == 0.0)


class TestDynamic:
    def test_fixed_mode_static_volume_gives_identical_frames(self):
        geometry = GeometrySpec(n_offsets=24, n_angles_per_step=5, n_time_steps=4, mode="fixed")
        frame = intensity_phantom(1, 25).values[0]
        vol = Volume(np.repeat(frame[None], 4, axis=0))
        sino = dynamic_forward(vol, geometry)
        for k in range(1, 4):
            np.testing.assert_array_equal(sino.values[k], sino.values[0])

    def test_single_frame_matches_static(self, small_geometry):
        vol = intensity_phantom(4, 25)
        sino = dynamic_forward(vol, small_geometry)
        angles = small_geometry.angle_schedule()[1]
        direct = static_forward(vol.values[1], angles, small_geometry)
        np.testing.assert_array_equal(sino.values[1], direct)

    def test_frame_count_mismatch_rejected(self, small_geometry):
        vol = intensity_phantom(3, 25)
        with pytest.raises(ValueError):
            dynamic_forward(vol, small_geometry)

    def test_dynamic_adjoint_transpose(self, small_geometry):
        rng = np.random.default_rng(8)
        vol = Volume(rng.standard_normal((4, 21, 21)))
        sino = Sinogram(rng.standard_normal((4, 5, 24)), small_geometry)
        Af = dynamic_forward(vol, small_geometry)
        Astar_g = dynamic_adjoint(sino, s=2.0, n_pixels=21)
        f_gf = GridFunction(vol.values, small_geometry.time_weights, np.asarray((2 / 21) ** 2))
        lhs = inner_product(
            GridFunction(Af.values, small_geometry.time_weights, small_geometry.data_weights(2.0)),
            GridFunction(sino.values, small_geometry.time_weights, small_geometry.data_weights(2.0)).with_values(sino.values),
        )
        rhs = inner_product(f_gf, f_gf.with_values(Astar_g.values))
        nf = bochner_norm(f_gf, 2.0, 2.0)
        ng = bochner_norm(
            GridFunction(sino.values, small_geometry.time_weights, small_geometry.data_weights(2.0)), 2.0, 2.0
        )
        assert abs(lhs - rhs) <= 1e-8 * nf * ng


class TestOperatorNorm:
    def test_identity_stub(self):
        lam = estimate_operator_norm(
            lambda x: x, (5, 5), np.ones((5, 5)), n_iters=20, seed=0
        )
        assert lam == pytest.approx(1.0, abs=1e-10)

    def test_estimate_stabilizes(self):
        geometry = GeometrySpec(n_offsets=40, n_angles_per_step=7, n_time_steps=20)
        op = DynamicRadon(geometry, 33)
        tw = op.time_weights.reshape(-1, 1, 1)
        lam, hist = estimate_operator_norm(
            lambda x: op.normal(x, s=2.0),
            op.image_shape,
            tw * op.pixel_area,
            n_iters=50,
            seed=0,
            return_history=True,
        )
        assert np.all(np.diff(hist) >= -1e-9 * np.abs(hist[:-1]))  # monotone
        assert abs(hist[-1] - hist[-2]) / hist[-1] < 1e-4

    def test_weight_doubling_doubles_estimate(self, small_geometry):
        op = DynamicRadon(small_geometry, 21)
        tw = op.time_weights.reshape(-1, 1, 1)
        w = op.data_weights(2.0)

        def normal_scaled(x, c):
            out = np.empty(op.image_shape)
            for k in range(op.image_shape[0]):
                g = c * w * op.forward_step(k, x[k])
                out[k] = op.adjoint_step(k, g / w, s=2.0)  # scale the quadrature only
            return out

        weights = tw * op.pixel_area
        lam1 = estimate_operator_norm(lambda x: normal_scaled(x, 1.0), op.image_shape, weights, 40, 3)
        lam2 = estimate_operator_norm(lambda x: normal_scaled(x, 2.0), op.image_shape, weights, 40, 3)
        assert lam2 == pytest.approx(2.0 * lam1, rel=1e-10)

    def test_determinism(self, small_geometry):
        a = operator_norm_estimate(small_geometry, 21, n_iters=30, seed=5)
        b = operator_norm_estimate(small_geometry, 21, n_iters=30, seed=5)
        assert a == b

    def test_rejects_zero_iters(self):
        with pytest.raises(ValueError):
            estimate_operator_norm(lambda x: x, (2, 2), np.ones((2, 2)), n_iters=0)
