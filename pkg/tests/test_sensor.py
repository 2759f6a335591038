import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from surfipp.groundtruth import GroundTruthField
from surfipp.mesh import mesh_from_arrays
from surfipp.sensor import (CameraModel, Viewpoint, build_yaw_library, noise_variance,
                            normalize_yaw, simulate_measurement, visible_facets)

PAPER_CAM = dict(fov_h=60, fov_v=60, d_min=2, d_max=8, alpha_max=70, pitch=15,
                 noise_a=0.05, noise_b=0.2)


def single_facet_mesh(center=(0, 0, 0), normal_axis=0):
    """One triangle whose center is at ``center`` with normal along +axis."""
    c = np.asarray(center, dtype=float)
    if normal_axis == 0:
        v = np.array([[0, -1, -1], [0, 2, -1], [0, -1, 2]], dtype=float)
    else:
        v = np.array([[-1, -1, 0], [2, -1, 0], [-1, 2, 0]], dtype=float)
    v += c - v.mean(axis=0)
    return mesh_from_arrays(v, np.array([[0, 1, 2]]))


def brute_force_visible(vp, cam, mesh):
    """Independent implementation of conditions (i)-(iii).

    Builds the camera frame from explicit rotation matrices: yaw about world
    z, then pitch about the camera's y axis (positive pitch looks down).
    """
    cy, sy = math.cos(vp.yaw), math.sin(vp.yaw)
    cp, sp = math.cos(math.radians(cam.pitch)), math.sin(math.radians(cam.pitch))
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rot = rz @ ry
    out = []
    for i in range(mesh.n_facets):
        rel = mesh.facet_centers[i] - vp.position
        d = np.linalg.norm(rel)
        if not (cam.d_min <= d <= cam.d_max):
            continue
        local = rot.T @ rel
        az = math.degrees(math.atan2(local[1], local[0]))
        el = math.degrees(math.atan2(local[2], math.hypot(local[0], local[1])))
        if abs(az) > cam.fov_h / 2 or abs(el) > cam.fov_v / 2:
            continue
        alpha = math.degrees(math.acos(
            np.clip(np.dot(mesh.facet_normals[i], -rel / d), -1, 1)))
        if alpha > cam.alpha_max:
            continue
        out.append(i)
    return np.array(out, dtype=np.int64)


class TestNormalizeYaw:
    @given(st.floats(-50.0, 50.0))
    @settings(max_examples=300, deadline=None)
    def test_range_and_equivalence(self, yaw):
        w = normalize_yaw(yaw)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(yaw), abs_tol=1e-9)
        assert math.isclose(math.cos(w), math.cos(yaw), abs_tol=1e-9)


class TestVisibility:
    def test_axial_facet_visible(self):
        mesh = single_facet_mesh()
        cam = CameraModel(**{**PAPER_CAM, "pitch": 0})
        d = (cam.d_min + cam.d_max) / 2
        vp = Viewpoint([d, 0, 0], math.pi)  # looking along -x at the facet
        assert list(visible_facets(vp, cam, mesh)) == [0]

    def test_range_boundary(self):
        mesh = single_facet_mesh()
        cam = CameraModel(**{**PAPER_CAM, "pitch": 0})
        vp = Viewpoint([cam.d_max + 0.01, 0, 0], math.pi)
        assert visible_facets(vp, cam, mesh).size == 0
        vp_in = Viewpoint([cam.d_max - 1e-6, 0, 0], math.pi)
        assert visible_facets(vp_in, cam, mesh).size == 1

    def test_incidence_limit(self):
        mesh = single_facet_mesh()
        cam = CameraModel(**{**PAPER_CAM, "pitch": 0, "fov_h": 180, "fov_v": 180})
        alpha = math.radians(cam.alpha_max + 2)
        pos = 4.0 * np.array([math.cos(alpha), math.sin(alpha), 0.0])
        vp = Viewpoint(pos, normalize_yaw(math.atan2(-pos[1], -pos[0])))
        assert visible_facets(vp, cam, mesh).size == 0

    def test_pitch_tilts_below_horizon(self):
        mesh = single_facet_mesh(center=(0, 0, -2), normal_axis=0)
        cam = CameraModel(**{**PAPER_CAM, "pitch": 30, "fov_v": 20})
        vp = Viewpoint([4, 0, 0], math.pi)  # facet is below and ahead
        assert visible_facets(vp, cam, mesh).size == 1

    def test_brute_force_oracle_on_tank(self, tank400):
        cam = CameraModel(**PAPER_CAM)
        vp = Viewpoint([10.0, 0.0, 10.0], math.pi)  # 4 m off the wall
        got = visible_facets(vp, cam, tank400)
        ref = brute_force_visible(vp, cam, tank400)
        assert np.array_equal(got, ref)
        assert got.size > 0

    def test_monotone_in_capability(self, tank400):
        base = CameraModel(**PAPER_CAM)
        wider = CameraModel(**{**PAPER_CAM, "fov_h": 90, "fov_v": 80,
                               "d_min": 1, "d_max": 12, "alpha_max": 85})
        for yaw in (0.0, 2.0, math.pi):
            vp = Viewpoint([10.5, -1.0, 8.0], yaw)
            small = set(visible_facets(vp, base, tank400).tolist())
            large = set(visible_facets(vp, wider, tank400).tolist())
            assert small <= large

    def test_every_returned_facet_passes_conditions(self, tank400):
        cam = CameraModel(**PAPER_CAM)
        vp = Viewpoint([9.0, 4.0, 12.0], -2.7)
        idx = visible_facets(vp, cam, tank400)
        ref = set(brute_force_visible(vp, cam, tank400).tolist())
        assert set(idx.tolist()) == ref


class TestNoiseModel:
    def test_zero_range(self):
        cam = CameraModel(**PAPER_CAM)
        assert noise_variance(0.0, cam) == 0.0

    def test_paper_value(self):
        cam = CameraModel(**PAPER_CAM)
        assert noise_variance(2.0, cam) == pytest.approx(0.05 * (1 - math.exp(-0.4)),
                                                         abs=1e-12)
        assert noise_variance(2.0, cam) == pytest.approx(0.0164840, abs=1e-6)

    def test_asymptote(self):
        cam = CameraModel(**PAPER_CAM)
        assert noise_variance(1e6, cam) == pytest.approx(cam.noise_a)

    @given(st.floats(0.0, 100.0), st.floats(0.01, 100.0))
    @settings(max_examples=200, deadline=None)
    def test_increasing_and_bounded(self, d, delta):
        cam = CameraModel(**PAPER_CAM)
        assert noise_variance(d, cam) < noise_variance(d + delta, cam) <= cam.noise_a

    def test_camera_validation(self):
        with pytest.raises(ValueError):
            CameraModel(**{**PAPER_CAM, "fov_h": 0})
        with pytest.raises(ValueError):
            CameraModel(**{**PAPER_CAM, "d_min": 9})
        with pytest.raises(ValueError):
            CameraModel(**{**PAPER_CAM, "alpha_max": 95})


class TestSimulateMeasurement:
    def setup_method(self):
        self.mesh = single_facet_mesh()
        self.cam = CameraModel(**{**PAPER_CAM, "pitch": 0})
        self.vp = Viewpoint([4.0, 0, 0], math.pi)
        self.truth = GroundTruthField(np.array([1.25]))

    def test_tiny_noise_equals_truth(self):
        cam = CameraModel(**{**PAPER_CAM, "pitch": 0, "noise_a": 1e-18})
        obs = simulate_measurement(self.vp, self.truth, cam, self.mesh, rng_seed=3)
        assert obs.values[0] == pytest.approx(1.25, abs=1e-8)

    def test_deterministic(self):
        a = simulate_measurement(self.vp, self.truth, self.cam, self.mesh, rng_seed=42)
        b = simulate_measurement(self.vp, self.truth, self.cam, self.mesh, rng_seed=42)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.facet_indices, b.facet_indices)

    def test_noise_statistics(self):
        draws = np.array([
            simulate_measurement(self.vp, self.truth, self.cam, self.mesh,
                                 rng_seed=k).values[0]
            for k in range(10_000)])
        target = noise_variance(4.0, self.cam)
        assert draws.var() == pytest.approx(target, rel=0.05)
        assert draws.mean() == pytest.approx(1.25, abs=3 * math.sqrt(target / 10_000) + 1e-3)

    def test_empty_view_returns_none(self):
        vp = Viewpoint([100.0, 0, 0], 0.0)
        assert simulate_measurement(vp, self.truth, self.cam, self.mesh) is None


class TestYawLibrary:
    def test_faces_single_wall(self):
        # narrow fov: only the bin aimed straight at the facet sees it
        mesh = single_facet_mesh()
        cam = CameraModel(**{**PAPER_CAM, "pitch": 0, "fov_h": 20, "fov_v": 20})
        lib = build_yaw_library([np.array([4.0, 0, 0])], cam, mesh, yaw_bins=16)
        assert lib.yaws[0] == pytest.approx(math.pi)

    def test_tie_breaks_smallest_yaw(self):
        # one wall at azimuth -45 deg: with 4 bins and a wide fov both the
        # yaw=-pi/2 and yaw=0 candidates see it; the smaller yaw must win
        c = 4.0 * np.array([math.cos(-math.pi / 4), math.sin(-math.pi / 4), 0.0])
        u = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
        w = np.array([0.0, 0.0, 1.0])
        verts = np.array([c - u - w, c - u - w + 3 * w, c - u - w + 3 * u])
        mesh = mesh_from_arrays(verts, np.array([[0, 1, 2]]))
        assert np.allclose(np.cross(3 * w, 3 * u) / 9.0,
                           -np.array([1, -1, 0]) / math.sqrt(2))
        cam = CameraModel(**{**PAPER_CAM, "pitch": 0, "fov_h": 120})
        lib = build_yaw_library([np.zeros(3)], cam, mesh, yaw_bins=4)
        both = [len(visible_facets(Viewpoint(np.zeros(3), psi), cam, mesh))
                for psi in (-math.pi / 2, 0.0)]
        assert both == [1, 1]
        assert lib.yaws[0] == pytest.approx(-math.pi / 2)

    def test_library_yaw_is_optimal(self, tank400):
        cam = CameraModel(**PAPER_CAM)
        pos = np.array([10.0, 0.0, 10.0])
        lib = build_yaw_library([pos], cam, tank400, yaw_bins=16)
        best = len(visible_facets(Viewpoint(pos, lib.yaws[0]), cam, tank400))
        for k in range(16):
            psi = normalize_yaw(k * 2 * math.pi / 16)
            assert best >= len(visible_facets(Viewpoint(pos, psi), cam, tank400))

    def test_nearest_lookup(self):
        from surfipp.sensor import YawLibrary
        lib = YawLibrary(np.array([[0, 0, 0], [10, 0, 0]]), np.array([0.5, -1.0]))
        assert lib.nearest_yaw([1, 0, 0]) == 0.5
        assert lib.nearest_yaw([9, 1, 0]) == -1.0

    def test_min_bins(self):
        mesh = single_facet_mesh()
        cam = CameraModel(**PAPER_CAM)
        with pytest.raises(ValueError):
            build_yaw_library([np.zeros(3)], cam, mesh, yaw_bins=3)
