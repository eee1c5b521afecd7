import numpy as np
import pytest

import polarshape as ps
from polarshape.core import PolarshapeError

from conftest import random_unit_normals


class TestAngleConversions:
    def test_normal_from_angles_pole(self):
        np.testing.assert_allclose(ps.normal_from_angles(0.0, 0.0), [0, 0, 1])

    def test_normal_from_angles_grazing(self):
        np.testing.assert_allclose(
            ps.normal_from_angles(np.pi / 2, np.pi / 2), [0, 1, 0], atol=1e-15)

    def test_normal_from_angles_oblique(self):
        # phi = pi/4, theta = pi/3: (sqrt(6)/4, sqrt(6)/4, 1/2)
        n = ps.normal_from_angles(np.pi / 4, np.pi / 3)
        np.testing.assert_allclose(
            n, [np.sqrt(6) / 4, np.sqrt(6) / 4, 0.5], atol=1e-15)

    def test_angles_from_normal_pole_is_canonical(self):
        assert ps.angles_from_normal(np.array([0.0, 0.0, 1.0])) == (0.0, 0.0)

    def test_angles_from_normal_equator(self):
        az, ze = ps.angles_from_normal(np.array([1.0, 0.0, 0.0]))
        assert az == 0.0
        assert abs(ze - np.pi / 2) < 1e-15

    def test_angles_from_normal_oblique(self):
        az, ze = ps.angles_from_normal(
            np.array([np.sqrt(6) / 4, np.sqrt(6) / 4, 0.5]))
        assert abs(az - np.pi / 4) < 1e-12
        assert abs(ze - np.pi / 3) < 1e-12

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        normals = random_unit_normals(rng, 10_000)
        az, ze = ps.angles_from_normal(normals)
        back = ps.normal_from_angles(az, ze)
        assert np.abs(back - normals).max() < 1e-9

    def test_out_of_range_rejected(self):
        with pytest.raises(PolarshapeError):
            ps.normal_from_angles(-0.1, 0.2)
        with pytest.raises(PolarshapeError):
            ps.normal_from_angles(2 * np.pi, 0.2)
        with pytest.raises(PolarshapeError):
            ps.normal_from_angles(0.0, np.pi / 2 + 0.01)
        with pytest.raises(PolarshapeError):
            ps.angles_from_normal(np.array([0.0, 0.0, 2.0]))  # not unit
        with pytest.raises(PolarshapeError):
            ps.angles_from_normal(np.array([0.0, 0.0, -1.0]))  # rear-facing


class TestIntrinsics:
    def test_validation(self):
        with pytest.raises(PolarshapeError):
            ps.CameraIntrinsics(0.0, 1.0, 0.0, 0.0, 4, 4)
        with pytest.raises(PolarshapeError):
            ps.CameraIntrinsics(1.0, 1.0, 4.0, 0.0, 4, 4)

    def test_ray_grid_matches_projection(self):
        intr = ps.CameraIntrinsics(100.0, 120.0, 3.0, 2.0, 8, 6)
        rays = intr.ray_grid()
        pts = rays * 2.5
        u, v = intr.project(pts)
        uu, vv = np.meshgrid(np.arange(8), np.arange(6))
        np.testing.assert_allclose(u, uu, atol=1e-12)
        np.testing.assert_allclose(v, vv, atol=1e-12)


class TestGridTypes:
    def test_polarization_image_bounds(self):
        with pytest.raises(PolarshapeError):
            ps.PolarizationImage(np.full((2, 2, 4), 1.5))
        with pytest.raises(PolarshapeError):
            ps.PolarizationImage(np.zeros((2, 2, 3)))

    def test_angle_maps_dimension_mismatch(self):
        with pytest.raises(PolarshapeError):
            ps.AngleMaps(np.zeros((2, 2)), np.zeros((2, 3)), np.ones((2, 2), bool))

    def test_normal_map_unit_invariant(self):
        vec = np.zeros((2, 2, 3))
        vec[0, 0] = (0.5, 0.5, 0.5)  # norm != 1
        with pytest.raises(PolarshapeError):
            ps.NormalMap(vec)
        ps.NormalMap(vec, unit=False)  # soft maps allow sub-unit magnitude

    def test_normal_map_rejects_rear_facing(self):
        vec = np.zeros((1, 1, 3))
        vec[0, 0] = (0.0, 0.0, -1.0)
        with pytest.raises(PolarshapeError):
            ps.NormalMap(vec)

    def test_prob_maps_must_sum_to_one(self):
        p = np.full((2, 2), 0.5)
        with pytest.raises(PolarshapeError):
            ps.ProbMaps(p, p, p)
        ps.ProbMaps(p, p, np.zeros((2, 2)))

    def test_label_map_values(self):
        with pytest.raises(PolarshapeError):
            ps.LabelMap(np.full((2, 2), 3))

    def test_depth_map_rejects_nan(self):
        d = np.ones((2, 2))
        d[0, 0] = np.nan
        with pytest.raises(PolarshapeError):
            ps.DepthMap(d)

    def test_depth_map_validity(self):
        d = ps.DepthMap(np.array([[1.0, 0.0], [-2.0, 3.0]]))
        np.testing.assert_array_equal(d.valid, [[True, False], [False, True]])

    def test_trimesh_rejects_bad_indices(self):
        v = np.eye(3)
        with pytest.raises(PolarshapeError):
            ps.TriMesh(v, np.array([[0, 1, 3]]))

    def test_trimesh_rejects_degenerate(self):
        v = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])  # collinear
        with pytest.raises(PolarshapeError):
            ps.TriMesh(v, np.array([[0, 1, 2]]))

    def test_body_params_dimensions(self):
        ps.BodyParams(np.zeros(10), np.zeros(72), np.zeros(3))
        with pytest.raises(PolarshapeError):
            ps.BodyParams(np.zeros(9), np.zeros(72), np.zeros(3))
        assert ps.BodyParams(np.zeros(10), np.zeros(72), np.zeros(3)).as_vector().shape == (85,)

    def test_skeleton_shape(self):
        with pytest.raises(PolarshapeError):
            ps.Skeleton(np.zeros((23, 3)))

    def test_types_are_immutable(self):
        n = ps.NormalMap(np.zeros((2, 2, 3)))
        with pytest.raises(ValueError):
            n.vectors[0, 0, 0] = 1.0
        d = ps.DepthMap(np.ones((2, 2)))
        with pytest.raises(ValueError):
            d.depth[0, 0] = 2.0
