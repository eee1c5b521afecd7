import numpy as np
import pytest

import polarshape as ps
from polarshape.core import PolarshapeError
from polarshape.meshops import icosphere, upsample_mesh


INTR = ps.CameraIntrinsics(fx=150.0, fy=150.0, px=64.0, py=64.0,
                           width=129, height=129)


def quad_mesh(z=2.0, half=1.0):
    """Fronto-parallel square of two triangles at depth z."""
    v = np.array([[-half, -half, z], [half, -half, z],
                  [half, half, z], [-half, half, z]])
    f = np.array([[0, 1, 2], [0, 2, 3]])
    return ps.TriMesh(v, f)


class TestRenderBaseDepth:
    def test_single_triangle_depth(self):
        v = np.array([[-0.2, -0.2, 2.0], [0.2, -0.2, 2.0], [0.0, 0.2, 2.0]])
        mesh = ps.TriMesh(v, np.array([[0, 1, 2]]))
        depth = ps.render_base_depth(mesh, INTR)
        assert abs(depth.depth[64, 64] - 2.0) < 1e-12
        assert not depth.valid[0, 0]

    def test_zbuffer_keeps_nearest(self):
        v = np.array([[-0.2, -0.2, 2.0], [0.2, -0.2, 2.0], [0.0, 0.2, 2.0],
                      [-0.2, -0.2, 1.0], [0.2, -0.2, 1.0], [0.0, 0.2, 1.0]])
        mesh = ps.TriMesh(v, np.array([[0, 1, 2], [3, 4, 5]]))
        depth = ps.render_base_depth(mesh, INTR)
        assert abs(depth.depth[64, 64] - 1.0) < 1e-12

    def test_icosphere_center_depth_within_chord_error(self):
        mesh = icosphere(2, 1.0, (0.0, 0.0, 3.0))
        depth = ps.render_base_depth(mesh, INTR)
        # flat triangles cut inside the sphere by at most the plane offset
        center = np.array([0.0, 0.0, 3.0])
        tri = mesh.vertices[mesh.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        n /= np.linalg.norm(n, axis=1)[:, None]
        plane_dist = np.abs(np.einsum("fk,fk->f", tri[:, 0] - center, n))
        chord = 1.0 - plane_dist.min()
        assert 2.0 <= depth.depth[64, 64] <= 2.0 + chord

    def test_mesh_behind_camera_rejected(self):
        v = np.array([[-1.0, -1.0, -2.0], [1.0, -1.0, 2.0], [0.0, 1.0, 2.0]])
        mesh = ps.TriMesh(v, np.array([[0, 1, 2]]))
        with pytest.raises(PolarshapeError):
            ps.render_base_depth(mesh, INTR)

    def test_deterministic(self):
        mesh = icosphere(2, 1.0, (0.0, 0.0, 3.0))
        a = ps.render_base_depth(mesh, INTR)
        b = ps.render_base_depth(mesh, INTR)
        np.testing.assert_array_equal(a.depth, b.depth)


class TestUpsample:
    def test_zero_levels_identity(self):
        mesh = quad_mesh()
        out = upsample_mesh(mesh, 0)
        np.testing.assert_array_equal(out.vertices, mesh.vertices)
        np.testing.assert_array_equal(out.faces, mesh.faces)

    def test_single_triangle_split(self):
        v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        out = upsample_mesh(ps.TriMesh(v, np.array([[0, 1, 2]])), 1)
        assert out.num_vertices == 6
        assert out.num_faces == 4

    def test_euler_characteristic_preserved(self):
        mesh = icosphere(1, 1.0, (0.0, 0.0, 3.0))

        def euler(m):
            edges = set()
            for a, b, c in m.faces:
                edges.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)),
                              (min(c, a), max(c, a))})
            return m.num_vertices - len(edges) + m.num_faces

        assert euler(mesh) == 2
        for lv in (1, 2):
            assert euler(upsample_mesh(mesh, lv)) == 2

    def test_new_vertices_lie_on_original_edges(self):
        mesh = quad_mesh()
        out = upsample_mesh(mesh, 1)
        originals = mesh.vertices
        for vtx in out.vertices[len(originals):]:
            # midpoint of some original edge
            mids = 0.5 * (originals[:, None, :] + originals[None, :, :])
            assert np.isclose(mids, vtx).all(axis=-1).any()

    def test_negative_levels_rejected(self):
        with pytest.raises(PolarshapeError):
            upsample_mesh(quad_mesh(), -1)

    def test_nonmanifold_rejected(self):
        v = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 0.3]])
        f = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])  # edge (0,1) used 3x
        with pytest.raises(PolarshapeError, match="non-manifold"):
            upsample_mesh(ps.TriMesh(v, f), 1)


class TestDeform:
    def test_identity_when_refined_equals_base(self):
        mesh = quad_mesh(half=0.6)
        base = ps.render_base_depth(mesh, INTR)
        out = ps.deform_to_depth(mesh, base, base, INTR)
        np.testing.assert_array_equal(out.vertices, mesh.vertices)

    def test_uniform_offset_moves_every_visible_vertex(self):
        mesh = quad_mesh(half=0.6)
        base = ps.render_base_depth(mesh, INTR)
        shifted = np.where(base.valid, base.depth + 0.005, 0.0)
        out = ps.deform_to_depth(mesh, ps.DepthMap(shifted), base, INTR, step=1.0)
        np.testing.assert_allclose(out.vertices[:, 2], mesh.vertices[:, 2] + 0.005,
                                   atol=1e-9)
        # displacement is along the viewing ray: direction preserved
        ratio = out.vertices / mesh.vertices
        np.testing.assert_allclose(ratio - ratio[:, 2:3], 0.0, atol=1e-12)

    def test_occluded_vertices_use_neighbor_average(self):
        mesh = icosphere(3, 1.0, (0.0, 0.0, 3.0))
        base = ps.render_base_depth(mesh, INTR)
        delta = 0.004
        shifted = np.where(base.valid, base.depth + delta, 0.0)
        out = ps.deform_to_depth(mesh, ps.DepthMap(shifted), base, INTR, step=1.0)
        moved = np.abs(out.vertices - mesh.vertices).max(axis=1)
        # back hemisphere is invisible, yet no vertex moves more than the
        # depth change allows along its ray
        assert moved.max() <= delta * 1.5 + 1e-9
        zshift = out.vertices[:, 2] - mesh.vertices[:, 2]
        # with a uniform offset, neighbor-averaged displacements equal the
        # offset too: every shift is exactly 0 (isolated) or delta
        is_delta = np.abs(zshift - delta) < 1e-9
        is_zero = np.abs(zshift) < 1e-12
        assert (is_delta | is_zero).all()
        # the strict front cone is unambiguously visible
        strict_front = mesh.vertices[:, 2] < 2.2
        assert is_delta[strict_front].all()
        assert is_delta.mean() > 0.25

    def test_out_of_image_vertices_are_invisible(self):
        v = np.array([[-0.5, -0.5, 2.0], [0.5, -0.5, 2.0], [0.0, 0.5, 2.0],
                      [50.0, 0.0, 2.0]])
        mesh = ps.TriMesh(v, np.array([[0, 1, 2], [1, 3, 2]]))
        base = ps.render_base_depth(mesh, INTR)
        shifted = np.where(base.valid, base.depth + 0.003, 0.0)
        out = ps.deform_to_depth(mesh, ps.DepthMap(shifted), base, INTR)
        # the off-screen vertex inherits the mean displacement of visible
        # neighbors instead of sampling the depth map
        assert abs(out.vertices[3, 2] - 2.003) < 1e-6


class TestScaledRigidIcp:
    def test_identity_transform(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(80, 3))
        s, R, t, aligned = ps.scaled_rigid_icp(pts, pts)
        assert abs(s - 1.0) < 1e-12
        np.testing.assert_allclose(R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(t, 0.0, atol=1e-12)
        np.testing.assert_allclose(aligned, pts, atol=1e-12)

    def test_known_similarity_recovery(self):
        rng = np.random.default_rng(0)
        src = rng.normal(size=(500, 3))
        A = rng.normal(size=(3, 3))
        Q, Rq = np.linalg.qr(A)
        Q *= np.sign(np.diag(Rq))
        if np.linalg.det(Q) < 0:
            Q[:, 0] *= -1
        t0 = rng.normal(size=3)
        tgt = 2.0 * src @ Q.T + t0
        s, R, t, aligned = ps.scaled_rigid_icp(src, tgt)
        assert abs(s - 2.0) < 1e-6
        assert np.abs(R - Q).max() < 1e-6
        assert np.abs(t - t0).max() < 1e-6
        assert np.abs(aligned - tgt).max() < 1e-6

    def test_residual_non_increasing(self):
        rng = np.random.default_rng(9)
        src = rng.normal(size=(200, 3))
        angle = 0.4
        R0 = np.array([[np.cos(angle), -np.sin(angle), 0],
                       [np.sin(angle), np.cos(angle), 0], [0, 0, 1]])
        tgt = 1.3 * src @ R0.T + np.array([0.2, -0.1, 0.5])
        tgt += rng.normal(scale=0.01, size=tgt.shape)
        from scipy.spatial import cKDTree
        tree = cKDTree(tgt)
        prev = np.inf
        for k in range(1, 8):
            s, R, t, aligned = ps.scaled_rigid_icp(src, tgt, max_iter=k, tol=0.0)
            res = tree.query(aligned)[0].mean()
            assert res <= prev + 1e-12
            prev = res

    def test_degenerate_source_rejected(self):
        line = np.outer(np.arange(10, dtype=float), [1.0, 2.0, 3.0])
        tgt = np.random.default_rng(1).normal(size=(20, 3))
        with pytest.raises(PolarshapeError):
            ps.scaled_rigid_icp(line, tgt)
        with pytest.raises(PolarshapeError):
            ps.scaled_rigid_icp(np.ones((5, 3)), tgt)

    def test_restores_surface_error_after_perturbation(self):
        sphere = icosphere(2, 1.0, (0.0, 0.0, 0.0))
        stretched = np.array(sphere.vertices) * [1.0, 0.7, 0.45] + [0.0, 0.0, 3.0]
        mesh = ps.TriMesh(stretched, sphere.faces)
        pts = np.array(mesh.vertices)
        angle = 0.7
        R0 = np.array([[np.cos(angle), 0, np.sin(angle)],
                       [0, 1, 0], [-np.sin(angle), 0, np.cos(angle)]])
        moved = 1.7 * pts @ R0.T + np.array([0.3, -0.2, 0.9])
        s, R, t, aligned = ps.scaled_rigid_icp(moved, pts)
        before = ps.surface_error(mesh, mesh)
        after = ps.surface_error(ps.TriMesh(aligned, mesh.faces), mesh)
        assert abs(after - before) < 1e-6


class TestSurfaceError:
    def test_identity_zero(self):
        mesh = quad_mesh()
        assert ps.surface_error(mesh, mesh) == 0.0

    def test_translation_bound(self):
        mesh = icosphere(1, 1.0, (0.0, 0.0, 3.0))
        shifted = ps.TriMesh(mesh.vertices + [0.003, 0.0, 0.0], mesh.faces)
        err = ps.surface_error(shifted, mesh)
        assert 0.0 < err <= 3.0 + 1e-9

    def test_two_vertex_toy(self):
        pred = ps.TriMesh(np.array([[0.0, 0, 0], [0, 0, 0.010]]),
                          np.zeros((0, 3), dtype=np.int64))
        truth = ps.TriMesh(np.array([[0.0, 0, 0.001]]), np.zeros((0, 3), dtype=np.int64))
        assert abs(ps.surface_error(pred, truth) - 5.0) < 1e-12

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        pred = ps.TriMesh(rng.normal(size=(400, 3)), np.zeros((0, 3), dtype=np.int64))
        truth = ps.TriMesh(rng.normal(size=(500, 3)), np.zeros((0, 3), dtype=np.int64))
        brute = np.sqrt(((pred.vertices[:, None, :] - truth.vertices[None, :, :]) ** 2)
                        .sum(axis=2)).min(axis=1).mean() * 1000.0
        assert ps.surface_error(pred, truth) == pytest.approx(brute, abs=1e-12)

    def test_empty_rejected(self):
        empty = ps.TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        with pytest.raises(PolarshapeError):
            ps.surface_error(empty, quad_mesh())


class TestSkeletonMetrics:
    def test_mpjpe_identity(self):
        sk = ps.Skeleton(np.random.default_rng(0).normal(size=(24, 3)))
        assert ps.mpjpe(sk, sk, 24) == 0.0
        assert ps.mpjpe(sk, sk, 20) == 0.0

    def test_mpjpe_two_joints_off(self):
        joints = np.zeros((24, 3))
        pred = joints.copy()
        pred[3, 0] = 0.003
        pred[7, 1] = 0.005
        err = ps.mpjpe(ps.Skeleton(pred), ps.Skeleton(joints), 24)
        assert abs(err - (3.0 + 5.0) / 24.0) < 1e-12

    def test_mpjpe_global_offset(self):
        rng = np.random.default_rng(6)
        joints = rng.normal(size=(24, 3))
        pred = joints + [0.010, 0.0, 0.0]
        assert abs(ps.mpjpe(ps.Skeleton(pred), ps.Skeleton(joints), 24) - 10.0) < 1e-9
        assert abs(ps.mpjpe(ps.Skeleton(pred), ps.Skeleton(joints), 20) - 10.0) < 1e-9

    def test_mpjpe_subset_excludes_configured_joints(self):
        joints = np.zeros((24, 3))
        pred = joints.copy()
        for j in ps.meshops.DEFAULT_EXCLUDED_JOINTS:
            pred[j, 2] = 1.0  # huge error on the excluded joints only
        assert ps.mpjpe(ps.Skeleton(pred), ps.Skeleton(joints), 20) == 0.0
        assert ps.mpjpe(ps.Skeleton(pred), ps.Skeleton(joints), 24) > 0.0

    def test_param_loss_identity(self):
        params = ps.BodyParams(np.ones(10), np.ones(72), np.ones(3))
        sk = ps.Skeleton(np.zeros((24, 3)))
        assert ps.param_loss(params, params, sk, sk) == 0.0

    def test_param_loss_translation_term(self):
        a = ps.BodyParams(np.zeros(10), np.zeros(72), np.array([0.1, 0.0, 0.0]))
        b = ps.BodyParams(np.zeros(10), np.zeros(72), np.zeros(3))
        sk = ps.Skeleton(np.zeros((24, 3)))
        assert abs(ps.param_loss(a, b, sk, sk) - 1.0) < 1e-12

    def test_param_loss_shape_term(self):
        beta = np.zeros(10)
        beta[4] = 1.0
        a = ps.BodyParams(beta, np.zeros(72), np.zeros(3))
        b = ps.BodyParams(np.zeros(10), np.zeros(72), np.zeros(3))
        sk = ps.Skeleton(np.zeros((24, 3)))
        assert abs(ps.param_loss(a, b, sk, sk) - 0.2) < 1e-12


class TestMeshPipelineIdentity:
    def test_render_refine_deform_round_trip(self):
        mesh = quad_mesh(z=2.0, half=0.6)
        base = ps.render_base_depth(mesh, INTR)
        vec = np.zeros((INTR.height, INTR.width, 3))
        vec[base.valid] = (0.0, 0.0, 1.0)
        sol = ps.refine_depth(ps.NormalMap(vec), base, INTR)
        out = ps.deform_to_depth(mesh, sol.depth, base, INTR)
        assert np.abs(out.vertices - mesh.vertices).max() < 1e-6
