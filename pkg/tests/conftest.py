import numpy as np
import pytest

import polarshape as ps


@pytest.fixture(scope="session")
def sphere_scene():
    """Analytic sphere on the optical axis with an exact-center pixel.

    129x129 with px = py = 64 puts pixel (64, 64) exactly on the axis, so
    the hand-computable examples (center normal = (0,0,1), nearest depth =
    center_z - radius) hold exactly.
    """
    intr = ps.CameraIntrinsics(fx=150.0, fy=150.0, px=64.0, py=64.0,
                               width=129, height=129)
    scene = ps.SyntheticScene(kind="sphere", center=(0.0, 0.0, 3.0), radius=1.0)
    depth, normals, gray = ps.render_scene(scene, intr)
    return intr, scene, depth, normals, gray


@pytest.fixture(scope="session")
def sphere_polar(sphere_scene):
    intr, scene, depth, normals, gray = sphere_scene
    img = ps.synthesize_polarization(normals, gray, intr)
    return intr, normals, img


def random_unit_normals(rng, count, min_nz=1e-3):
    """Uniformly random camera-facing unit vectors."""
    v = rng.normal(size=(count, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    v[:, 2] = np.abs(v[:, 2]) + min_nz
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v
