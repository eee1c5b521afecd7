import numpy as np
import pytest

import polarshape as ps
from polarshape import io as pio
from polarshape.core import PolarshapeError


class TestPfm:
    def test_grayscale_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(5, 7)).astype(np.float32)
        path = tmp_path / "map.pfm"
        pio.write_pfm(path, data)
        back = pio.read_pfm(path)
        assert back.dtype == np.float32
        np.testing.assert_array_equal(back, data)

    def test_three_channel_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(4, 6, 3)).astype(np.float32)
        path = tmp_path / "normals.pfm"
        pio.write_pfm(path, data)
        np.testing.assert_array_equal(pio.read_pfm(path), data)

    def test_reads_little_endian_header(self, tmp_path):
        payload = np.arange(35, dtype="<f4").tobytes()
        path = tmp_path / "hand.pfm"
        path.write_bytes(b"Pf\n7 5\n-1.0\n" + payload)
        arr = pio.read_pfm(path)
        assert arr.shape == (5, 7)
        # PFM rows are stored bottom-to-top
        np.testing.assert_array_equal(arr[-1], np.arange(7, dtype=np.float32))

    def test_reads_big_endian(self, tmp_path):
        data = np.arange(6, dtype=">f4").reshape(2, 3)
        path = tmp_path / "big.pfm"
        path.write_bytes(b"Pf\n3 2\n1.0\n" + data[::-1].tobytes())
        np.testing.assert_array_equal(pio.read_pfm(path),
                                      data.astype(np.float32))

    def test_truncated_payload_reports_byte_counts(self, tmp_path):
        path = tmp_path / "short.pfm"
        path.write_bytes(b"Pf\n7 5\n-1.0\n" + b"\x00" * 100)
        with pytest.raises(PolarshapeError, match="expected 140 bytes, got 100"):
            pio.read_pfm(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"P6\n7 5\n-1.0\n" + b"\x00" * 140)
        with pytest.raises(PolarshapeError, match="magic"):
            pio.read_pfm(path)

    def test_malformed_dimensions_rejected(self, tmp_path):
        path = tmp_path / "dims.pfm"
        path.write_bytes(b"Pf\nseven 5\n-1.0\n")
        with pytest.raises(PolarshapeError):
            pio.read_pfm(path)

    def test_unsupported_shape_rejected(self, tmp_path):
        with pytest.raises(PolarshapeError):
            pio.write_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 4)))


class TestPolarPng:
    def test_round_trip_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(2)
        img = ps.PolarizationImage(rng.uniform(0, 1, (6, 5, 4)))
        prefix = str(tmp_path / "polar")
        pio.write_polar_png(prefix, img)
        back = pio.read_polar_png(prefix)
        assert np.abs(back.channels - img.channels).max() <= 1 / 510 + 1e-12

    def test_exact_byte_values(self, tmp_path):
        img = ps.PolarizationImage(np.array([[[1.0, 0.5, 0.0, 128 / 255]]]))
        prefix = str(tmp_path / "p")
        pio.write_polar_png(prefix, img)
        back = pio.read_polar_png(prefix)
        np.testing.assert_allclose(back.channels[0, 0],
                                   [1.0, 128 / 255, 0.0, 128 / 255])

    def test_quantized_stack_round_trips_exactly(self, tmp_path):
        rng = np.random.default_rng(3)
        img = ps.quantize_8bit(ps.PolarizationImage(rng.uniform(0, 1, (4, 4, 4))))
        prefix = str(tmp_path / "q")
        pio.write_polar_png(prefix, img)
        np.testing.assert_array_equal(pio.read_polar_png(prefix).channels,
                                      img.channels)

    def test_missing_channel_rejected(self, tmp_path):
        img = ps.PolarizationImage(np.zeros((2, 2, 4)))
        prefix = str(tmp_path / "m")
        paths = pio.write_polar_png(prefix, img)
        import os
        os.remove(paths[2])
        with pytest.raises(PolarshapeError, match="_090"):
            pio.read_polar_png(prefix)

    def test_mismatched_sizes_rejected(self, tmp_path):
        from PIL import Image
        prefix = str(tmp_path / "s")
        for k, suffix in enumerate(("000", "045", "090", "135")):
            size = (4, 4) if k < 3 else (5, 4)
            Image.new("L", size).save(f"{prefix}_{suffix}.png")
        with pytest.raises(PolarshapeError, match="mismatched"):
            pio.read_polar_png(prefix)


class TestPolarPfm:
    def test_float_stack_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        img = ps.PolarizationImage(
            rng.uniform(0, 1, (3, 4, 4)).astype(np.float32).astype(np.float64))
        prefix = str(tmp_path / "f")
        pio.write_polar_pfm(prefix, img)
        np.testing.assert_array_equal(pio.read_polar_pfm(prefix).channels,
                                      img.channels)


class TestObj:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        mesh = ps.icosphere(1, 1.2345678901234567, (0.1, -0.2, 3.0))
        path = tmp_path / "mesh.obj"
        pio.write_obj(path, mesh)
        back = pio.read_obj(path)
        np.testing.assert_array_equal(back.vertices, mesh.vertices)
        np.testing.assert_array_equal(back.faces, mesh.faces)

    def test_quad_face_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(PolarshapeError, match=r"quad\.obj:5"):
            pio.read_obj(path)

    def test_ignores_comments_and_normals(self, tmp_path):
        path = tmp_path / "full.obj"
        path.write_text("# comment\nv 0 0 1\nvn 0 0 1\nv 1 0 1\nv 0 1 1\n"
                        "f 1/1/1 2/2/2 3/3/3\n")
        mesh = pio.read_obj(path)
        assert mesh.num_vertices == 3 and mesh.num_faces == 1


class TestJson:
    def test_intrinsics_round_trip(self, tmp_path):
        intr = ps.CameraIntrinsics(150.5, 151.25, 63.5, 64.5, 128, 130)
        path = tmp_path / "intr.json"
        pio.write_intrinsics_json(path, intr)
        assert pio.read_intrinsics_json(path) == intr

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"fx": 1.0, "px": 0.0, "py": 0.0, "width": 4, "height": 4}')
        with pytest.raises(PolarshapeError, match="'fy'"):
            pio.read_intrinsics_json(path)

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text('{"fx": 1, "fy": 1, "px": 0, "py": 0, "width": 4, '
                        '"height": 4, "skew": 0}')
        with pytest.raises(PolarshapeError, match="skew"):
            pio.read_intrinsics_json(path)

    def test_skeleton_round_trip(self, tmp_path):
        sk = ps.Skeleton(np.random.default_rng(6).normal(size=(24, 3)))
        path = tmp_path / "sk.json"
        pio.write_skeleton_json(path, sk)
        np.testing.assert_array_equal(pio.read_skeleton_json(path).joints, sk.joints)

    def test_body_params_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        bp = ps.BodyParams(rng.normal(size=10), rng.normal(size=72),
                           rng.normal(size=3))
        path = tmp_path / "bp.json"
        pio.write_body_params_json(path, bp)
        back = pio.read_body_params_json(path)
        np.testing.assert_array_equal(back.as_vector(), bp.as_vector())
