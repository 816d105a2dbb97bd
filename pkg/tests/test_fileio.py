import numpy as np
import pytest

from xva.errors import FormatError
from xva.fileio import (
    read_checkpoint,
    read_pgm,
    read_ppm,
    read_tensor,
    write_checkpoint,
    write_pgm,
    write_ppm,
    write_tensor,
)


class TestTensorFile:
    def test_round_trip_is_float32_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.normal(size=(3, 4, 5))
        path = tmp_path / "t.xvt"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == np.float64
        np.testing.assert_array_equal(back, arr.astype(np.float32).astype(np.float64))

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.xvt"
        write_tensor(path, np.zeros((2, 3)))
        blob = path.read_bytes()
        assert blob[:4] == b"XVAT"
        # version 1, dtype 0 (f32), ndim 2, dims 2x3, then 6 floats
        assert blob[4:8] == bytes([1, 0, 0, 2])
        assert len(blob) == 8 + 16 + 24

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.xvt"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.xvt"
        write_tensor(path, np.zeros(8))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.xvt"
        write_tensor(path, np.zeros(2))
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FormatError):
            read_tensor(path)


class TestCheckpointFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        tensors = {"fc.w": rng.normal(size=(4, 6)), "fc.b": np.zeros(4),
                   "conv.w": rng.normal(size=(2, 3, 3, 3))}
        path = tmp_path / "m.xvc"
        write_checkpoint(path, tensors)
        back = read_checkpoint(path)
        assert sorted(back) == sorted(tensors)
        for name in tensors:
            np.testing.assert_array_equal(
                back[name], tensors[name].astype(np.float32).astype(np.float64))

    def test_bytes_independent_of_insertion_order(self, tmp_path):
        a, b = np.ones(3), np.zeros((2, 2))
        p1, p2 = tmp_path / "a.xvc", tmp_path / "b.xvc"
        write_checkpoint(p1, {"x": a, "y": b})
        write_checkpoint(p2, {"y": b, "x": a})
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.xvc"
        path.write_bytes(b"XXXX" + b"\x00" * 8)
        with pytest.raises(FormatError):
            read_checkpoint(path)


class TestPixmaps:
    def test_ppm_round_trip_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(2)
        img = rng.uniform(0, 1, size=(3, 5, 7))
        path = tmp_path / "img.ppm"
        write_ppm(path, img)
        back = read_ppm(path)
        assert np.abs(back - img).max() <= 1.0 / 255.0 + 1e-12

    def test_single_white_pixel_byte_count(self, tmp_path):
        # oracle: the header grammar is "P6\n<w> <h>\n255\n", so a 1x1 file
        # is len(header) + 3 payload bytes
        expected_header = b"P6\n1 1\n255\n"
        path = tmp_path / "white.ppm"
        write_ppm(path, np.ones((3, 1, 1)))
        blob = path.read_bytes()
        assert blob == expected_header + b"\xff\xff\xff"
        assert len(blob) == len(expected_header) + 3

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "img.ppm"
        write_ppm(path, np.zeros((3, 4, 4)))
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(FormatError):
            read_ppm(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "img.ppm"
        path.write_bytes(b"P5\n1 1\n255\n\xff")
        with pytest.raises(FormatError):
            read_ppm(path)

    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 1, size=(6, 4))
        path = tmp_path / "map.pgm"
        write_pgm(path, img)
        back = read_pgm(path)
        assert np.abs(back - img).max() <= 1.0 / 255.0 + 1e-12
