import numpy as np
import pytest

from sepmap.raster import MultiChannelRaster
from sepmap.raster_io import (from_u8, read_lkm, read_pgm, read_ppm, to_u8,
                              write_lkm, write_pgm, write_ppm)


def test_lkm_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(10):
        plane = rng.random((int(rng.integers(1, 40)), int(rng.integers(1, 40)))).astype(np.float32)
        path = tmp_path / f"m{i}.lkm"
        write_lkm(path, plane)
        back = read_lkm(path).plane(0)
        assert back.dtype == np.float32
        assert np.array_equal(back, plane)
        # write -> read -> write produces identical bytes
        path2 = tmp_path / f"m{i}b.lkm"
        write_lkm(path2, back)
        assert path.read_bytes() == path2.read_bytes()


def test_lkm_rejects_bad_magic(tmp_path):
    path = tmp_path / "x.lkm"
    path.write_bytes(b"NOPE" + b"\0" * 8)
    with pytest.raises(ValueError, match="LKM1"):
        read_lkm(path)


def test_lkm_rejects_truncated(tmp_path):
    plane = np.ones((4, 4), dtype=np.float32)
    path = tmp_path / "t.lkm"
    write_lkm(path, plane)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ValueError, match="bytes"):
        read_lkm(path)


def test_u8_quantization_round_trips():
    u8 = np.arange(256, dtype=np.uint8)
    assert np.array_equal(to_u8(from_u8(u8)), u8)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    plane = from_u8(rng.integers(0, 256, size=(9, 13)).astype(np.uint8))
    path = tmp_path / "img.pgm"
    write_pgm(path, plane)
    back = read_pgm(path)
    assert isinstance(back, MultiChannelRaster)
    assert np.array_equal(back.plane(0), plane)


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    rgb = from_u8(rng.integers(0, 256, size=(7, 5, 3)).astype(np.uint8))
    path = tmp_path / "img.ppm"
    write_ppm(path, rgb)
    assert np.array_equal(read_ppm(path).data, rgb)


def test_pgm_header_with_comment(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x00\x7f\xff\x01")
    plane = read_pgm(path).plane(0)
    assert plane.shape == (2, 2)
    assert plane[0, 0] == 0.0


def test_ppm_wrong_magic(tmp_path):
    path = tmp_path / "w.ppm"
    write_pgm(path, np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ValueError, match="P6"):
        read_ppm(path)
