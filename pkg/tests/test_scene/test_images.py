import numpy as np

from physmorph.scene import read_pnm, write_pgm16, write_ppm


def test_ppm(tmp_path, rng):
    rgb = rng.random((5, 7, 3))
    rgb[0, 0] = [-1.0, 2.0, 0.5]
    path = str(tmp_path / "frames" / "image.ppm")
    write_ppm(path, rgb)
    pixels = read_pnm(path)
    assert pixels.shape == (5, 7, 3)
    assert pixels.dtype == np.uint8
    assert pixels[0, 0].tolist() == [0, 255, 128]
    assert np.abs(pixels / 255.0 - np.clip(rgb, 0, 1)).max() <= 0.5 / 255 + 1e-12


def test_pgm16(tmp_path):
    values = np.array([[0.0, 5.0, 10.0], [-3.0, 20.0, 2.5]])
    path = str(tmp_path / "depth.pgm")
    write_pgm16(path, values, lo=0.0, hi=10.0)
    pixels = read_pnm(path)
    assert pixels.shape == (2, 3)
    assert pixels.tolist() == [[0, 32768, 65535], [0, 65535, 16384]]
    with open(path, "rb") as f:
        assert f.read(2) == b"P5"


def test_pgm16_flat_range(tmp_path):
    path = str(tmp_path / "flat.pgm")
    write_pgm16(path, np.ones((2, 2)), lo=1.0, hi=1.0)
    assert np.all(read_pnm(path) == 0)
