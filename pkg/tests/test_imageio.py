import numpy as np
import pytest
from PIL import Image

from dualgrid.errors import ParameterError
from dualgrid.imageio import load_image, load_psf, save_image
from dualgrid.imaging import centered
from dualgrid.phantom import disc_psf


def test_png_8bit(tmp_path):
    q = np.arange(256, dtype=np.uint8).reshape(16, 16)
    Image.fromarray(q).save(tmp_path / "a.png")
    np.testing.assert_array_equal(load_image(tmp_path / "a.png"), q / 255.0)


def test_png_16bit_round_trip(tmp_path, rng):
    x = rng.random((16, 16))
    save_image(tmp_path / "a.png", x)
    assert np.abs(load_image(tmp_path / "a.png") - x).max() <= 0.5 / 65535 + 1e-15


def test_pgm_binary(tmp_path, rng):
    x = rng.random((12, 12))
    save_image(tmp_path / "a.pgm", x, bits=8)
    assert (tmp_path / "a.pgm").read_bytes()[:2] == b"P5"
    assert np.abs(load_image(tmp_path / "a.pgm") - x).max() <= 0.5 / 255 + 1e-15


def test_pgm_ascii_custom_maxval(tmp_path):
    (tmp_path / "a.pgm").write_text("P2\n# comment\n3 2\n1000\n0 500 1000\n250 750 100\n")
    expected = np.array([[0, 500, 1000], [250, 750, 100]]) / 1000
    np.testing.assert_allclose(load_image(tmp_path / "a.pgm"), expected, atol=0.5 / 65535)


def test_pgm_small_maxval(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P5\n2 1\n100\n" + bytes([50, 100]))
    np.testing.assert_allclose(load_image(tmp_path / "a.pgm"), [[0.5, 1.0]], atol=0.5 / 255)


def test_npy_verbatim(tmp_path, rng):
    x = rng.standard_normal((10, 10))
    np.save(tmp_path / "a.npy", x)
    assert load_image(tmp_path / "a.npy").tobytes() == x.tobytes()


def test_rejects_color(tmp_path):
    Image.new("RGB", (8, 8)).save(tmp_path / "c.png")
    with pytest.raises(ParameterError):
        load_image(tmp_path / "c.png")


def test_clamps(tmp_path):
    save_image(tmp_path / "a.png", np.array([[-1.0, 2.0]] * 2))
    np.testing.assert_array_equal(load_image(tmp_path / "a.png"), [[0.0, 1.0]] * 2)


def test_unknown_format(tmp_path):
    with pytest.raises(ParameterError):
        save_image(tmp_path / "a.tif", np.zeros((8, 8)))


def test_psf_full_size(tmp_path):
    p = disc_psf(3, 32)
    np.save(tmp_path / "k.npy", centered(p) * 7.0)
    np.testing.assert_allclose(load_psf(tmp_path / "k.npy", 32), p, atol=1e-15)


def test_psf_stencil(tmp_path):
    k = np.zeros((5, 5))
    k[2, 2] = 2.0
    k[2, 3] = 2.0
    np.save(tmp_path / "k.npy", k)
    p = load_psf(tmp_path / "k.npy", 16)
    assert p[0, 0] == 0.5 and p[0, 1] == 0.5 and p.sum() == 1.0


def test_psf_negative(tmp_path):
    np.save(tmp_path / "k.npy", -np.ones((3, 3)))
    with pytest.raises(ParameterError):
        load_psf(tmp_path / "k.npy", 16)
