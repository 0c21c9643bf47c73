import itertools

import numpy as np
import pytest

from dualgrid.phantom import reference_scene, render_scene


def circular_convolve_bruteforce(f, p):
    """Direct periodic convolution sum, O(n**4)."""
    n0, n1 = f.shape
    out = np.zeros_like(f, dtype=np.float64)
    for i, j in itertools.product(range(n0), range(n1)):
        acc = 0.0
        for k, l in itertools.product(range(n0), range(n1)):
            acc += f[(i - k) % n0, (j - l) % n1] * p[k, l]
        out[i, j] = acc
    return out


def circulant_matrix(p):
    """Dense matrix of ``f -> p * f`` on row-major vectorized images."""
    n = p.shape[0]
    idx = np.arange(n)
    i, j, k, l = np.meshgrid(idx, idx, idx, idx, indexing="ij")
    return p[(i - k) % n, (j - l) % n].reshape(n * n, n * n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def phantom512():
    return render_scene(reference_scene(512))


@pytest.fixture(scope="session")
def phantom64():
    """64x64 crop of the 512 scene around the bright disc and inner triangle."""
    return np.ascontiguousarray(render_scene(reference_scene(512))[100:164, 100:164])
