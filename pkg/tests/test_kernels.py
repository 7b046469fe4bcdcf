import importlib
import subprocess
import sys

import numpy as np
import pytest

from xvaframe import _kernels_py, kernels

BACKENDS = kernels.available_backends()

# Philox4x32-10 known-answer vectors: (counter, key) -> output
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers(name, ctr, key, expected):
    k = kernels.get_backend(name)
    out = k.philox4x32(np.array([ctr], dtype=np.uint32), *key)
    assert tuple(int(x) for x in out[0]) == expected


def test_compiled_extension_is_built():
    assert "compiled" in BACKENDS


@pytest.mark.parametrize("name", BACKENDS)
def test_normals_are_standard(name):
    z = kernels.get_backend(name).philox_normals(7, 0, 0, 20000, 5)
    assert z.shape == (20000, 5)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


@pytest.mark.parametrize("name", BACKENDS)
def test_normals_path_ranges_compose(name):
    k = kernels.get_backend(name)
    full = k.philox_normals(3, 1, 0, 10, 4)
    part = k.philox_normals(3, 1, 6, 4, 4)
    np.testing.assert_array_equal(full[6:], part)
    assert not np.array_equal(full, k.philox_normals(3, 2, 0, 10, 4))


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    c, p = kernels.get_backend("compiled"), kernels.get_backend("python")
    # identical uniforms; the transforms may differ in the last ulp (libm vs numpy)
    np.testing.assert_allclose(c.philox_normals(11, 2, 5, 300, 9), p.philox_normals(11, 2, 5, 300, 9),
                               rtol=0, atol=1e-14)
    rng = np.random.default_rng(0)
    fwd = rng.uniform(50, 150, size=(40, 6))
    sd = np.array([0.0, 0.05, 0.1, 0.2, 0.3, 0.5])
    for call in (True, False):
        np.testing.assert_allclose(c.black_forward(fwd, 100.0, sd, call), p.black_forward(fwd, 100.0, sd, call),
                                   rtol=1e-13, atol=1e-12)
    x = rng.normal(size=(30, 8))
    wp, wn = rng.uniform(size=8), rng.uniform(size=8)
    np.testing.assert_allclose(c.split_weighted_sum(x, wp, wn), p.split_weighted_sum(x, wp, wn), rtol=1e-14)


def test_black_forward_limits():
    fwd = np.array([[80.0, 120.0]])
    np.testing.assert_allclose(_kernels_py.black_forward(fwd, 100.0, np.zeros(2), True), [[0.0, 20.0]])
    np.testing.assert_allclose(_kernels_py.black_forward(fwd, 100.0, np.zeros(2), False), [[20.0, 0.0]])
    # put-call parity
    sd = np.array([0.2, 0.4])
    c = _kernels_py.black_forward(fwd, 100.0, sd, True)
    p = _kernels_py.black_forward(fwd, 100.0, sd, False)
    np.testing.assert_allclose(c - p, fwd - 100.0, atol=1e-12)


def test_split_weighted_sum_matches_numpy():
    x = np.array([[1.0, -2.0, 3.0], [-1.0, 0.0, 2.0]])
    wp, wn = np.array([1.0, 2.0, 3.0]), np.array([10.0, 20.0, 30.0])
    np.testing.assert_allclose(_kernels_py.split_weighted_sum(x, wp, wn), [1 - 40 + 9, -10 + 6])


def test_env_selects_python_backend():
    code = "import xvaframe.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={"XVA_KERNELS": "python", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
