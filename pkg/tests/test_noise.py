from __future__ import annotations

import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from fracshe import _pykernels
from fracshe._backend import BACKEND, kernels
from fracshe.noise import NoiseBundle, TimeGrid, increment, normals, restrict


def numpy_philox_word0(seed, k, j, path):
    # numpy's Philox emits the block for counter + 1 first, so start one step back (k >= 1)
    bg = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64),
                          counter=np.array([k - 1, j, path, 0], dtype=np.uint64))
    return int(bg.random_raw(4)[0])


def oracle_normal(seed, k, j, path):
    w = numpy_philox_word0(seed, k, j, path)
    return special.ndtri(((w >> 11) + 0.5) * 2.0**-53)


@pytest.mark.parametrize("mod", [_pykernels, kernels], ids=["python", BACKEND])
def test_philox_matches_numpy(mod):
    seeds = [0, 7, 2**63 + 5]
    for seed in seeds:
        for k, j, path in [(1, 1, 0), (5, 3, 2), (123456, 77, 9)]:
            z = mod.normal_block(seed, path, j, j + 1, k, k + 1)[0, 0]
            assert z == pytest.approx(oracle_normal(seed, k, j, path), rel=1e-14, abs=1e-15)


def test_python_philox_word_bit_exact():
    for seed, k, j, path in [(7, 1, 1, 0), (3, 999, 12, 4), (2**64 - 1, 2, 2, 2)]:
        assert _pykernels.philox4x64(k, j, path, 0, seed, 0)[0] == numpy_philox_word0(seed, k, j, path)


def test_ndtri_against_scipy():
    u = np.concatenate([np.linspace(1e-300, 1e-10, 50), np.linspace(1e-6, 1 - 1e-6, 2001),
                        1 - np.linspace(1e-15, 1e-10, 50)])
    for mod in {_pykernels, kernels}:
        np.testing.assert_allclose(mod.ndtri(u), special.ndtri(u), rtol=1e-14, atol=1e-15)


def test_backends_agree_on_blocks():
    a = _pykernels.normal_block(11, 3, 1, 65, 0, 40)
    b = kernels.normal_block(11, 3, 1, 65, 0, 40)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)


def test_tridiag_solve_backends():
    rng = np.random.default_rng(0)
    n = 30
    lower, upper = rng.normal(size=n), rng.normal(size=n)
    diag = 5 + rng.random(n)
    rhs = rng.normal(size=(n, 4))
    dense = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    for mod in {_pykernels, kernels}:
        np.testing.assert_allclose(mod.tridiag_solve(lower, diag, upper, rhs), np.linalg.solve(dense, rhs), atol=1e-12)
        np.testing.assert_allclose(mod.tridiag_solve(lower, diag, upper, rhs[:, 0]),
                                   np.linalg.solve(dense, rhs[:, 0]), atol=1e-12)


def test_backend_selection_env():
    code = "from fracshe._backend import BACKEND; print(BACKEND)"
    env = dict(os.environ, FRACSHE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_increment_determinism_and_scale():
    a = increment(7, 3, 10, 0.01)
    assert a == increment(7, 3, 10, 0.01)
    assert a == pytest.approx(0.1 * normals(7, 0, 3, 4, 10, 11)[0, 0], rel=1e-15)
    with pytest.raises(ValueError):
        increment(7, 3, 10, 0.0)


def test_increment_moments():
    dt = 0.01
    z = normals(2024, 0, 1, 3, 0, 100000) * np.sqrt(dt)
    n = z.shape[0]
    var = z[:, 0].var(ddof=1)
    # standard error of the sample variance of a Gaussian is dt * sqrt(2 / (n - 1))
    assert abs(var - dt) <= 3 * dt * np.sqrt(2 / (n - 1))
    corr = np.corrcoef(z[:, 0], z[:, 1])[0, 1]
    assert abs(corr) <= 3 / np.sqrt(n)


def test_increment_distribution_ks():
    dt = 0.02
    z = normals(99, 1, 5, 6, 0, 10000)[:, 0] * np.sqrt(dt)
    assert stats.kstest(z, "norm", args=(0, np.sqrt(dt))).pvalue > 1e-3


def test_restrict_prefix_property():
    grid = TimeGrid(1.0, 20)
    b = NoiseBundle(5, 16, grid)
    np.testing.assert_array_equal(restrict(b, 4).increments()[:, 0], b.increments()[:, 0])
    assert restrict(b, 16) == b
    assert restrict(restrict(b, 8), 4) == restrict(b, 4)
    with pytest.raises(ValueError):
        restrict(b, 17)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 40), st.integers(1, 40), st.integers(0, 50))
def test_levels_share_modes_bitwise(seed, m1, m2, path):
    lo, hi = sorted((m1, m2))
    grid = TimeGrid(0.5, 12)
    a = NoiseBundle(seed, lo, grid, path=path).increments()
    b = NoiseBundle(seed, hi, grid, path=path).increments()
    np.testing.assert_array_equal(a, b[:, :lo])


def test_chunks_and_threads_give_identical_draws():
    grid = TimeGrid(1.0, 64)
    b = NoiseBundle(3, 10, grid, refine=2)
    whole = b.increments()
    parts = np.concatenate([b.increments(k, k + 16) for k in range(0, 64, 16)])
    np.testing.assert_array_equal(whole, parts)
    with ThreadPoolExecutor(4) as pool:
        threaded = np.concatenate(list(pool.map(lambda k: b.increments(k, k + 8), range(0, 64, 8))))
    np.testing.assert_array_equal(whole, threaded)


def test_refinement_couples_step_sizes():
    coarse = NoiseBundle(9, 6, TimeGrid(1.0, 10), refine=2).increments()
    fine = NoiseBundle(9, 6, TimeGrid(1.0, 20)).increments()
    np.testing.assert_allclose(coarse, fine[0::2] + fine[1::2], rtol=1e-14, atol=1e-16)


def test_time_grid_validation():
    assert TimeGrid(0.5, 5).dt == pytest.approx(0.1)
    np.testing.assert_allclose(TimeGrid(0.5, 5).times, [0, 0.1, 0.2, 0.3, 0.4, 0.5])
    with pytest.raises(ValueError):
        TimeGrid(0.0, 5)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
