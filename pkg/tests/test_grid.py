from __future__ import annotations

import json

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracshe.grid import (
    AliasingError,
    GridField,
    InvalidLevelError,
    SpectralField,
    analyze,
    discrete_eigenvalues,
    eigen_system,
    make_grid,
    sine_matrix,
    stiffness_matrix,
    synthesize,
    transform,
)


def test_make_grid_points():
    assert make_grid(2).points.tolist() == [0.5]
    assert make_grid(4).points.tolist() == [0.25, 0.5, 0.75]
    assert make_grid(4).h == 0.25


@pytest.mark.parametrize("n", [1, 0, -3])
def test_make_grid_rejects_degenerate(n):
    with pytest.raises(InvalidLevelError):
        make_grid(n)


def test_eigenvalues_small_levels():
    # frozen from numpy.linalg.eigvalsh on n**2 * tridiag(-1, 2, -1)
    assert eigen_system(2).lambdas == pytest.approx([8.0], rel=1e-14)
    assert eigen_system(3).lambdas == pytest.approx([9.0, 27.0], rel=1e-14)
    lam = eigen_system(4).lambdas
    assert lam[0] == pytest.approx(9.372583002030479, rel=1e-14)
    assert lam[1] == pytest.approx(32.0, rel=1e-14)
    assert lam[2] == pytest.approx(54.62741699796952, rel=1e-14)


def test_eigenvalues_extended_precision():
    mpmath.mp.dps = 40
    for n in (4, 17, 64):
        ref = [float(4 * n**2 * mpmath.sin(j * mpmath.pi / (2 * n)) ** 2) for j in range(1, n)]
        np.testing.assert_allclose(discrete_eigenvalues(n), ref, rtol=1e-14)


def test_stiffness_matrix_entries():
    assert stiffness_matrix(2).tolist() == [[8.0]]
    assert stiffness_matrix(3).tolist() == [[18.0, -9.0], [-9.0, 18.0]]


@pytest.mark.parametrize("n", [2, 3, 5, 16, 33, 128])
def test_eigen_relation_and_dense_solver(n):
    es = eigen_system(n)
    a = stiffness_matrix(n)
    np.testing.assert_allclose(a @ es.vectors, es.vectors * es.lambdas, rtol=0, atol=1e-10 * es.lambdas.max())
    np.testing.assert_allclose(np.linalg.eigvalsh(a), es.lambdas, rtol=1e-9)
    np.testing.assert_allclose(es.vectors.T @ es.vectors, np.eye(n - 1), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 200))
def test_eigenvalue_bounds_and_monotonicity(n):
    lam = discrete_eigenvalues(n)
    j = np.arange(1, n)
    assert np.all(np.diff(lam) > 0)
    assert np.all(lam >= 4 * j**2 * (1 - 1e-14))
    assert np.all(lam <= (j * np.pi) ** 2 * (1 + 1e-14))
    assert np.all(discrete_eigenvalues(2 * n)[: n - 1] >= lam)


def test_sine_matrix_entries():
    v = sine_matrix(5)
    j, k = 2, 3
    assert v[k - 1, j - 1] == pytest.approx(np.sqrt(2 / 5) * np.sin(j * k * np.pi / 5), abs=1e-15)
    np.testing.assert_allclose(v, v.T, atol=1e-15)


def test_eigensystem_export():
    es = eigen_system(4)
    rows = es.to_csv().splitlines()
    assert rows[0] == "j,lambda_jn"
    assert rows[2].startswith("2,31.99999999999999")
    assert json.loads(es.to_json())["n"] == 4


def test_synthesize_examples():
    assert synthesize(np.array([1.0]), 2)[0] == pytest.approx(np.sqrt(2))
    assert synthesize(np.array([0.0, 1.0]), 4)[0] == pytest.approx(np.sqrt(2))


def test_synthesize_matches_direct_series():
    rng = np.random.default_rng(3)
    a = rng.normal(size=7)
    m = 20
    x = np.arange(1, m) / m
    direct = np.sqrt(2) * np.sin(np.pi * np.outer(x, np.arange(1, 8))) @ a
    np.testing.assert_allclose(synthesize(a, m), direct, atol=1e-13)


def test_synthesize_aliasing_guard():
    with pytest.raises(AliasingError):
        synthesize(np.ones(5), 5)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_analyze_inverts_synthesize(N, extra, seed):
    a = np.random.default_rng(seed).normal(size=N)
    m = 2 * N + extra
    np.testing.assert_allclose(analyze(synthesize(a, m), m, modes=N), a, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_parseval(N, seed):
    a = np.random.default_rng(seed).normal(size=N)
    m = 4 * N
    vals = synthesize(a, m)
    # trapezoid rule with zero boundary values is exact for these trigonometric polynomials
    quad = np.sqrt(np.sum(vals**2) / m)
    assert quad == pytest.approx(SpectralField(a).norm(), rel=1e-8)


def test_transform_round_trip():
    f = SpectralField(np.array([1.0, 0.5, 0.25]))
    vals = transform(f, "synthesize", 8)
    back = transform(vals, "analyze", 8)
    np.testing.assert_allclose(back.coeffs[:3], f.coeffs, atol=1e-14)
    with pytest.raises(ValueError):
        transform(f, "sideways", 8)


def test_grid_field_validation():
    with pytest.raises(ValueError):
        GridField(4, np.zeros(2))
    x = GridField(4, np.array([3.0, 0.0, 4.0]))
    assert x.norm() == pytest.approx(5.0)
