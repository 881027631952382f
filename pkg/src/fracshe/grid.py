"""Uniform grids, the discrete sine eigensystem and sine-series transforms.

Conventions
-----------
The continuous basis is ``e_j(x) = sqrt(2) sin(j pi x)``.  At level ``n`` the
grid has the interior points ``x_k = k/n`` and the scaled stiffness matrix
``n**2 * tridiag(-1, 2, -1)`` has eigenpairs

    lambda_{jn} = 4 n**2 sin(j pi / (2n))**2,
    (e_j^n)_k  = sqrt(2/n) sin(j k pi / n),

for ``j, k = 1 .. n-1``.  The eigenvector matrix ``V`` is symmetric and
orthogonal, and equals the orthonormal DST-I of length ``n - 1``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import fft


class InvalidLevelError(ValueError):
    """Raised for a grid level below 2."""


class AliasingError(ValueError):
    """Raised when a sample count cannot resolve the requested modes."""


def _check_level(n) -> int:
    if int(n) != n or n < 2:
        raise InvalidLevelError(f"grid level must be an integer >= 2, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class GridSpec:
    n: int
    h: float
    points: np.ndarray = field(repr=False)


def make_grid(n: int) -> GridSpec:
    n = _check_level(n)
    return GridSpec(n=n, h=1.0 / n, points=np.arange(1, n) / n)


@dataclass(frozen=True)
class EigenSystem:
    """Closed-form eigenpairs of the level-``n`` stiffness matrix.

    ``vectors[:, j-1]`` is ``e_j^n``.
    """

    n: int
    lambdas: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "lambda_jn"])
        for j, lam in enumerate(self.lambdas, start=1):
            writer.writerow([j, repr(float(lam))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "lambdas": [float(v) for v in self.lambdas]})


def discrete_eigenvalues(n: int) -> np.ndarray:
    n = _check_level(n)
    j = np.arange(1, n)
    return 4.0 * n * n * np.sin(j * np.pi / (2 * n)) ** 2


def sine_matrix(n: int) -> np.ndarray:
    """Orthogonal matrix with entries ``sqrt(2/n) sin(j k pi / n)``."""
    n = _check_level(n)
    idx = np.arange(1, n)
    return np.sqrt(2.0 / n) * np.sin(np.outer(idx, idx) * np.pi / n)


def eigen_system(n: int) -> EigenSystem:
    n = _check_level(n)
    return EigenSystem(n=n, lambdas=discrete_eigenvalues(n), vectors=sine_matrix(n))


def stiffness_matrix(n: int) -> np.ndarray:
    """Dense ``n**2 * tridiag(-1, 2, -1)`` of size ``(n-1, n-1)``."""
    n = _check_level(n)
    m = n - 1
    a = 2.0 * np.eye(m)
    if m > 1:
        a -= np.eye(m, k=1) + np.eye(m, k=-1)
    return float(n * n) * a


def stiffness_bands(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(lower, diag, upper)`` bands of the scaled stiffness matrix."""
    n = _check_level(n)
    m = n - 1
    off = np.full(m, -float(n * n))
    return off.copy(), np.full(m, 2.0 * n * n), off


def dst1(x: np.ndarray) -> np.ndarray:
    """Orthonormal DST-I along the last axis; multiplies by the sine matrix."""
    return fft.dst(x, type=1, norm="ortho", axis=-1)


@dataclass(frozen=True)
class SpectralField:
    """Coefficients ``a_j = <f, e_j>`` for ``j = 1 .. N``."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.float64))

    @property
    def truncation(self) -> int:
        return self.coeffs.shape[-1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class GridField:
    """Coordinates of a level-``n`` state in the standard basis of R^(n-1)."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape[-1] != self.n - 1:
            raise ValueError(f"level {self.n} expects {self.n - 1} values, got {values.shape[-1]}")
        object.__setattr__(self, "values", values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def eigen_coords(self) -> np.ndarray:
        return dst1(self.values)


def synthesize(coeffs, m: int) -> np.ndarray:
    """Evaluate ``sum_j a_j e_j(x)`` at ``x = k/m``, ``k = 1 .. m-1``.

    Works on the last axis, so a batch of coefficient rows is accepted.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    nc = coeffs.shape[-1]
    if m - 1 < nc:
        raise AliasingError(f"{m} samples cannot represent {nc} sine modes")
    pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, m - 1 - nc)]
    return np.sqrt(m) * dst1(np.pad(coeffs, pad))


def analyze(values, m: int | None = None, modes: int | None = None) -> np.ndarray:
    """Discrete sine coefficients of samples at ``x = k/m``.

    Exact inverse of :func:`synthesize` for band-limited data; ``modes``
    truncates the result.
    """
    values = np.asarray(values, dtype=np.float64)
    if m is None:
        m = values.shape[-1] + 1
    if values.shape[-1] != m - 1:
        raise ValueError(f"expected {m - 1} samples, got {values.shape[-1]}")
    out = dst1(values) / np.sqrt(m)
    if modes is not None:
        if modes > m - 1:
            raise AliasingError(f"{m} samples cannot resolve {modes} sine modes")
        out = out[..., :modes]
    return out


def transform(field, direction: str, m: int):
    """Dispatch between :func:`synthesize` and :func:`analyze`.

    ``synthesize`` takes a :class:`SpectralField` (or a :class:`GridField`,
    which is first lifted to its sine coefficients) and returns point values;
    ``analyze`` takes point values and returns a :class:`SpectralField`.
    """
    if direction == "synthesize":
        if isinstance(field, GridField):
            coeffs = field.eigen_coords()
        elif isinstance(field, SpectralField):
            coeffs = field.coeffs
        else:
            coeffs = np.asarray(field, dtype=np.float64)
        return synthesize(coeffs, m)
    if direction == "analyze":
        return SpectralField(analyze(field, m))
    raise ValueError(f"direction must be 'analyze' or 'synthesize', got {direction!r}")
