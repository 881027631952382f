"""Fractional powers of the Dirichlet Laplacian and of its finite-difference matrix.

Two independent routes build the fractional stiffness matrix: the spectral
route ``V diag(lambda**(alpha/2)) V`` from the closed-form eigensystem, and
the Balakrishnan integral

    A**s = sin(pi s)/pi * int_0^inf z**(s-1) A (zI + A)**-1 dz,   0 < s < 1,

evaluated by adaptive Gauss-Legendre quadrature with tridiagonal resolvent
solves.  Orders ``alpha`` in (2, 4) use ``A**(alpha/2) = A A**(alpha/2 - 1)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .grid import (
    EigenSystem,
    GridField,
    SpectralField,
    dst1,
    eigen_system,
    stiffness_bands,
    stiffness_matrix,
)

ALPHA_MIN = 1.0
ALPHA_MAX = 4.0


class FractionalOrderError(ValueError):
    """Raised for an order alpha outside the supported range."""


class DimensionError(ValueError):
    """Raised when a state does not fit the operator it is applied to."""


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature exhausts its interval budget."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


class TruncationError(ValueError):
    """Raised when an infinite series cannot be truncated to the required precision."""


def check_alpha(alpha: float, lo: float = ALPHA_MIN, hi: float = ALPHA_MAX) -> float:
    alpha = float(alpha)
    if not lo < alpha < hi:
        raise FractionalOrderError(f"alpha must lie in ({lo}, {hi}), got {alpha}")
    return alpha


@dataclass(frozen=True)
class DiscreteFracOperator:
    n: int
    alpha: float
    frac_lambdas: np.ndarray = field(repr=False)
    eigensystem: EigenSystem = field(repr=False)

    @property
    def dim(self) -> int:
        return self.n - 1


@dataclass(frozen=True)
class ContinuousFracOperator:
    alpha: float
    truncation: int
    frac_lambdas: np.ndarray = field(repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return (np.arange(1, self.truncation + 1) * np.pi) ** 2


def make_discrete_operator(n: int, alpha: float) -> DiscreteFracOperator:
    alpha = check_alpha(alpha)
    es = eigen_system(n)
    return DiscreteFracOperator(n=es.n, alpha=alpha, frac_lambdas=es.lambdas ** (alpha / 2), eigensystem=es)


def make_continuous_operator(alpha: float, truncation: int) -> ContinuousFracOperator:
    alpha = check_alpha(alpha)
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    j = np.arange(1, truncation + 1)
    return ContinuousFracOperator(alpha=alpha, truncation=int(truncation), frac_lambdas=(j * np.pi) ** alpha)


def frac_matrix_spectral(n: int, alpha: float) -> np.ndarray:
    op = make_discrete_operator(n, alpha)
    v = op.eigensystem.vectors
    out = (v * op.frac_lambdas) @ v.T
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# Balakrishnan quadrature

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def _gl(f, a, b):
    half = 0.5 * (b - a)
    vals = f(0.5 * (a + b) + half * _GL_NODES)
    return half * np.tensordot(_GL_WEIGHTS, vals, axes=(0, 0))


def adaptive_gauss_legendre(f, a: float, b: float, rel_tol: float, max_intervals: int = 2000):
    """Globally adaptive 15-point Gauss-Legendre rule with bisection.

    ``f`` maps a vector of nodes to an array whose first axis runs over the
    nodes.  Each interval's error is estimated by comparing the rule on the
    whole interval with the rule on its two halves; the interval with the
    largest estimate is bisected until the summed estimate falls below
    ``rel_tol`` times the max-norm of the integral.

    Returns ``(integral, error_estimate)``.
    """

    def refine(lo, hi, coarse):
        mid = 0.5 * (lo + hi)
        left = _gl(f, lo, mid)
        right = _gl(f, mid, hi)
        fine = left + right
        err = float(np.max(np.abs(fine - coarse)))
        return err, lo, hi, left, right, fine

    counter = 0
    first = refine(a, b, _gl(f, a, b))
    heap = [(-first[0], counter, first)]
    total = first[5].copy()
    total_err = first[0]
    while True:
        scale = float(np.max(np.abs(total)))
        if total_err <= rel_tol * scale or total_err == 0.0:
            return total, total_err
        if len(heap) >= max_intervals:
            raise QuadratureError("adaptive Gauss-Legendre did not converge", total_err / max(scale, 1e-300))
        _, _, (err, lo, hi, left, right, fine) = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        total = total - fine
        total_err -= err
        for child in (refine(lo, mid, left), refine(mid, hi, right)):
            counter += 1
            heapq.heappush(heap, (-child[0], counter, child))
            total = total + child[5]
            total_err += child[0]


def _balakrishnan_power(resolvent, scale: float, s: float, rel_tol: float, max_intervals: int):
    """``A**s`` for ``0 < s < 1`` given ``resolvent(z, w) = A (zI + w A)**-1``.

    The integral is split at ``z = scale``.  On ``[0, scale]`` the substitution
    ``z = scale v**(1/s)`` removes the ``z**(s-1)`` singularity; the tail is
    mapped to ``[0, 1]`` by ``z = scale / w`` followed by ``w = q**(1/(1-s))``.
    """

    def head(v):
        return np.stack([resolvent(scale * vi ** (1.0 / s), 1.0) for vi in v])

    def tail(q):
        return np.stack([resolvent(scale, qi ** (1.0 / (1.0 - s))) for qi in q])

    ih, _ = adaptive_gauss_legendre(head, 0.0, 1.0, 0.5 * rel_tol, max_intervals)
    it, _ = adaptive_gauss_legendre(tail, 0.0, 1.0, 0.5 * rel_tol, max_intervals)
    zs = scale**s
    return math.sin(math.pi * s) / math.pi * (zs / s * ih + zs / (1.0 - s) * it)


def _check_rel_tol(rel_tol):
    if not 0.0 < rel_tol <= 1e-4:
        raise ValueError(f"rel_tol must lie in (0, 1e-4], got {rel_tol}")


def frac_matrix_balakrishnan(n: int, alpha: float, rel_tol: float = 1e-10, max_intervals: int = 2000) -> np.ndarray:
    """Fractional stiffness matrix from the Balakrishnan integral.

    Independent of the eigensystem: only tridiagonal solves with the scaled
    stiffness matrix are used.  ``alpha`` within 1e-9 of 2 returns the
    stiffness matrix itself (the prefactor ``sin(alpha pi / 2)`` vanishes).
    The integral is valid for any ``0 < alpha < 4``, so unlike the operator
    constructors this routine also accepts ``alpha <= 1``.
    """
    alpha = check_alpha(alpha, lo=0.0)
    _check_rel_tol(rel_tol)
    a = stiffness_matrix(n)
    if abs(alpha - 2.0) < 1e-9:
        return a
    lower, diag, upper = stiffness_bands(n)
    scale = 4.0 * n * n  # Gershgorin bound on the spectral norm

    def resolvent(z, w):
        return kernels.tridiag_solve(w * lower, z + w * diag, w * upper, a)

    s = alpha / 2.0
    if s < 1.0:
        out = _balakrishnan_power(resolvent, scale, s, rel_tol, max_intervals)
    else:
        out = a @ _balakrishnan_power(resolvent, scale, s - 1.0, rel_tol, max_intervals)
    return 0.5 * (out + out.T)


def balakrishnan_scalar(lam: float, alpha: float, rel_tol: float = 1e-12, max_intervals: int = 2000) -> float:
    """``lam**(alpha/2)`` through the Balakrishnan integral, ``0 < alpha < 2``."""
    alpha = check_alpha(alpha, lo=0.0, hi=2.0)
    if lam <= 0:
        raise ValueError("lam must be positive")
    _check_rel_tol(rel_tol)

    def resolvent(z, w):
        return np.asarray(lam / (z + w * lam))

    return float(_balakrishnan_power(resolvent, float(lam), alpha / 2.0, rel_tol, max_intervals))


# ---------------------------------------------------------------------------
# Semigroups and Green functions


def semigroup_apply(op, t: float, state):
    """Apply ``exp(-t A^(alpha/2))`` in the operator's eigenbasis."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if isinstance(op, DiscreteFracOperator):
        if not isinstance(state, GridField) or state.n != op.n:
            raise DimensionError(f"level-{op.n} operator needs a level-{op.n} GridField")
        coords = dst1(state.values) * np.exp(-t * op.frac_lambdas)
        return GridField(op.n, dst1(coords))
    if isinstance(op, ContinuousFracOperator):
        if not isinstance(state, SpectralField):
            raise DimensionError("continuous operator needs a SpectralField")
        k = state.truncation
        if k > op.truncation:
            raise DimensionError(f"state has {k} modes, operator only {op.truncation}")
        return SpectralField(state.coeffs * np.exp(-t * op.frac_lambdas[:k]))
    raise TypeError(f"unsupported operator {type(op).__name__}")


def kernel_truncation(alpha: float, t: float, tol: float = 1e-12, max_terms: int = 10**7) -> int:
    """Smallest N with ``2 * sum_{j>N} exp(-t (j pi)**alpha) < tol``.

    Uses the integral bound ``exp(-a N**alpha) / (a alpha N**(alpha-1))`` with
    ``a = t pi**alpha``.
    """
    if t < 1e-6:
        raise TruncationError(f"t={t} is below the supported minimum 1e-6 for series truncation")
    a = t * np.pi**alpha

    def bound(n):
        return 2.0 * math.exp(-a * n**alpha) / (a * alpha * n ** (alpha - 1))

    hi = 1
    while bound(hi) >= tol:
        hi *= 2
        if hi > max_terms:
            raise TruncationError(f"more than {max_terms} modes needed at t={t}")
    lo = max(hi // 2, 1)
    if bound(lo) < tol:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


def _series_kernel(decay, t, x, y, chunk=1 << 15):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x, y = np.broadcast_arrays(x, y)
    out = np.zeros(x.shape)
    nmodes = decay.shape[0]
    for start in range(0, nmodes, chunk):
        j = np.arange(start + 1, min(start + chunk, nmodes) + 1)
        w = np.exp(-t * decay[start:start + chunk])
        terms = 2.0 * np.sin(np.multiply.outer(x, j) * np.pi) * np.sin(np.multiply.outer(y, j) * np.pi)
        out += terms @ w
    return out if out.ndim else float(out)


def green_kernel(op, t: float, x, y):
    """Heat kernel ``sum_k exp(-t lambda_k^(alpha/2)) e_k(x) e_k(y)``.

    For a discrete operator the sum runs over its ``n - 1`` modes with the
    discrete eigenvalues.  For a continuous operator the series is truncated
    where the tail drops below 1e-12 (independently of ``op.truncation``).
    """
    if t <= 0:
        raise ValueError("green kernel needs t > 0")
    if isinstance(op, DiscreteFracOperator):
        return _series_kernel(op.frac_lambdas, t, x, y)
    if isinstance(op, ContinuousFracOperator):
        nmodes = kernel_truncation(op.alpha, t)
        decay = (np.arange(1, nmodes + 1) * np.pi) ** op.alpha
        return _series_kernel(decay, t, x, y)
    raise TypeError(f"unsupported operator {type(op).__name__}")


# ---------------------------------------------------------------------------
# Grünwald-type discretization of the Riemann-Liouville derivative


def gruenwald_coefficients(r: float, n: int) -> np.ndarray:
    """Coefficients ``Gamma(j-r) / (Gamma(j+1) Gamma(-r))`` for ``j = 0 .. n``."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    j = np.arange(n)
    ratios = (j - r) / (j + 1.0)
    return np.concatenate(([1.0], np.cumprod(ratios)))


def gruenwald_apply(r: float, n: int, samples, x: float) -> float:
    """``n**r sum_{j=0}^{[nx]} C_j f(x - j/n)`` from samples ``f(i/n)``, ``i = 0 .. n``.

    ``x`` must be a grid point ``i/n`` with ``i >= 1``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (n + 1,):
        raise ValueError(f"need {n + 1} samples on the grid i/{n}, got shape {samples.shape}")
    i = round(x * n)
    if not 0 < x <= 1.0 or abs(i - x * n) > 1e-9 * max(n, 1):
        raise ValueError(f"x={x} is not a grid point of the level-{n} grid in (0, 1]")
    c = gruenwald_coefficients(r, i)
    return float(n**r * np.dot(c, samples[i::-1]))
