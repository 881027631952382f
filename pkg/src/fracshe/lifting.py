"""Projection onto grid coordinates, interpolation back to L2, and the diffusion matrix.

``P_n`` maps sine coefficients to grid coordinates, ``(P_n f)_k = sum_j <f, e_j> (e_j^n)_k``,
and ``E_n`` maps grid coordinates to the sine coefficients ``<x, e_k^n>``.  Since
the sine matrix ``V`` is symmetric and orthogonal both are a single DST-I.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import AliasingError, GridField, SpectralField, analyze, dst1, synthesize


@dataclass(frozen=True)
class NemytskiiMap:
    """Pointwise diffusion coefficient ``g`` with its declared constants.

    ``func`` must be reentrant and vectorized over numpy arrays.  ``delta`` and
    ``b_delta`` are only echoed into theoretical-rate reports.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    b0: float
    lipschitz: float
    delta: float | None = None
    b_delta: float | None = None

    def __call__(self, x):
        return np.broadcast_to(self.func(np.asarray(x, dtype=np.float64)), np.shape(x)).astype(np.float64)

    def probe(self, points, slack: float = 1e-12) -> bool:
        """Check the declared bound and Lipschitz constant on sample points."""
        x = np.asarray(points, dtype=np.float64).ravel()
        gx = self(x)
        if np.any(np.abs(gx) > self.b0 + slack):
            return False
        dx = np.abs(x[:, None] - x[None, :])
        dg = np.abs(gx[:, None] - gx[None, :])
        return bool(np.all(dg <= self.lipschitz * dx + slack))


def _const(c):
    return lambda x: np.full(np.shape(x), float(c))


CATALOGUE: dict[str, NemytskiiMap] = {
    "cos": NemytskiiMap("cos", np.cos, b0=1.0, lipschitz=1.0),
    "one": NemytskiiMap("one", _const(1.0), b0=1.0, lipschitz=0.0),
    "zero": NemytskiiMap("zero", _const(0.0), b0=0.0, lipschitz=0.0),
    "tanh-scaled": NemytskiiMap("tanh-scaled", np.tanh, b0=1.0, lipschitz=1.0),
}


def get_nemytskii(name: str) -> NemytskiiMap:
    try:
        return CATALOGUE[name]
    except KeyError:
        raise ValueError(f"unknown diffusion coefficient {name!r}; choose from {sorted(CATALOGUE)}") from None


def constant_map(c: float) -> NemytskiiMap:
    return NemytskiiMap(f"const({c})", _const(c), b0=abs(c), lipschitz=0.0)


def project_Pn(f: SpectralField, n: int) -> GridField:
    coeffs = np.zeros(n - 1)
    k = min(f.truncation, n - 1)
    coeffs[:k] = f.coeffs[:k]
    return GridField(n, dst1(coeffs))


def interpolate_En(x: GridField) -> SpectralField:
    return SpectralField(dst1(x.values))


def nemytskii_eval(g: NemytskiiMap, f: SpectralField, m: int) -> np.ndarray:
    """Values of ``g(f(x))`` at ``x = k/m``, ``k = 1 .. m-1``."""
    if m < 2 * f.truncation:
        raise AliasingError(f"oversampling m={m} is below twice the truncation {f.truncation}")
    return g(synthesize(f.coeffs, m))


def _check_oversampling(n, m):
    if m is None:
        return 4 * n
    if m < 4 * n:
        raise AliasingError(f"diffusion matrix at level {n} needs m >= {4 * n}, got {m}")
    return int(m)


def diffusion_matrix_gn(g: NemytskiiMap, y: GridField, m: int | None = None) -> np.ndarray:
    """Matrix whose column ``j`` is ``P_n`` of ``g((E_n y)(x)) e_j(x)``.

    The sine coefficients of each product are computed by the discrete sine
    quadrature on ``m`` uniform subintervals (default ``4n``).
    """
    n = y.n
    m = _check_oversampling(n, m)
    mult = g(synthesize(dst1(y.values), m))
    basis = synthesize(np.eye(n - 1), m)
    coeffs = analyze(basis * mult, m, modes=n - 1)
    return dst1(coeffs).T


def diffusion_apply(g: NemytskiiMap, y: GridField, dw, m: int | None = None) -> np.ndarray:
    """``diffusion_matrix_gn(g, y, m) @ dw`` without forming the matrix."""
    n = y.n
    m = _check_oversampling(n, m)
    dw = np.asarray(dw, dtype=np.float64)
    if dw.shape[-1] != n - 1:
        raise ValueError(f"level {n} needs {n - 1} noise increments, got {dw.shape[-1]}")
    mult = g(synthesize(dst1(y.values), m))
    return dst1(analyze(mult * synthesize(dw, m), m, modes=n - 1))
