"""Pure numpy implementations of the hot kernels.

This module is the fallback used when the compiled ``_ckernels`` extension
is unavailable, and the reference the extension is tested against.  Both
implement exactly the same algorithms:

* Philox4x64-10 counter-based bit generation (Salmon et al., Random123),
* 53-bit uniform in (0, 1) from the top bits of the first output word,
* Wichura's AS241 (PPND16) inverse normal CDF,
* Thomas elimination for tridiagonal systems with many right-hand sides.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)

PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B
PHILOX_ROUNDS = 10

# AS241 PPND16 coefficients
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083,
      5394.1960214247511077, 21213.794301586595867, 39307.89580009271061,
      28729.085735721942674, 5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4, 1.8463183175100546818e-5,
      1.4215117583164458887e-7, 2.04426310338993978564e-15)


def _mulhilo(a, b):
    b = np.uint64(b)
    al, ah = a & _M32, a >> _S32
    bl, bh = b & _M32, b >> _S32
    ll = al * bl
    lh = al * bh
    hl = ah * bl
    hh = ah * bh
    mid = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64-10 block function on broadcastable uint64 arrays."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    w0 = np.uint64(PHILOX_W0)
    w1 = np.uint64(PHILOX_W1)
    with np.errstate(over="ignore"):
        for r in range(PHILOX_ROUNDS):
            if r:
                k0 = k0 + w0
                k1 = k1 + w1
            hi0, lo0 = _mulhilo(c0, PHILOX_M0)
            hi1, lo1 = _mulhilo(c2, PHILOX_M1)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _poly(coef, r):
    acc = np.full_like(r, coef[7])
    for c in coef[6::-1]:
        acc = acc * r + c
    return acc


def ndtri(p):
    """Inverse standard normal CDF by AS241 (PPND16); p must lie in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def bits_to_uniform(w):
    """Map uint64 words to doubles in (0, 1) using the top 53 bits."""
    return ((w >> _S11).astype(np.float64) + 0.5) * 2.0**-53


def normal_block(seed: int, path: int, j0: int, j1: int, k0: int, k1: int) -> np.ndarray:
    """Standard normal draws for modes ``j0 <= j < j1`` and steps ``k0 <= k < k1``.

    Returns an array of shape ``(k1 - k0, j1 - j0)``.  Entry ``[k, j]`` is
    ``ndtri(u)`` where ``u`` comes from the first Philox word at counter
    ``(k, j, path, 0)`` under key ``(seed, 0)``.
    """
    ks = np.arange(k0, k1, dtype=np.uint64)[:, None]
    js = np.arange(j0, j1, dtype=np.uint64)[None, :]
    w0, _, _, _ = philox4x64(ks, js, np.uint64(path), np.uint64(0), seed, 0)
    return ndtri(bits_to_uniform(w0))


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system by Thomas elimination.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` unused),
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused).  ``rhs`` may be
    a vector or an ``(n, m)`` block.  No pivoting: callers pass diagonally
    dominant or SPD systems.
    """
    lower = np.asarray(lower, dtype=np.float64)
    diag = np.asarray(diag, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    x = np.array(rhs, dtype=np.float64, copy=True)
    n = diag.shape[0]
    cp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    x[0] = x[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom
        x[i] = (x[i] - lower[i] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]
    return x
