"""Counter-based Brownian increments shared by every resolution.

Draw ``(seed, path, j, k)`` is the standard normal obtained from the first
word of Philox4x64-10 at counter ``(k, j, path, 0)`` under key ``(seed, 0)``:
the top 53 bits give ``u = (bits + 0.5) / 2**53`` and AS241 maps ``u`` to
``N(0, 1)``.  Modes ``j`` are 1-based.  Because any draw is a pure function
of its key, a coarse level reading modes ``1 .. n-1`` sees exactly the values
a fine level sees for those modes, and draws can be produced in any order on
any thread.

A bundle may subdivide each time step into ``refine`` fine draws; its
increment over step ``k`` is ``sqrt(dt / refine) * sum_i draw(k * refine + i)``.
Two bundles with ``(K, refine=2)`` and ``(2K, refine=1)`` therefore sample the
same Brownian path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernels


@dataclass(frozen=True)
class TimeGrid:
    T: float
    K: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("step count K must be a positive integer")

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt


def _seed64(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


def normals(seed: int, path: int, j0: int, j1: int, k0: int, k1: int) -> np.ndarray:
    """Standard normals for modes ``j0 <= j < j1`` and steps ``k0 <= k < k1``."""
    return kernels.normal_block(_seed64(seed), int(path), int(j0), int(j1), int(k0), int(k1))


def increment(seed: int, j: int, k: int, dt: float, path: int = 0) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return float(np.sqrt(dt) * normals(seed, path, j, j + 1, k, k + 1)[0, 0])


@dataclass(frozen=True)
class NoiseBundle:
    seed: int
    modes: int
    timegrid: TimeGrid
    path: int = 0
    refine: int = 1

    def increments(self, k0: int = 0, k1: int | None = None) -> np.ndarray:
        """Increments ``dB_j(t_k)`` for steps ``k0 <= k < k1``, shape ``(k1-k0, modes)``."""
        if k1 is None:
            k1 = self.timegrid.K
        r = self.refine
        z = normals(self.seed, self.path, 1, self.modes + 1, k0 * r, k1 * r)
        z = z.reshape(k1 - k0, r, self.modes)
        acc = z[:, 0, :].copy()
        for i in range(1, r):
            acc += z[:, i, :]
        return np.sqrt(self.timegrid.dt / r) * acc

    def step(self, k: int) -> np.ndarray:
        return self.increments(k, k + 1)[0]

    def describe(self) -> dict:
        return {
            "generator": "philox4x64-10/as241",
            "seed": self.seed,
            "path": self.path,
            "modes": self.modes,
            "T": self.timegrid.T,
            "K": self.timegrid.K,
            "refine": self.refine,
        }


def restrict(bundle: NoiseBundle, m: int) -> NoiseBundle:
    if m > bundle.modes:
        raise ValueError(f"cannot restrict {bundle.modes} modes to {m}")
    if m < 1:
        raise ValueError("restriction needs at least one mode")
    return replace(bundle, modes=int(m))
