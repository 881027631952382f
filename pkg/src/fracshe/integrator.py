"""Exponential Euler time stepping for the level-n system and the Galerkin reference.

Both solvers advance the mild form one step at a time,

    u_{k+1} = exp(-dt L) (u_k + G(u_k) dW_k),

with the linear part propagated exactly in the eigenbasis and the diffusion
evaluated at the left point.  At level ``n`` the state lives in R^(n-1), ``L`` is
the fractional stiffness matrix and ``G = g_n``; the reference keeps ``N``
sine coefficients with the exact eigenvalues ``(j pi)**alpha`` and evaluates
the Nemytskii product pseudo-spectrally.

Internally both run in sine coefficients: for the level-n system these are
the coordinates ``E_n u_n`` (the sine matrix is its own inverse), so one
:class:`ModalStepper` serves both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, SpectralField, analyze, dst1, synthesize
from .lifting import NemytskiiMap, diffusion_matrix_gn
from .noise import NoiseBundle, TimeGrid
from .operators import (
    ContinuousFracOperator,
    DimensionError,
    DiscreteFracOperator,
    make_continuous_operator,
    make_discrete_operator,
)


class DivergenceError(FloatingPointError):
    """Raised when a time step produces non-finite values."""


@dataclass(frozen=True)
class InitialCondition:
    """Deterministic initial datum with sine coefficients ``a_j = j**-(2 eta + 1)``."""

    eta: float
    coeffs: np.ndarray = field(repr=False)

    @property
    def truncation(self) -> int:
        return self.coeffs.shape[0]

    def domain_norm(self) -> float:
        """Norm in D(A^eta): ``sqrt(sum_j lambda_j**(2 eta) a_j**2)``."""
        lam = (np.arange(1, self.truncation + 1) * np.pi) ** 2
        return float(np.sqrt(np.sum(lam ** (2 * self.eta) * self.coeffs**2)))

    def field(self, modes: int | None = None) -> SpectralField:
        c = self.coeffs if modes is None else np.pad(self.coeffs, (0, max(0, modes - self.truncation)))[:modes]
        return SpectralField(c)


def make_initial(eta: float, N: int) -> InitialCondition:
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if N < 1:
        raise ValueError("N must be >= 1")
    j = np.arange(1, N + 1, dtype=np.float64)
    return InitialCondition(eta=float(eta), coeffs=j ** -(2.0 * eta + 1.0))


@dataclass(frozen=True)
class SolutionPath:
    """Stored states at every point of the time grid.

    ``kind`` is ``"discrete"`` (states are grid coordinates, ``level`` is n) or
    ``"reference"`` (states are sine coefficients, ``level`` is N).
    """

    kind: str
    level: int
    alpha: float
    timegrid: TimeGrid
    states: np.ndarray = field(repr=False)
    noise: dict = field(default_factory=dict)

    def coefficients(self) -> np.ndarray:
        """Sine coefficients of the (lifted) state at every time."""
        if self.kind == "discrete":
            return dst1(self.states)
        return self.states


class ModalStepper:
    """Batched exponential Euler step in sine coefficients.

    ``decay`` holds the per-mode rates, ``m`` the number of quadrature
    subintervals for the Nemytskii product.  States have shape
    ``(batch, modes)``; increments ``(batch, modes)``.
    """

    def __init__(self, decay, dt: float, g: NemytskiiMap, m: int, frozen_diffusion: bool = False):
        self.modes = decay.shape[0]
        self.propagator = np.exp(-dt * decay)
        self.g = g
        self.m = int(m)
        self.frozen = frozen_diffusion
        self._mult = None

    def multiplier(self, c):
        if self.frozen and self._mult is not None:
            return self._mult
        mult = self.g(synthesize(c, self.m))
        if self.frozen:
            self._mult = mult
        return mult

    def step(self, c, dw):
        noise = analyze(self.multiplier(c) * synthesize(dw, self.m), self.m, modes=self.modes)
        out = self.propagator * (c + noise)
        if not np.all(np.isfinite(out)):
            raise DivergenceError("non-finite state in exponential Euler step")
        return out


def discrete_stepper(n, alpha, g, dt, oversample=4, frozen_diffusion=False) -> ModalStepper:
    op = make_discrete_operator(n, alpha)
    return ModalStepper(op.frac_lambdas, dt, g, oversample * n, frozen_diffusion)


def reference_stepper(N, alpha, g, dt, oversample=2, frozen_diffusion=False) -> ModalStepper:
    op = make_continuous_operator(alpha, N)
    return ModalStepper(op.frac_lambdas, dt, g, oversample * N, frozen_diffusion)


def exp_euler_step(state, dt: float, operator, g: NemytskiiMap, dw, m: int | None = None):
    """One exponential Euler step written out with explicit operators.

    For a :class:`DiscreteFracOperator` the diffusion matrix ``g_n(u_k)`` is
    assembled and multiplied with ``dw``; for a
    :class:`ContinuousFracOperator` the Nemytskii product is evaluated on
    ``m`` (default ``2N``) uniform subintervals.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dw = np.asarray(dw, dtype=np.float64)
    if isinstance(operator, DiscreteFracOperator):
        if not isinstance(state, GridField) or state.n != operator.n or dw.shape != (operator.dim,):
            raise DimensionError(f"level-{operator.n} step needs a level-{operator.n} state and {operator.dim} increments")
        v = state.values + diffusion_matrix_gn(g, state, m) @ dw
        out = dst1(np.exp(-dt * operator.frac_lambdas) * dst1(v))
        result = GridField(operator.n, out)
    elif isinstance(operator, ContinuousFracOperator):
        N = operator.truncation
        if not isinstance(state, SpectralField) or state.truncation != N or dw.shape != (N,):
            raise DimensionError(f"reference step needs {N} coefficients and {N} increments")
        m = 2 * N if m is None else m
        prod = g(synthesize(state.coeffs, m)) * synthesize(dw, m)
        out = np.exp(-dt * operator.frac_lambdas) * (state.coeffs + analyze(prod, m, modes=N))
        result = SpectralField(out)
    else:
        raise TypeError(f"unsupported operator {type(operator).__name__}")
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite state in exponential Euler step")
    return result


def _run(stepper: ModalStepper, c0, timegrid: TimeGrid, bundle: NoiseBundle, chunk: int = 256):
    states = np.empty((timegrid.K + 1, stepper.modes))
    c = c0[None, :].copy()
    states[0] = c[0]
    for k0 in range(0, timegrid.K, chunk):
        k1 = min(k0 + chunk, timegrid.K)
        dws = bundle.increments(k0, k1)[:, : stepper.modes]
        for i in range(k1 - k0):
            c = stepper.step(c, dws[i][None, :])
            states[k0 + i + 1] = c[0]
    return states


def _check_bundle(bundle, timegrid, modes):
    if bundle.modes < modes:
        raise ValueError(f"noise bundle has {bundle.modes} modes, solver needs {modes}")
    if bundle.timegrid != timegrid:
        raise ValueError("noise bundle and solver use different time grids")


def solve_discrete(n, alpha, g, u0: InitialCondition, timegrid: TimeGrid, bundle: NoiseBundle,
                   oversample: int = 4, frozen_diffusion: bool = False) -> SolutionPath:
    """Level-n path started from ``P_n u0``; states stored as grid coordinates."""
    _check_bundle(bundle, timegrid, n - 1)
    stepper = discrete_stepper(n, alpha, g, timegrid.dt, oversample, frozen_diffusion)
    c0 = u0.field(n - 1).coeffs
    states = dst1(_run(stepper, c0, timegrid, bundle))
    return SolutionPath("discrete", n, float(alpha), timegrid, states, bundle.describe())


def solve_reference(N, alpha, g, u0: InitialCondition, timegrid: TimeGrid, bundle: NoiseBundle,
                    oversample: int = 2, frozen_diffusion: bool = False) -> SolutionPath:
    """Spectral Galerkin path with ``N`` modes and exact eigenvalues."""
    _check_bundle(bundle, timegrid, N)
    stepper = reference_stepper(N, alpha, g, timegrid.dt, oversample, frozen_diffusion)
    states = _run(stepper, u0.field(N).coeffs, timegrid, bundle)
    return SolutionPath("reference", N, float(alpha), timegrid, states, bundle.describe())
