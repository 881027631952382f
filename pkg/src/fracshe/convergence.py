"""Strong-error laboratory: Monte-Carlo errors, rate fits and the operator-gap sums.

The strong error at level ``n`` is the ``p``-th moment of the sup over the time
grid of the L2 distance between the lifted level-n path ``E_n u_n`` and a
spectral Galerkin reference driven by the same Brownian modes.  In sine
coefficients that distance is

    sum_{k < n} (a_k - <u_n, e_k^n>)**2 + sum_{k >= n} a_k**2.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import expm

from ._backend import BACKEND
from .config import ExperimentConfig
from .grid import discrete_eigenvalues, dst1
from .integrator import (
    DivergenceError,
    InitialCondition,
    SolutionPath,
    discrete_stepper,
    make_initial,
    reference_stepper,
)
from .lifting import get_nemytskii, interpolate_En, project_Pn
from .noise import NoiseBundle, TimeGrid
from .operators import (
    make_continuous_operator,
    frac_matrix_spectral,
    make_discrete_operator,
    semigroup_apply,
)


class HypothesisError(ValueError):
    """Raised when parameters fall outside the range an estimate is stated for."""


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFit:
    value: float
    ci_low: float
    ci_high: float
    stderr: float
    levels_used: tuple[int, ...]
    dropped_coarsest: bool = False

    def as_dict(self) -> dict:
        d = asdict(self)
        d["levels_used"] = list(self.levels_used)
        return d


def _ols(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    sxx = float(np.sum((x - x.mean()) ** 2))
    return float(slope), float(intercept), resid, math.sqrt(s2 / sxx), math.sqrt(s2)


def fit_rate(levels, errors, confidence: float = 0.95, drop_outliers: bool = True) -> RateFit:
    """Least-squares decay rate of ``errors ~ C n**-rate`` in log-log coordinates.

    With four or more levels the coarsest one is discarded when its residual
    against the fit of the remaining levels exceeds three residual standard
    deviations (pre-asymptotic pollution).
    """
    levels = np.asarray(levels, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if levels.shape != errors.shape or levels.size < 3:
        raise ValueError("rate fitting needs at least 3 levels with one error each")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ValueError("rate fitting needs positive finite errors")
    x, y = np.log(levels), np.log(errors)
    dropped = False
    if drop_outliers and levels.size >= 4:
        slope, icpt, _, _, sigma = _ols(x[1:], y[1:])
        r0 = y[0] - (slope * x[0] + icpt)
        if abs(r0) > 3.0 * sigma and abs(r0) > 1e-9:
            x, y, levels = x[1:], y[1:], levels[1:]
            dropped = True
    slope, _, _, se, _ = _ols(x, y)
    half = float(stats.t.ppf(0.5 + confidence / 2, len(x) - 2)) * se
    rate = -slope + 0.0
    return RateFit(rate, rate - half, rate + half, se, tuple(int(v) for v in levels), dropped)


# ---------------------------------------------------------------------------
# theoretical rates


@dataclass(frozen=True)
class TheoreticalRate:
    xi: float
    regime: str
    hypotheses_met: bool
    violations: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = list(self.violations)
        return d


def theoretical_rate(alpha: float, delta: float | None = None, eta: float | None = None,
                     p: float | None = None, theorem: int = 1) -> TheoreticalRate:
    """Proven strong rate and the hypotheses it rests on.

    ``theorem=1`` selects the rate ``min(alpha/2, 2 delta)`` (stated for
    ``alpha > 1``), ``theorem=2`` the large-order rate
    ``alpha/4 - 1/2 - alpha/(2p)`` (stated for ``alpha > 2``).  Unmet
    hypotheses are listed in ``violations`` rather than raised.
    """
    bad = []
    if eta is not None and not 0.25 + alpha / 4 < eta < 0.25 + 0.75 * alpha:
        bad.append(f"eta={eta} outside ({0.25 + alpha / 4:g}, {0.25 + 0.75 * alpha:g})")
    if theorem == 1:
        if delta is None:
            raise ValueError("the rate min(alpha/2, 2 delta) needs delta")
        if alpha <= 1:
            bad.append(f"alpha={alpha} <= 1")
        lo, hi = max(0.5, 0.25 + alpha / 8), 0.25 + 0.75 * alpha
        if not lo < delta < hi:
            bad.append(f"delta={delta} outside ({lo:g}, {hi:g})")
        if p is not None:
            bounds = []
            if 2 * delta - 1 > 0:
                bounds.append(alpha / (2 * delta - 1))
            if 8 * delta - alpha - 2 > 0:
                bounds.append(2 * alpha / (8 * delta - alpha - 2))
            if alpha > 2:
                bounds.append(2 * alpha / (alpha - 2))
            if bounds and not p > max(bounds):
                bad.append(f"p={p} <= {max(bounds):g}")
        xi = min(alpha / 2, 2 * delta)
        regime = "alpha/2" if alpha / 2 <= 2 * delta else "2*delta"
    elif theorem == 2:
        if p is None:
            raise ValueError("the large-order rate needs p")
        if alpha <= 2:
            bad.append(f"alpha={alpha} <= 2")
        elif not p > 2 * alpha / (alpha - 2):
            bad.append(f"p={p} <= {2 * alpha / (alpha - 2):g}")
        xi = alpha / 4 - 0.5 - alpha / (2 * p)
        regime = "alpha/4-1/2-alpha/(2p)"
    else:
        raise ValueError(f"theorem must be 1 or 2, got {theorem}")
    return TheoreticalRate(float(xi), regime, not bad, tuple(bad))


# ---------------------------------------------------------------------------
# operator gaps


def _check_delta(alpha, delta):
    if not 0 <= delta < 0.25 + 0.75 * alpha:
        raise HypothesisError(f"delta={delta} outside [0, {0.25 + 0.75 * alpha:g})")


def head_sum(n, alpha, delta, t):
    """``sum_{j<n} lambda_j**(-2 delta) (exp(-t lambda_j**(a/2)) - exp(-t lambda_jn**(a/2)))**2``."""
    j = np.arange(1, n)
    lam = (j * np.pi) ** 2
    diff = np.exp(-t * lam ** (alpha / 2)) - np.exp(-t * discrete_eigenvalues(n) ** (alpha / 2))
    return math.fsum(lam ** (-2 * delta) * diff**2)


def tail_sum(n, alpha, delta, t, rtol=1e-14, max_terms=10**6):
    """``sum_{j>=n} lambda_j**(-2 delta) exp(-2 t lambda_j**(alpha/2))``.

    Summation stops at the first term below ``rtol`` times the partial sum, or
    after ``max_terms`` terms.  Returns ``(value, terms_used, precision)`` where
    ``precision`` bounds the neglected remainder relative to the value.
    """
    acc = []
    total = 0.0
    start = n
    chunk = 1024
    used = 0
    while used < max_terms:
        j = np.arange(start, start + min(chunk, max_terms - used), dtype=np.float64)
        lam = (j * np.pi) ** 2
        terms = lam ** (-2 * delta) * np.exp(-2 * t * lam ** (alpha / 2))
        partial = total + np.cumsum(terms)
        small = np.nonzero(terms < rtol * partial)[0]
        if small.size:
            stop = small[0] + 1
            acc.append(terms[:stop])
            used += stop
            total = math.fsum(np.concatenate(acc))
            last_j = start + stop - 1
            break
        acc.append(terms)
        used += terms.size
        total = float(partial[-1])
        start += terms.size
        chunk *= 2
    else:
        last_j = start - 1
    total = math.fsum(np.concatenate(acc)) if acc else 0.0
    if total == 0.0:
        return 0.0, int(used), 0.0
    # remainder beyond last_j: terms decrease, bound by the integral of the envelope
    lam_l = (last_j * np.pi) ** 2
    last = lam_l ** (-2 * delta) * math.exp(-2 * t * lam_l ** (alpha / 2))
    if 4 * delta > 1:
        rem = last * last_j / (4 * delta - 1)
    else:
        rate = 2 * t * alpha * np.pi**alpha * last_j ** (alpha - 1)
        rem = last / rate if rate > 0 else math.inf
    return total, int(used), float(rem / total)


@dataclass(frozen=True)
class SemigroupGap:
    operator: float
    hilbert_schmidt: float
    head_sum: float
    tail_sum: float
    tail_terms: int
    tail_precision: float

    def __iter__(self):
        return iter((self.operator, self.hilbert_schmidt))


def semigroup_gap(n: int, alpha: float, delta: float, t: float) -> SemigroupGap:
    """Gap between the continuous semigroup and the lifted discrete one, smoothed by ``A**-delta``.

    Both operators are diagonal in the sine basis, so the operator norm is the
    largest per-mode gap and the Hilbert-Schmidt norm is the root of head plus
    tail sums.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    _check_delta(alpha, delta)
    j = np.arange(1, n)
    lam = (j * np.pi) ** 2
    gaps = lam ** (-delta) * np.abs(np.exp(-t * lam ** (alpha / 2)) - np.exp(-t * discrete_eigenvalues(n) ** (alpha / 2)))
    lam_n = (n * np.pi) ** 2
    first_tail = lam_n ** (-delta) * math.exp(-t * lam_n ** (alpha / 2))
    head = head_sum(n, alpha, delta, t)
    tail, used, prec = tail_sum(n, alpha, delta, t)
    return SemigroupGap(
        operator=float(max(gaps.max(initial=0.0), first_tail)),
        hilbert_schmidt=math.sqrt(head + tail),
        head_sum=head,
        tail_sum=tail,
        tail_terms=used,
        tail_precision=prec,
    )


@dataclass
class LemmaTable:
    alpha: float
    delta: float
    gamma: float
    rows: list[dict] = field(default_factory=list)
    head_slopes: dict[float, float] = field(default_factory=dict)
    tail_slopes: dict[float, float] = field(default_factory=dict)
    head_ratio_spread: dict[float, float] = field(default_factory=dict)
    tail_ratio_spread: dict[float, float] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["t", "n", "head", "head_bound", "head_ratio", "tail", "tail_bound", "tail_ratio"]
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: repr(row[k]) for k in cols})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha, "delta": self.delta, "gamma": self.gamma,
            "rows": self.rows,
            "head_slopes": {repr(k): v for k, v in self.head_slopes.items()},
            "tail_slopes": {repr(k): v for k, v in self.tail_slopes.items()},
            "head_ratio_spread": {repr(k): v for k, v in self.head_ratio_spread.items()},
            "tail_ratio_spread": {repr(k): v for k, v in self.tail_ratio_spread.items()},
        }, indent=2)


def lemma_sum_check(alpha, delta, gamma, t_grid, levels) -> LemmaTable:
    """Tabulate the head and tail sums against their stated bounds.

    Head bound: ``n**-alpha t**(-1 - 1/alpha + 4 delta/alpha)``.  Tail bound:
    ``n**(-alpha gamma - 4 delta) t**-gamma`` for ``delta <= 1/4`` and
    ``n**(-4 delta)`` above.  Ratios are exact sum over bound; slopes are
    log-log least-squares slopes in ``n`` at fixed ``t``.
    """
    _check_delta(alpha, delta)
    if not gamma > 1 / alpha - 4 * delta / alpha:
        raise HypothesisError(f"gamma={gamma} must exceed {1 / alpha - 4 * delta / alpha:g}")
    levels = [int(n) for n in levels]
    table = LemmaTable(float(alpha), float(delta), float(gamma))
    for t in t_grid:
        heads, tails, hr, tr = [], [], [], []
        for n in levels:
            h = head_sum(n, alpha, delta, t)
            tl, _, _ = tail_sum(n, alpha, delta, t)
            hb = n ** (-alpha) * t ** (-1 - 1 / alpha + 4 * delta / alpha)
            tb = n ** (-alpha * gamma - 4 * delta) * t ** (-gamma) if delta <= 0.25 else n ** (-4 * delta)
            table.rows.append({"t": float(t), "n": n, "head": h, "head_bound": hb, "head_ratio": h / hb,
                               "tail": tl, "tail_bound": tb, "tail_ratio": tl / tb})
            heads.append(h)
            tails.append(tl)
            hr.append(h / hb)
            tr.append(tl / tb)
        logn = np.log(levels)
        t = float(t)
        table.head_slopes[t] = _slope(logn, heads)
        table.tail_slopes[t] = _slope(logn, tails)
        table.head_ratio_spread[t] = max(hr) / min(hr) if min(hr) > 0 else math.inf
        table.tail_ratio_spread[t] = max(tr) / min(tr) if min(tr) > 0 else math.inf
    return table


def _slope(logn, values):
    values = np.asarray(values)
    if np.any(values <= 0):
        return -math.inf
    return float(np.polyfit(logn, np.log(values), 1)[0])


# ---------------------------------------------------------------------------
# deterministic (g = 0) gap


def deterministic_gap(n: int, alpha: float, u0: InitialCondition, t: float) -> float:
    """``|S(t) u0 - E_n exp(-t A_n^(alpha/2)) P_n u0|`` in L2, through the operators."""
    modes = max(u0.truncation, n - 1)
    cont = make_continuous_operator(alpha, modes)
    exact = semigroup_apply(cont, t, u0.field(modes)).coeffs
    disc = make_discrete_operator(n, alpha)
    lifted = interpolate_En(semigroup_apply(disc, t, project_Pn(u0.field(), n))).coeffs
    diff = exact.copy()
    diff[: n - 1] -= lifted
    return math.sqrt(math.fsum(diff**2))


@dataclass
class DeterministicReport:
    alpha: float
    eta: float
    t: float
    levels: list[int]
    errors: list[float]
    fitted_rate: RateFit
    smoothness_rate: float

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha, "eta": self.eta, "t": self.t,
            "levels": [{"n": n, "error": e} for n, e in zip(self.levels, self.errors)],
            "fitted_rate": self.fitted_rate.as_dict(),
            "reference_rate": {"value": self.smoothness_rate, "formula": "min(2*eta, alpha/2)"},
        }, indent=2)

    def to_csv(self) -> str:
        lines = ["n,error"] + [f"{n},{e!r}" for n, e in zip(self.levels, self.errors)]
        return "\n".join(lines) + "\n"


def deterministic_rate(alpha, eta, levels, t, u0_modes=4096) -> DeterministicReport:
    u0 = make_initial(eta, u0_modes)
    errors = [deterministic_gap(n, alpha, u0, t) for n in levels]
    fit = fit_rate(levels, errors, drop_outliers=False)
    return DeterministicReport(float(alpha), float(eta), float(t), list(levels), errors, fit,
                               min(2 * eta, alpha / 2))


# ---------------------------------------------------------------------------
# Monte-Carlo strong error


def path_error(path_n: SolutionPath, path_ref: SolutionPath) -> float:
    """Sup over the stored times of the L2 distance between a lifted level path and a reference."""
    if path_n.timegrid != path_ref.timegrid:
        raise ValueError("paths live on different time grids")
    a = path_ref.coefficients()
    c = path_n.coefficients()
    k = c.shape[1]
    if k > a.shape[1]:
        raise ValueError("reference has fewer modes than the level path")
    d2 = np.sum((a[:, :k] - c) ** 2, axis=1) + np.sum(a[:, k:] ** 2, axis=1)
    return float(np.sqrt(d2.max()))


def _distance(ref, c):
    k = c.shape[1]
    return np.sqrt(np.sum((ref[:, :k] - c) ** 2, axis=1) + np.sum(ref[:, k:] ** 2, axis=1))


def simulate_sup_errors(cfg: ExperimentConfig, samples, timegrid: TimeGrid, refine: int,
                        chunk: int = 128) -> np.ndarray:
    """Sup-in-time errors for the given sample indices, shape ``(len(samples), len(levels))``."""
    g = get_nemytskii(cfg.g)
    N = cfg.reference_level
    levels = list(cfg.levels)
    if max(levels) - 1 > N:
        raise ValueError(f"reference level {N} is coarser than level {max(levels)}")
    dt = timegrid.dt
    ref = reference_stepper(N, cfg.alpha, g, dt, cfg.ref_oversample, cfg.frozen_diffusion)
    steps = [discrete_stepper(n, cfg.alpha, g, dt, cfg.oversample, cfg.frozen_diffusion) for n in levels]
    u0 = make_initial(cfg.eta, N).coeffs
    batch = len(samples)
    c_ref = np.tile(u0, (batch, 1))
    cs = [np.tile(u0[: n - 1], (batch, 1)) for n in levels]
    sup = np.stack([_distance(c_ref, c) for c in cs], axis=1)
    bundles = [NoiseBundle(cfg.seed, N, timegrid, path=int(s), refine=refine) for s in samples]
    for k0 in range(0, timegrid.K, chunk):
        k1 = min(k0 + chunk, timegrid.K)
        dws = np.stack([b.increments(k0, k1) for b in bundles], axis=1)
        for i in range(k1 - k0):
            dw = dws[i]
            level = "reference"
            try:
                c_ref = ref.step(c_ref, dw)
                for li, (st, n) in enumerate(zip(steps, levels)):
                    level = n
                    cs[li] = st.step(cs[li], dw[:, : n - 1])
                    np.maximum(sup[:, li], _distance(c_ref, cs[li]), out=sup[:, li])
            except DivergenceError as exc:
                raise DivergenceError(f"level {level}, samples {samples[0]}..{samples[-1]}, step {k0 + i}: {exc}") from exc
    return sup


def _moments(values, p):
    """p-th root of the mean p-th moment and its delta-method standard error."""
    x = [float(v) ** p for v in values]
    s = len(x)
    mean = math.fsum(x) / s
    var = math.fsum((v - mean) ** 2 for v in x) / (s - 1)
    se_mean = math.sqrt(var / s)
    if mean <= 0:
        return 0.0, 0.0
    err = mean ** (1.0 / p)
    return err, err / (p * mean) * se_mean


def aggregate(sup_errors, levels, p) -> list[dict]:
    sup_errors = np.asarray(sup_errors)
    out = []
    for li, n in enumerate(levels):
        err, se = _moments(sup_errors[:, li], p)
        out.append({"n": int(n), "error": err, "stderr": se, "samples": int(sup_errors.shape[0])})
    return out


@dataclass
class ConvergenceReport:
    config: dict
    levels: list[dict]
    fitted_rate: RateFit | None
    theoretical: TheoreticalRate
    noise: dict
    dt_control: dict | None = None
    backend: str = BACKEND

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "levels": self.levels,
            "fitted_rate": self.fitted_rate.as_dict() if self.fitted_rate else None,
            "theoretical": self.theoretical.as_dict(),
            "dt_control": self.dt_control,
            "noise": self.noise,
            "backend": self.backend,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def to_csv(self) -> str:
        lines = ["n,error,stderr,samples"]
        lines += [f"{r['n']},{r['error']!r},{r['stderr']!r},{r['samples']}" for r in self.levels]
        return "\n".join(lines) + "\n"


def _run_samples(cfg, timegrid, refine, threads):
    idx = list(range(cfg.samples))
    batches = [idx[i:i + cfg.batch] for i in range(0, len(idx), cfg.batch)]

    def work(b):
        return simulate_sup_errors(cfg, b, timegrid, refine)

    if threads <= 1:
        parts = [work(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, batches))
    return np.concatenate(parts, axis=0)


def mc_strong_error(cfg: ExperimentConfig, threads: int = 1) -> ConvergenceReport:
    """Monte-Carlo strong errors for every level, coupled through shared noise.

    The main run takes ``K`` steps with two fine draws per step; when
    ``cfg.dt_control`` is set a second run takes ``2K`` steps on the same
    fine draws, so both runs see the same Brownian path.
    """
    if cfg.samples < 2:
        raise ValueError("need at least 2 samples")
    levels = list(cfg.levels)
    if sorted(set(levels)) != levels:
        raise ValueError("levels must be strictly increasing")
    K = cfg.steps
    grid = TimeGrid(cfg.T, K)
    sup = _run_samples(cfg, grid, 2, threads)
    rows = aggregate(sup, levels, cfg.p)
    errors = [r["error"] for r in rows]
    fit = fit_rate(levels, errors) if len(levels) >= 3 and min(errors) > 0 else None
    control = None
    if cfg.dt_control:
        sup2 = _run_samples(cfg, TimeGrid(cfg.T, 2 * K), 1, threads)
        rows2 = aggregate(sup2, levels, cfg.p)
        changes = [abs(b["error"] - a["error"]) / a["error"] if a["error"] > 0 else 0.0 for a, b in zip(rows, rows2)]
        control = {"K": 2 * K, "errors": [r["error"] for r in rows2], "relative_change": changes,
                   "max_relative_change": max(changes)}
    theory = theoretical_rate(cfg.alpha, cfg.delta, cfg.eta, cfg.p, cfg.theorem)
    noise = NoiseBundle(cfg.seed, cfg.reference_level, grid, refine=2).describe()
    noise.pop("path")
    noise["paths"] = cfg.samples
    return ConvergenceReport(cfg.echo(), rows, fit, theory, noise, control)


def commutator_norm(n: int, alpha: float, delta: float, t: float) -> float:
    """Frobenius norm of ``[A**-delta, E_n exp(-t A_n**(alpha/2)) P_n]`` on the first ``n-1`` sine modes.

    The lifted semigroup is assembled from a dense matrix exponential in grid
    coordinates, so the check does not presuppose a shared eigenbasis.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    frac = frac_matrix_spectral(n, alpha)
    sgp = dst1(dst1(expm(-t * frac)).T).T  # E_n S P_n in sine coefficients
    smooth = np.diag(((np.arange(1, n) * np.pi) ** 2) ** (-delta))
    return float(np.linalg.norm(smooth @ sgp - sgp @ smooth))
