"""Command-line runner: one subcommand per experiment, config file plus flag overrides.

Every subcommand prints its primary table (CSV) or report (JSON) to standard
output and, when ``--json-out``/``--csv-out`` are given, writes the files only
after the computation has finished.  The seed is echoed to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import fields

import numpy as np
from scipy.special import gamma as gamma_fn

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config
from .convergence import (
    deterministic_rate,
    fit_rate,
    lemma_sum_check,
    mc_strong_error,
    semigroup_gap,
)
from .grid import eigen_system
from .integrator import make_initial, solve_discrete, solve_reference
from .lifting import get_nemytskii
from .noise import NoiseBundle, TimeGrid
from .operators import (
    frac_matrix_balakrishnan,
    frac_matrix_spectral,
    green_kernel,
    gruenwald_apply,
    make_continuous_operator,
    make_discrete_operator,
)

COMMANDS = ("eigens", "operator", "green", "gap", "lemma-check", "det-rate", "strong-rate", "gruenwald")

# flags that switch a boolean key instead of taking a value
_SWITCHES = {
    "frozen_diffusion": ("--frozen-diffusion", True),
    "dt_control": ("--no-dt-control", False),
    "continuous": ("--continuous", True),
}
_ALIASES = {"n_ref": ["--ref-n"]}


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands: each returns (json_text, csv_text, primary) with primary "json" or "csv"


def cmd_eigens(cfg, threads):
    es = eigen_system(cfg.n)
    return es.to_json(), es.to_csv(), "csv"


def cmd_operator(cfg, threads):
    if cfg.method not in ("spectral", "balakrishnan", "both"):
        raise ValueError(f"method must be spectral, balakrishnan or both, got {cfg.method!r}")
    mats = {}
    if cfg.method in ("spectral", "both"):
        mats["spectral"] = frac_matrix_spectral(cfg.n, cfg.alpha)
    if cfg.method in ("balakrishnan", "both"):
        mats["balakrishnan"] = frac_matrix_balakrishnan(cfg.n, cfg.alpha, rel_tol=cfg.rel_tol)
    names = list(mats)
    dim = cfg.n - 1
    rows = [[i + 1, j + 1] + [float(mats[k][i, j]) for k in names] for i in range(dim) for j in range(dim)]
    report = {"n": cfg.n, "alpha": cfg.alpha, "matrices": {k: v.tolist() for k, v in mats.items()}}
    if len(names) == 2:
        a, b = mats["spectral"], mats["balakrishnan"]
        report["max_relative_difference"] = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return json.dumps(report, indent=2), _csv(["i", "j"] + names, rows), "csv"


def cmd_green(cfg, threads):
    if cfg.continuous:
        op = make_continuous_operator(cfg.alpha, 1)
    else:
        op = make_discrete_operator(cfg.n, cfg.alpha)
    x = np.asarray(cfg.x, dtype=np.float64)
    y = np.asarray(cfg.y, dtype=np.float64)
    if np.any((x <= 0) | (x >= 1)) or np.any((y <= 0) | (y >= 1)):
        raise ValueError("kernel points must lie in (0, 1)")
    vals = green_kernel(op, cfg.t, x[:, None], y[None, :])
    rows = [[float(xi), float(yj), float(vals[a, b])] for a, xi in enumerate(x) for b, yj in enumerate(y)]
    report = {"alpha": cfg.alpha, "t": cfg.t, "continuous": cfg.continuous,
              "n": None if cfg.continuous else cfg.n,
              "points": [{"x": r[0], "y": r[1], "kernel": r[2]} for r in rows]}
    return json.dumps(report, indent=2), _csv(["x", "y", "kernel"], rows), "csv"


def cmd_gap(cfg, threads):
    rows = []
    for n in cfg.levels:
        g = semigroup_gap(n, cfg.alpha, cfg.delta, cfg.t)
        rows.append([n, g.operator, g.hilbert_schmidt, g.head_sum, g.tail_sum, g.tail_terms, g.tail_precision])
    header = ["n", "operator", "hilbert_schmidt", "head_sum", "tail_sum", "tail_terms", "tail_precision"]
    report = {"alpha": cfg.alpha, "delta": cfg.delta, "t": cfg.t, "levels": [dict(zip(header, r)) for r in rows]}
    return json.dumps(report, indent=2), _csv(header, rows), "csv"


def cmd_lemma_check(cfg, threads):
    table = lemma_sum_check(cfg.alpha, cfg.delta, cfg.gamma, cfg.t_grid, cfg.levels)
    return table.to_json(), table.to_csv(), "csv"


def cmd_det_rate(cfg, threads):
    rep = deterministic_rate(cfg.alpha, cfg.eta, cfg.levels, cfg.t, cfg.u0_modes)
    return rep.to_json(), rep.to_csv(), "json"


def _dump_paths(cfg, prefix):
    grid = TimeGrid(cfg.T, cfg.steps)
    g = get_nemytskii(cfg.g)
    N = cfg.reference_level
    u0 = make_initial(cfg.eta, N)
    bundle = NoiseBundle(cfg.seed, N, grid, path=0, refine=2)
    paths = [("ref", solve_reference(N, cfg.alpha, g, u0, grid, bundle, cfg.ref_oversample, cfg.frozen_diffusion), "c")]
    for n in cfg.levels:
        paths.append((f"n{n}", solve_discrete(n, cfg.alpha, g, u0, grid, bundle, cfg.oversample,
                                              cfg.frozen_diffusion), "u"))
    out = {}
    for tag, path, col in paths:
        header = ["t"] + [f"{col}{k}" for k in range(1, path.states.shape[1] + 1)]
        rows = ([float(t)] + [float(v) for v in s] for t, s in zip(grid.times, path.states))
        out[f"{prefix}_{tag}.csv"] = _csv(header, rows)
    return out


def cmd_strong_rate(cfg, threads):
    rep = mc_strong_error(cfg, threads=threads)
    th = rep.theoretical
    if not th.hypotheses_met:
        print("warning: hypotheses of the rate estimate not met: " + "; ".join(th.violations), file=sys.stderr)
    return rep.to_json(), rep.to_csv(), "json"


def cmd_gruenwald(cfg, threads):
    power = {"1": 0.0, "x": 1.0, "x^2": 2.0}
    if cfg.function not in power:
        raise ValueError(f"function must be one of {sorted(power)}, got {cfg.function!r}")
    k, r, x = power[cfg.function], cfg.r, cfg.eval_x
    exact = float(gamma_fn(k + 1) / gamma_fn(k + 1 - r) * x ** (k - r))
    rows = []
    for n in cfg.levels:
        samples = (np.arange(n + 1) / n) ** k
        val = gruenwald_apply(r, n, samples, x)
        rows.append([n, val, exact, abs(val - exact)])
    errors = [row[3] for row in rows]
    report = {"r": r, "function": cfg.function, "x": x, "exact": float(exact),
              "levels": [{"n": row[0], "value": row[1], "error": row[3]} for row in rows]}
    if len(rows) >= 3 and min(errors) > 0:
        report["order"] = fit_rate(cfg.levels, errors, drop_outliers=False).as_dict()
    return json.dumps(report, indent=2), _csv(["n", "value", "exact", "error"], rows), "csv"


HANDLERS = {
    "eigens": cmd_eigens,
    "operator": cmd_operator,
    "green": cmd_green,
    "gap": cmd_gap,
    "lemma-check": cmd_lemma_check,
    "det-rate": cmd_det_rate,
    "strong-rate": cmd_strong_rate,
    "gruenwald": cmd_gruenwald,
}


# ---------------------------------------------------------------------------
# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file; flags override its values")
    common.add_argument("--threads", type=int, default=1, help="worker threads for Monte-Carlo batches")
    for f in fields(ExperimentConfig):
        if f.name == "command":
            continue
        if f.name in _SWITCHES:
            flag, value = _SWITCHES[f.name]
            common.add_argument(flag, dest=f.name, action="store_const", const=value, default=None)
            continue
        flags = [f"--{f.name.replace('_', '-')}"] + _ALIASES.get(f.name, [])
        common.add_argument(*flags, dest=f.name, default=None, metavar=f.name.upper())
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracshe", description="Fractional stochastic heat equation experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fracshe-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "threads")}
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, json.JSONDecodeError) as exc:
        parser.error(str(exc))
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    print(f"seed={cfg.seed}", file=sys.stderr)
    try:
        json_text, csv_text, primary = HANDLERS[cfg.command](cfg, args.threads)
        outputs = {}
        if cfg.dump_paths and cfg.command == "strong-rate":
            outputs.update(_dump_paths(cfg, cfg.dump_paths))
        if cfg.json_out:
            outputs[cfg.json_out] = json_text + "\n"
        if cfg.csv_out:
            outputs[cfg.csv_out] = csv_text
        for path, text in outputs.items():
            _write_atomic(path, text)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(json_text + "\n" if primary == "json" else csv_text)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
