"""Batch experiment driver.

Each subcommand reads a TOML config with sections ``[distribution]``,
``[kernel]``, ``[quadrature]`` and ``[experiment]``, runs one experiment and
writes plot-ready tables plus a JSON run manifest into ``--out``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .asymptotics import berry_esseen_bound, clt_run, distributional_clt_ks, weighted_density
from .distributions import from_dict, has_density
from .errors import ConfigError, DomainError, NotADensity, NumericalError
from .estimators import LocationModel, invert_m1, monte_carlo_study
from .inverse import (
    default_grid,
    scaled_noise,
    tikhonov_multiplier,
    tikhonov_noisy,
    weighted_cdf,
    weighted_cdf_reference,
)
from .kernels import KernelSpec, gevrey_diagnostic
from .momentproblem import (
    carleman_partial_sums,
    recover_2d,
    recover_from_weak_moments,
    weak_moments_2d,
)
from .quadrature import QuadratureConfig
from .weakcore import (
    GRID_COLUMNS,
    WeakPair,
    cf_derivative_at_zero,
    grid_rows,
    normalise,
    scale_pair,
    sum_cumulants,
    translate_pair,
    weak_cf_grid,
    weak_cgf,
    weak_cumulants,
    weak_moments,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DOMAIN = 0, 2, 3, 4
DEFAULT_SEED = 7

_CAUCHY = {"family": "cauchy", "mu": 0.0, "gamma": 1.0}
_GAUSS = {"family": "gaussian", "mean": 0.0, "sd": 1.0}
_TIGHT = {"abs_tol": 1e-14, "rel_tol": 1e-13}

# per subcommand: distribution default, quadrature overrides, experiment defaults
SUBCOMMANDS = {
    "moments": (_CAUCHY, {}, {"N": 12, "normalise": False, "fd_order": 0, "fd_step": 1e-2,
                              "compare": {}}),
    "cf": (_CAUCHY, {}, {"T_max": 5.0, "n_points": 101, "normalise": False}),
    "cumulants": (_CAUCHY, {}, {"N": 6, "partner": _GAUSS, "shift": 2.0, "scale": 3.0}),
    "clt": (_CAUCHY, _TIGHT, {"n_list": [100, 1000, 10000, 100000], "T_max": 3.0,
                              "n_points": 121, "bound": True}),
    "distclt": (_CAUCHY, {}, {"n_list": [10, 100, 1000], "reps": 100000}),
    "recover": (_GAUSS, {}, {"N": 20, "dimension": 1, "A": [[1.0, 0.0], [0.0, 1.0]],
                             "grid": False, "grid_step": 0.01,
                             "sweep": [4, 8, 12, 16, 20]}),
    "cdf": (_CAUCHY, {}, {"a": 0.7, "eps": [0.5, 0.25, 0.125, 0.0625],
                          "a_min": -10.0, "a_max": 10.0, "a_points": 41}),
    "tikhonov": (_GAUSS, {}, {"deltas": [0.0, 1e-2, 1e-3, 1e-4],
                              "lambdas": [1e-1, 1e-2, 1e-3, 1e-4],
                              "schedule": True, "write_grid": False}),
    "estimate": (_CAUCHY, {}, {"mu_true": 0.0, "sigma": 1.0,
                               "n_list": [100, 1000, 10000], "reps": 500,
                               "round_trip": [-1.0, -0.5, 0.0, 0.5, 1.0]}),
    "gevrey": (_CAUCHY, {}, {"k_max": 20, "m_max": 2, "x_max": 20.0, "step": 1e-3}),
    "carleman": (_CAUCHY, {}, {"N": 30}),
}
SECTIONS = ("distribution", "kernel", "quadrature", "experiment")


# --- configuration -----------------------------------------------------------

def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config_file(path: str) -> tuple[dict, dict]:
    """Returns (config, manifest extras).  Accepts TOML configs and JSON manifests."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if "config" not in data:
            raise ConfigError(f"{path}: manifest has no 'config' field")
        return data["config"], data
    try:
        return tomllib.loads(text), {}
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        section, dot, field = key.strip().partition(".")
        parsed = _parse_value(value.strip())
        if sep and not dot and isinstance(parsed, dict):
            cfg[section] = parsed
            continue
        if not sep or not dot or not field:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        cfg.setdefault(section, {})[field] = parsed
    return cfg


def _coerce(name: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"[experiment] {name} must be a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[experiment] {name} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[experiment] {name} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"[experiment] {name} must be a table, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"[experiment] {name} must be a non-empty list, got {value!r}")
        return value
    return value


def resolve_config(subcommand: str, raw: dict) -> dict:
    """Fill defaults and validate every section for ``subcommand``."""
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    dist_default, quad_default, exp_default = SUBCOMMANDS[subcommand]
    for sec in SECTIONS:
        if sec in raw and not isinstance(raw[sec], dict):
            raise ConfigError(f"[{sec}] must be a table")
    dist_raw = dict(raw.get("distribution") or {})
    if "family" not in dist_raw:
        # parameter tweaks without a family refine the subcommand's default law
        dist_raw = {**dist_default, **dist_raw}
    dist = from_dict(dist_raw).to_dict()
    kernel = KernelSpec.from_dict(dict(raw.get("kernel", {}))).to_dict()
    quad_raw = {**quad_default, **raw.get("quadrature", {})}
    allowed_q = set(QuadratureConfig.__dataclass_fields__)
    bad = set(quad_raw) - allowed_q
    if bad:
        raise ConfigError(f"[quadrature] unknown keys: {sorted(bad)}")
    quad = {**QuadratureConfig().__dict__, **quad_raw}
    exp_raw = raw.get("experiment", {})
    bad = set(exp_raw) - set(exp_default)
    if bad:
        raise ConfigError(f"[experiment] unknown keys for {subcommand}: {sorted(bad)}")
    exp = {k: _coerce(k, exp_raw[k], v) if k in exp_raw else copy.deepcopy(v)
           for k, v in exp_default.items()}
    return {"distribution": dist, "kernel": kernel, "quadrature": quad, "experiment": exp}


# --- output ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(out: Path, name: str, columns, rows, fmt: str) -> str:
    if fmt == "json":
        fname = f"{name}.json"
        text = json.dumps({"columns": list(columns), "rows": _jsonable([list(r) for r in rows])},
                          indent=1) + "\n"
    else:
        fname = f"{name}.csv"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    atomic_write(out / fname, text)
    return fname


# --- subcommands -------------------------------------------------------------
# Each returns (tables, summary); tables are (name, columns, rows).

def _pair(cfg) -> WeakPair:
    return WeakPair(from_dict(cfg["distribution"]), KernelSpec.from_dict(cfg["kernel"]),
                    QuadratureConfig(**cfg["quadrature"]))


def cmd_moments(cfg, seed, workers):
    p = _pair(cfg)
    if cfg["experiment"]["normalise"]:
        p = normalise(p)
    e = cfg["experiment"]
    ms = weak_moments(p, e["N"])
    cols, table = ["n", "m_n"], [list(range(e["N"] + 1)), list(ms.values)]
    summary = {"m0": ms.values[0]}
    if e["fd_order"] > 0:
        # i^-n D^n cf(0) should reproduce m_n
        fd = [cf_derivative_at_zero(p, n, e["fd_step"]) / 1j ** n if n <= e["fd_order"] else math.nan
              for n in range(e["N"] + 1)]
        cols.append("m_n_from_cf")
        table.append([v.real if isinstance(v, complex) else v for v in fd])
    if e["compare"]:
        other = WeakPair(from_dict(e["compare"]), p.kernel, p.quad)
        mc = weak_moments(normalise(other) if e["normalise"] else other, e["N"]).values
        cols += ["m_n_compare", "difference"]
        table += [list(mc), list(ms.values - mc)]
        summary["max_abs_difference"] = float(np.max(np.abs(ms.values - mc)))
    return [("moments", tuple(cols), list(zip(*table)))], summary


def cmd_cf(cfg, seed, workers):
    e = cfg["experiment"]
    p = _pair(cfg)
    if e["normalise"]:
        p = normalise(p)
    grid = weak_cgf(weak_cf_grid(p, e["T_max"], e["n_points"], workers))
    return [("cf", GRID_COLUMNS, grid_rows(grid))], {"max_winding": int(np.abs(grid.branch_windings).max())}


def cmd_cumulants(cfg, seed, workers):
    e = cfg["experiment"]
    N = e["N"]
    p = _pair(cfg)
    q = WeakPair(from_dict(e["partner"]), p.kernel, p.quad)
    cs = weak_cumulants(p, N)
    pn, qn = normalise(p), normalise(q)
    cols = ("n", "kappa_n", "kappa_partner", "kappa_sum", "kappa_shifted", "kappa_scaled")
    series = [cs.values, weak_cumulants(qn, N).values, sum_cumulants(pn, qn, N).values,
              weak_cumulants(translate_pair(p, e["shift"]), N).values,
              weak_cumulants(scale_pair(p, e["scale"]), N).values]
    rows = [(n, *(v[n - 1] for v in series)) for n in range(1, N + 1)]
    return [("cumulants", cols, rows)], {"m0": cs.base_normalisation}


def cmd_clt(cfg, seed, workers):
    e = cfg["experiment"]
    p = normalise(_pair(cfg))
    run = clt_run(p, e["n_list"], e["T_max"], e["n_points"], workers)
    summary = {"kappa1": run.kappa1, "kappa2": run.kappa2, "fitted_slope": run.fitted_slope}
    bounds = [math.nan] * len(run.n_list)
    if e["bound"]:
        be = berry_esseen_bound(p, e["T_max"], cumulants=(run.kappa1, run.kappa2, 1.0))
        bounds = [float(be.bound(n)) for n in run.n_list]
        summary["M_T"] = be.M_T
        summary["bound_holds"] = bool(np.all(run.log_errors <= np.array(bounds)))
    rows = [(n, s, l, b, run.fitted_slope)
            for n, s, l, b in zip(run.n_list, run.sup_errors, run.log_errors, bounds)]
    return [("clt", ("n", "sup_error", "log_error", "bound", "fitted_slope"), rows)], summary


def cmd_distclt(cfg, seed, workers):
    e = cfg["experiment"]
    p = _pair(cfg)
    h = weighted_density(p)
    cs = weak_cumulants(p, 2)
    kappa = (cs.kappa(1), cs.kappa(2))
    rows = []
    for n in e["n_list"]:
        ks = distributional_clt_ks(h, n, e["reps"], seed, workers, kappa)
        rows.append((n, ks, 1.36 / math.sqrt(e["reps"])))
    summary = {"Z": h.Z, "mean_h": h.mean, "var_h": h.var, "kappa1": kappa[0], "kappa2": kappa[1]}
    return [("distclt", ("n", "ks", "ks_noise_floor"), rows)], summary


def cmd_recover(cfg, seed, workers):
    e = cfg["experiment"]
    d = from_dict(cfg["distribution"])
    N = e["N"]
    if e["dimension"] == 2:
        if not has_density(d):
            raise NotADensity("2-D recovery needs a density")
        A = np.array(e["A"], dtype=float)
        m = weak_moments_2d(d, d, N, A)
        r = recover_2d(m, N, A, truth=lambda x, y: d.pdf(x) * d.pdf(y))
        rows = [(a1, a2, c) for (a1, a2), c in sorted(r.hermite_coeffs.items())]
        return [("recover", ("alpha1", "alpha2", "coeff"), rows)], {"l2_error": r.l2_error}
    if e["dimension"] != 1:
        raise ConfigError("[experiment] dimension must be 1 or 2")
    p = _pair(cfg)
    truth = d.pdf if has_density(d) else None
    r = recover_from_weak_moments(weak_moments(p, N), N, truth)
    tables = [("recover", ("k", "coeff"), list(enumerate(r.hermite_coeffs)))]
    if truth and e["sweep"]:
        ms = weak_moments(p, max(e["sweep"]))
        errs = [recover_from_weak_moments(ms, n, truth).l2_error for n in e["sweep"]]
        tables.append(("recover_sweep", ("N", "l2_error"), list(zip(e["sweep"], errs))))
    if e["grid"] and r.reconstructed_density is not None:
        x = np.arange(-10.0, 10.0 + e["grid_step"] / 2, e["grid_step"])
        ft = truth(x) if truth else np.full_like(x, math.nan)
        tables.append(("recover_grid", ("x", "f_true", "f_N"),
                       list(zip(x, ft, r.reconstructed_density(x)))))
    summary = {"l2_error": r.l2_error, "condition_estimate": r.condition_estimate,
               "residual": r.residual}
    return tables, summary


def cmd_cdf(cfg, seed, workers):
    e = cfg["experiment"]
    p = _pair(cfg)
    wc = weighted_cdf(p, e["a"], e["eps"])
    rows = [(eps, v, err) for eps, v, err in zip(wc.eps, wc.values, wc.errors)]
    grid = np.linspace(e["a_min"], e["a_max"], e["a_points"])
    F = [weighted_cdf_reference(p, a) for a in grid]
    summary = {"reference": wc.reference, "limit": wc.limit,
               "monotone": bool(np.all(np.diff(F) >= 0))}
    return [("cdf", ("eps", "value", "abs_error"), rows),
            ("cdf_grid", ("a", "F_phi"), list(zip(grid, F)))], summary


def cmd_tikhonov(cfg, seed, workers):
    e = cfg["experiment"]
    d = from_dict(cfg["distribution"])
    if not has_density(d):
        raise NotADensity("Tikhonov reconstruction needs a density")
    k = KernelSpec.from_dict(cfg["kernel"])
    x = default_grid()

    def g(t):
        return k(t) * d.pdf(t)

    noise = {delta: scaled_noise(x, delta, np.random.SeedSequence(seed, spawn_key=(i,)))
             for i, delta in enumerate(e["deltas"])}
    rows, grids = [], []
    for delta in e["deltas"]:
        for lam in e["lambdas"]:
            r = tikhonov_noisy(k, g, noise[delta], lam, truth=d.pdf, x=x)
            rows.append((delta, lam, r.l2_error, r.bias_term, r.bound_value, r.bound_holds))
            if e["write_grid"]:
                grids.append(r)
    tables = [("tikhonov", ("delta", "lambda", "l2_error", "bias", "bound", "holds"), rows)]
    summary = {"all_bounds_hold": all(r[-1] for r in rows),
               "operator_bound_holds": all(
                   float(np.max(tikhonov_multiplier(k, lam, x))) <= 1.0 / (2.0 * math.sqrt(lam))
                   for lam in e["lambdas"])}
    if e["schedule"]:
        sched = []
        for delta in e["deltas"]:
            if delta > 0:
                r = tikhonov_noisy(k, g, noise[delta], delta, truth=d.pdf, x=x)
                sched.append((delta, delta, r.l2_error, r.bound_value))
        tables.append(("tikhonov_schedule", ("delta", "lambda", "l2_error", "bound"), sched))
    if grids:
        r = grids[-1]
        tables.append(("tikhonov_grid", ("x", "f_true", "g", "g_noisy", "R_lambda_g"),
                       list(zip(x, d.pdf(x), g(x), r.g_noisy, r.reconstruction))))
    return tables, summary


def cmd_estimate(cfg, seed, workers):
    e = cfg["experiment"]
    model = LocationModel(e["sigma"], QuadratureConfig(**cfg["quadrature"]))
    st = monte_carlo_study(e["mu_true"], e["sigma"], e["n_list"], e["reps"], seed, workers, model)
    rows = list(zip(st.n_list, st.bias, st.sd, st.sd_sqrt_n, st.failures))
    trips = [abs(invert_m1(model.m1(mu), model) - mu) for mu in e["round_trip"]]
    summary = {"monotone_interval": list(model.monotone_interval),
               "round_trip_max_error": max(trips) if trips else math.nan}
    return [("estimate", ("n", "bias", "sd", "sd_sqrt_n", "failures"), rows)], summary


def cmd_gevrey(cfg, seed, workers):
    e = cfg["experiment"]
    k = KernelSpec.from_dict(cfg["kernel"])
    rep = gevrey_diagnostic(k, e["k_max"], e["m_max"], e["x_max"], e["step"])
    rows = [(int(m), int(kk), rep.sup_table[i, j])
            for i, m in enumerate(rep.m_values) for j, kk in enumerate(rep.k_values)]
    summary = {"beta": rep.beta, "A": rep.fitted_A, "C": rep.fitted_C, "finite": rep.finite}
    return [("gevrey", ("m", "k", "sup"), rows)], summary


def cmd_carleman(cfg, seed, workers):
    k = KernelSpec.from_dict(cfg["kernel"])
    c = carleman_partial_sums(k, cfg["experiment"]["N"])
    ns = range(1, len(c.mu) + 1)
    if k.family == "gaussian" and k.shift == 0:
        # int x^2n c exp(-a s^2 x^2) dx = c Gamma(n + 1/2) (a s^2)^-(n + 1/2)
        exact = [k.c * math.exp(math.lgamma(n + 0.5) - (n + 0.5) * math.log(k.a * k.scale ** 2))
                 for n in ns]
    else:
        exact = [math.nan] * len(c.mu)
    rows = list(zip(ns, c.mu, exact, c.terms, c.partial_sums))
    return ([("carleman", ("n", "mu_2n", "mu_2n_closed_form", "term", "partial_sum"), rows)],
            {"fitted_exponent": c.fitted_exponent})


COMMANDS = {
    "moments": cmd_moments, "cf": cmd_cf, "cumulants": cmd_cumulants, "clt": cmd_clt,
    "distclt": cmd_distclt, "recover": cmd_recover, "cdf": cmd_cdf, "tikhonov": cmd_tikhonov,
    "estimate": cmd_estimate, "gevrey": cmd_gevrey, "carleman": cmd_carleman,
}


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config or a JSON run manifest to replay")
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default {DEFAULT_SEED})")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    parser = argparse.ArgumentParser(prog="weakmoments", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    raw, manifest = load_config_file(args.config) if args.config else ({}, {})
    if manifest and manifest.get("subcommand") not in (None, args.subcommand):
        raise ConfigError(f"manifest is for '{manifest['subcommand']}', not '{args.subcommand}'")
    seed = args.seed if args.seed is not None else manifest.get("seed", DEFAULT_SEED)
    if seed < 0:
        raise ConfigError("--seed must be nonnegative")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    cfg = resolve_config(args.subcommand, apply_overrides(raw, args.set))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tables, summary = COMMANDS[args.subcommand](cfg, seed, args.threads)
    files = [write_table(out, name, cols, rows, args.format) for name, cols, rows in tables]
    man = {"subcommand": args.subcommand, "config": cfg, "seed": seed, "version": __version__,
           "outputs": files, "summary": _jsonable(summary),
           "wall_clock_seconds": time.perf_counter() - start}
    atomic_write(out / f"{args.subcommand}_manifest.json", json.dumps(_jsonable(man), indent=1) + "\n")
    print(json.dumps({"outputs": files, **_jsonable(summary)}))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        code = EXIT_DOMAIN
    if __name__ == "__main__":
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
