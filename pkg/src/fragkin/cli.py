"""Command-line front end.

Each subcommand builds a measure (``--example`` or a ``measure`` block in
``--config``), runs one estimator or check and writes a JSON report (stdout
or ``--output``) and, where it makes sense, a CSV table (``--csv``).

Exit codes: 0 success, 1 a gated check failed, 2 usage or configuration error.
Values are layered as config file < ``FRAGKIN_SEED`` < command-line flags.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .catalog import catalog, example_measure, limit_measure
from .errors import FragkinError
from .initial import InitialMeasure, PowerTail, StretchedExpTail
from .measure import FragmentationMeasure, laplace_exponent, rate_functions
from .solution import (SimParams, estimate_solution, mass_curve, report_json, verify_atom_mass,
                       verify_quasi_stationary_evolution, verify_rescaled_convergence, verify_unbounded_initial,
                       verify_window_statistics)

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

CONFIG_KEYS = {"measure", "example", "gamma", "a", "b", "alpha", "variant", "initial", "t", "t_grid", "grid",
               "n_rep", "seed", "eps", "tail_tol", "window_cap", "threads", "output", "csv", "lam", "method",
               "g_exponent", "tail", "only", "gamma_tail"}


class UsageError(Exception):
    pass


def _floats(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment file; flags override its fields")
    common.add_argument("--example", type=int, choices=[1, 2, 3, 4, 5])
    common.add_argument("--gamma", type=float)
    common.add_argument("--a", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--variant", choices=["dust", "printed"])
    common.add_argument("--t", type=_floats, help="comma-separated times")
    common.add_argument("--grid", type=_floats, help="comma-separated evaluation points")
    common.add_argument("--n-rep", dest="n_rep", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--eps", type=float)
    common.add_argument("--tail-tol", dest="tail_tol", type=float)
    common.add_argument("--threads", type=int)
    common.add_argument("--output", help="JSON report path (default: stdout)")
    common.add_argument("--csv", help="CSV table path")

    p = argparse.ArgumentParser(prog="fragkin", description="Monte Carlo solutions of the self-similar "
                                "fragmentation equation with shattering.")
    p.add_argument("--version", action="version", version=f"fragkin {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    ph = sub.add_parser("phi", parents=[common], help="tabulate phi, varphi and h")
    ph.add_argument("--gamma-tail", dest="gamma_tail", type=float, help="tail exponent for h")
    sub.add_parser("mass", parents=[common], help="mass curve m(t) with common random numbers")
    sub.add_parser("simulate", parents=[common], help="sample dump of X(t)")
    sub.add_parser("limit", parents=[common], help="limit-measure moments and rescaled convergence")
    w = sub.add_parser("windows", parents=[common], help="window statistics against 1/(|alpha| kappa)")
    w.add_argument("--g-exponent", dest="g_exponent", type=float, help="g(t) = t**-p (default 0.25)")
    at = sub.add_parser("atom", parents=[common], help="atom at 1 and its ratio to m(t)")
    at.add_argument("--method", choices=["direct", "population"])
    q = sub.add_parser("qs", parents=[common], help="quasi-stationary evolution")
    q.add_argument("--lam", type=float)
    u = sub.add_parser("unbounded", parents=[common], help="mass decay from unbounded initial data")
    u.add_argument("--tail", help="power:C:gamma or stretched_exp:C:gamma")
    acc = sub.add_parser("acceptance", parents=[common], help="run the acceptance suite")
    acc.add_argument("--only", type=_floats, help="comma-separated criterion numbers")
    return p


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be an object")
    bad = sorted(set(cfg) - CONFIG_KEYS)
    if bad:
        raise UsageError(f"{path}: unknown field(s) {', '.join(map(repr, bad))}")
    return cfg


def _settings(args):
    cfg = _load_config(args.config)
    env = os.environ.get("FRAGKIN_SEED")
    if env is not None and env.strip():
        try:
            cfg["seed"] = int(env)
        except ValueError as exc:
            raise UsageError(f"FRAGKIN_SEED must be an integer, got {env!r}") from exc
    for k, v in vars(args).items():
        if k in ("config", "command") or v is None:
            continue
        cfg[k] = v
    for k in ("t", "t_grid", "grid"):
        if k in cfg and cfg[k] is not None:
            try:
                cfg[k] = _floats(cfg[k])
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"field {k!r}: {exc}") from exc
    return cfg


def _measure(cfg) -> FragmentationMeasure:
    if "measure" in cfg:
        if not isinstance(cfg["measure"], dict):
            raise UsageError("field 'measure': expected an object")
        return FragmentationMeasure.from_spec(cfg["measure"])
    if "example" not in cfg:
        raise UsageError("give --example N or a 'measure' block in --config")
    params = {k: cfg.get(k) for k in ("gamma", "a", "b", "alpha", "variant")}
    return example_measure(int(cfg["example"]), **params)


def _initial(cfg) -> InitialMeasure:
    return InitialMeasure.from_spec(cfg.get("initial"))


def _sim(cfg, n_default=100_000) -> SimParams:
    return SimParams(eps=cfg.get("eps"), tail_tol=float(cfg.get("tail_tol", 1e-12)),
                     window_cap=int(cfg.get("window_cap", 64)), n_rep=int(cfg.get("n_rep", n_default)),
                     seed=int(cfg.get("seed", 0)), threads=int(cfg.get("threads", 1)))


def _times(cfg, default=None):
    t = cfg.get("t") or cfg.get("t_grid") or default
    if not t:
        raise UsageError("give the times with --t")
    return t


def _g17(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_g17(v) for v in r])


def _emit(cfg, report):
    text = report_json(report)
    if cfg.get("output"):
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _meta(cmd, cfg, B=None):
    m = {"command": cmd, "version": __version__, "seed": int(cfg.get("seed", 0))}
    if B is not None:
        m["measure"] = B.to_spec()
    return m


# --------------------------------------------------------------------------
# subcommands: each returns (report, passed-or-None)
# --------------------------------------------------------------------------

def cmd_phi(cfg):
    B = _measure(cfg)
    tab = laplace_exponent(B)
    rf = rate_functions(tab, gamma=cfg.get("gamma_tail"))
    grid = cfg.get("grid") or cfg.get("t") or [0.5, 1.0, 2.0, 4.0]
    rows = []
    for s in grid:
        vp = rf.varphi(s) if s > tab.ratio_infimum else None
        h = rf.h(s) if rf.gamma is not None and s > 0 else None
        rows.append({"s": s, "phi": tab.phi(s), "varphi": vp, "h": h})
    if cfg.get("csv"):
        _write_csv(cfg["csv"], ["s", "phi", "varphi", "h"],
                   [["" if r[k] is None else r[k] for k in ("s", "phi", "varphi", "h")] for r in rows])
    rep = {"metadata": _meta("phi", cfg, B), "phi_inf": tab.phi_inf, "kappa": tab.kappa, "beta": tab.beta,
           "ratio_infimum": tab.ratio_infimum, "rows": rows}
    return rep, None


def _exact_mass(cfg, B):
    if "measure" in cfg or "initial" in cfg:
        return None
    try:
        e = catalog(int(cfg["example"]), **{k: cfg.get(k) for k in ("gamma", "a", "b", "alpha", "variant")})
    except FragkinError:
        return None
    return e.m1


def cmd_mass(cfg):
    B = _measure(cfg)
    mu0 = _initial(cfg)
    grid = _times(cfg)
    sim = _sim(cfg)
    c = mass_curve(B, mu0, grid, sim)
    m1 = _exact_mass(cfg, B)
    rows, passed = [], None
    for t, m, se in c.rows():
        row = {"t": t, "mass": m, "se": se}
        if m1 is not None:
            ex = float(m1(t))
            row["exact"] = ex
            row["z"] = (m - ex) / se if se > 0 else (0.0 if m == ex else math.inf)
        rows.append(row)
    if m1 is not None:
        passed = all(abs(r["z"]) <= 3 for r in rows)
    if cfg.get("csv"):
        hdr = ["t", "mass", "se"] + (["exact", "z"] if m1 is not None else [])
        _write_csv(cfg["csv"], hdr, [[r[k] for k in hdr] for r in rows])
    rep = {"metadata": _meta("mass", cfg, B), "n_rep": c.n_rep, "rows": rows, "gate": "3 SE vs exact m_1",
           "passed": passed}
    return rep, passed


def cmd_simulate(cfg):
    B = _measure(cfg)
    mu0 = _initial(cfg)
    sim = _sim(cfg, 10_000)
    out, dump = [], []
    for t in _times(cfg):
        sol = estimate_solution(B, mu0, t, sim)
        out.append(sol.summary())
        if cfg.get("csv"):
            dump.extend((i, t, bool(v > 0), v) for i, v in enumerate(sol.values))
    if cfg.get("csv"):
        _write_csv(cfg["csv"], ["replicate", "t", "alive", "value"], dump)
    return {"metadata": _meta("simulate", cfg, B), "solutions": out}, None


def cmd_limit(cfg):
    B = _measure(cfg)
    tab = laplace_exponent(B)
    lim = limit_measure(tab, B.alpha)
    moments = [{"n": n, "moment": lim.moments(n)} for n in range(0, 5)]
    rep = {"metadata": _meta("limit", cfg, B), "moments_R": moments, "support_sup": lim.support_sup}
    passed = None
    if cfg.get("t") or cfg.get("t_grid"):
        conv = verify_rescaled_convergence(B, _initial(cfg), _times(cfg), _sim(cfg))
        rep["convergence"] = conv.to_dict()
        passed = conv.passed
        if cfg.get("csv"):
            _write_csv(cfg["csv"], ["t", "rescale", "moment", "se", "target", "gap"],
                       [(t, f, m[0], m[1], conv.targets[1], g)
                        for t, f, m, g in zip(conv.t, conv.rescale, conv.moments[1], conv.gaps)])
    return rep, passed


def cmd_windows(cfg):
    B = _measure(cfg)
    p = float(cfg.get("g_exponent", 0.25))
    r = verify_window_statistics(B, _initial(cfg), lambda t: t ** -p, _times(cfg), _sim(cfg))
    if cfg.get("csv"):
        _write_csv(cfg["csv"], ["t", "value", "se", "target"], [(t, v, s, r.target) for t, v, s in zip(r.t, r.values, r.ses)])
    return {"metadata": _meta("windows", cfg, B), "g_exponent": p, "report": r.to_dict()}, r.passed


def cmd_atom(cfg):
    B = _measure(cfg)
    r = verify_atom_mass(B, _initial(cfg), _times(cfg), _sim(cfg), method=cfg.get("method", "direct"))
    if cfg.get("csv"):
        _write_csv(cfg["csv"], ["t", "atom", "se", "predicted", "ratio", "ratio_se"],
                   list(zip(r.t, r.atom, r.atom_se, r.predicted, r.ratio, r.ratio_se)))
    return {"metadata": _meta("atom", cfg, B), "report": r.to_dict()}, r.passed


def cmd_qs(cfg):
    B = _measure(cfg)
    r = verify_quasi_stationary_evolution(B, float(cfg.get("lam", 1.0)), _times(cfg), _sim(cfg))
    if cfg.get("csv"):
        _write_csv(cfg["csv"], ["t", "survival", "se", "predicted"],
                   list(zip(r.t, r.survival, r.survival_se, r.predicted)))
    return {"metadata": _meta("qs", cfg, B), "report": r.to_dict()}, r.passed


def _tail(cfg):
    spec = cfg.get("tail")
    if spec is None:
        return _initial(cfg)
    if isinstance(spec, dict):
        return InitialMeasure.from_spec({"tail": spec, "normalize": True})
    parts = str(spec).split(":")
    if len(parts) != 3 or parts[0] not in ("power", "stretched_exp"):
        raise UsageError("--tail must look like power:C:gamma or stretched_exp:C:gamma")
    C, g = float(parts[1]), float(parts[2])
    tail = PowerTail(C, g) if parts[0] == "power" else StretchedExpTail(C, g)
    return InitialMeasure.normalized([], tail)


def cmd_unbounded(cfg):
    B = _measure(cfg)
    r = verify_unbounded_initial(B, _tail(cfg), _times(cfg), _sim(cfg))
    if cfg.get("csv"):
        _write_csv(cfg["csv"], ["t", "mass", "se", "predicted", "ratio"],
                   list(zip(r.t, r.mass, r.mass_se, r.predicted, r.ratio)))
    return {"metadata": _meta("unbounded", cfg, B), "report": r.to_dict()}, None


def cmd_acceptance(cfg):
    from .acceptance import SEED, run_all
    only = [int(k) for k in cfg["only"]] if cfg.get("only") else None
    res = run_all(int(cfg.get("seed", SEED)), only)
    for r in res:
        print(r.line(), file=sys.stderr)
    rep = {"metadata": _meta("acceptance", {"seed": cfg.get("seed", SEED)}),
           "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "details": r.details} for r in res]}
    return rep, all(r.passed for r in res)


COMMANDS = {"phi": cmd_phi, "mass": cmd_mass, "simulate": cmd_simulate, "limit": cmd_limit,
            "windows": cmd_windows, "atom": cmd_atom, "qs": cmd_qs, "unbounded": cmd_unbounded,
            "acceptance": cmd_acceptance}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("fragkin: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _settings(args)
        report, passed = COMMANDS[args.command](cfg)
        _emit(cfg, report)
    except UsageError as exc:
        print(f"fragkin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, TypeError) as exc:
        print(f"fragkin: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FragkinError as exc:
        # numerical failure while running a check
        print(f"fragkin: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_CHECK if passed is False else EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
