"""Command line front end.

Subcommands ``estimate``, ``bootstrap``, ``fit``, ``mc`` and ``axioms`` read a
CSV column (or simulate), run the matching library routine and write a JSON
report. Reports are deterministic given the configuration and seed; the
timestamp and runtime go to a ``<out>.meta.json`` sidecar instead.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import iid_variance, longrun_variance
from .bootstrap import bootstrap_distribution, ci_from_bootstrap, ks_distance, make_scheme
from .core import (
    DEFAULT_TOL,
    avar,
    check_axioms,
    expectile_empirical,
    expectile_model,
    find_subadditivity_counterexample,
    var_quantile,
)
from .distributions import EmpiricalDistribution
from .errors import ColumnNotFound, ConfigError, NumericalError, ParseError, ValidationError
from .mc_harness import (
    coverage_experiment,
    comparison_table,
    consistency_experiment,
    make_generator,
    normality_experiment,
    parametric_experiment,
    robustness_experiment,
)
from .parametric import (
    asym_variance,
    delta_method_ci,
    hill_estimator,
    lognormal_mle,
    model_for,
    pareto_mle,
)

SEED_ENV = "EXPECTILE_LAB_SEED"
# options that never influence results and stay out of the report
_UNREPORTED = {"out", "workers", "table_out", "config", "func", "command"}


def ingest_csv(path, column=None) -> np.ndarray:
    """Read one numeric column, keeping file order.

    ``column`` is a header name or a 0-based index (default: first column).
    A first row whose selected field is not numeric is taken as the header.

    Raises
    ------
    FileNotFoundError, ColumnNotFound, ParseError
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with p.open(newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("file has no rows")
    first = [c.strip() for c in rows[0][1]]

    def numeric(s):
        try:
            float(s)
            return True
        except ValueError:
            return False

    has_header = not all(numeric(c) for c in first)
    idx = None
    if column is None:
        idx = 0
    elif isinstance(column, int) or (isinstance(column, str) and column.isdigit()
                                     and not (has_header and column in first)):
        idx = int(column)
    elif has_header and column in first:
        idx = first.index(column)
    if idx is None or idx >= len(first) or idx < 0:
        raise ColumnNotFound(f"column {column!r} not found")
    body = rows[1:] if has_header else rows
    out = []
    for line, r in body:
        if idx >= len(r):
            raise ParseError(f"line {line}: missing column {column!r}", line)
        cell = r[idx].strip()
        try:
            v = float(cell)
        except ValueError:
            raise ParseError(f"line {line}: not a number: {cell!r}", line) from None
        if not math.isfinite(v):
            raise ParseError(f"line {line}: not finite: {cell!r}", line)
        out.append(v)
    if not out:
        raise ParseError("no numeric rows")
    return np.array(out)


def _kv_list(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = int(v) if v.lstrip("-").isdigit() else float(v)
        except ValueError:
            out[k] = v
    return out


def _csv_floats(s):
    return [float(t) for t in str(s).split(",") if t.strip()]


def _normal_ci(point, s2, n, level):
    z = float(stats.norm.ppf(0.5 + 0.5 * level))
    h = z * math.sqrt(max(s2, 0.0) / n)
    return [point - h, point + h]


def cmd_estimate(args) -> tuple[dict, dict]:
    x = ingest_csv(args.input, args.column)
    dist = EmpiricalDistribution(x)
    rows = []
    for a in args.alpha:
        est = expectile_empirical(dist, a, args.tol)
        iid = iid_variance(dist, a, args.tol) if dist.n >= 2 else None
        lag = args.lag
        lr = longrun_variance(dist, a, lag, tol=args.tol) if dist.n >= 2 else None
        s2 = (lr if args.lag is not None else iid).s2 if iid is not None else 0.0
        rows.append({
            "alpha": a,
            "expectile": est.value,
            "denominator": est.denominator,
            "mean": dist.mean,
            "var": var_quantile(dist, a),
            "avar": avar(dist, a),
            "iid_s2": None if iid is None else iid.s2,
            "longrun_s2": None if lr is None else lr.s2,
            "longrun_lag": None if lr is None else lr.lag,
            "flags": [] if iid is None else sorted(iid.flags),
            "ci": _normal_ci(est.value, s2, dist.n, args.level),
            "ci_variance": "longrun" if args.lag is not None else "iid",
        })
    return {"n": dist.n, "results": rows}, {"estimates": rows}


def cmd_bootstrap(args) -> tuple[dict, dict]:
    x = ingest_csv(args.input, args.column)
    dist = EmpiricalDistribution(x)
    scheme = make_scheme(args.scheme, args.block)
    rows, tables = [], {}
    for j, a in enumerate(args.alpha):
        bd = bootstrap_distribution(dist, a, scheme, args.B, seed=args.seed + j,
                                    workers=args.workers, tol=args.tol)
        ci = ci_from_bootstrap(bd, args.level, args.kind)
        if scheme.name == "circular":
            s2 = longrun_variance(dist, a, args.lag, tol=args.tol).s2
        else:
            s2 = iid_variance(dist, a, args.tol).s2
        row = {
            "alpha": a,
            "expectile": bd.base_estimate.value,
            "ci": [ci.lower, ci.upper],
            "level": args.level,
            "kind": args.kind,
            "plugin_s2": s2,
            "bootstrap_variance": bd.variance(),
            "ks_distance": ks_distance(bd.replicates, s2) if s2 > 0 else None,
            "summary": bd.summary(),
        }
        if args.dump_replicates:
            row["replicates"] = bd.replicates.tolist()
        rows.append(row)
        hist, edges = np.histogram(bd.replicates, bins=40)
        tables[f"replicates_alpha{a}"] = [
            {"alpha": a, "left": float(l), "right": float(r), "count": int(c)}
            for l, r, c in zip(edges[:-1], edges[1:], hist)]
    return {"n": dist.n, "scheme": scheme.describe(), "results": rows}, tables


def cmd_fit(args) -> tuple[dict, dict]:
    x = ingest_csv(args.input, args.column)
    if args.family == "lognormal":
        est = lognormal_mle(x, args.fallback_m, args.fallback_s2)
    elif args.hill_k is not None:
        est = hill_estimator(x, args.hill_k, args.cbar, args.fallback_a)
    else:
        est = pareto_mle(x, args.cbar, args.fallback_a)
    rows = []
    for a in args.alpha:
        row = {"alpha": a}
        if est.params is None:
            row.update(expectile=None, asym_variance=None, ci=None)
        else:
            row["expectile"] = expectile_model(model_for(est.params), a, args.tol).value
            row["asym_variance"] = asym_variance(est.params, a, args.tol)
            ci = delta_method_ci(est, a, args.level, args.tol)
            row["ci"] = [ci.lower, ci.upper]
        rows.append(row)
    return {"n": int(x.size), "fit": est.as_dict(), "results": rows}, {"fit": rows}


def cmd_mc(args) -> tuple[dict, dict]:
    gp = _kv_list(args.gen_param)
    a = args.alpha[0]
    w = args.workers
    exp = args.experiment
    if exp == "parametric":
        family = args.family or "lognormal"
        rep = parametric_experiment(family, gp, a, args.n, args.reps, args.seed,
                                    estimator=args.estimator, k=args.hill_k, workers=w)
    else:
        gen = make_generator({"kind": args.gen, **gp})
        if exp == "consistency":
            grid = [int(v) for v in _csv_floats(args.n_grid)]
            rep = consistency_experiment(gen, a, grid, args.seed)
        elif exp == "normality":
            rep = normality_experiment(gen, a, args.n, args.reps, args.seed, workers=w)
        elif exp == "coverage":
            methods = [m.strip() for m in args.methods.split(",") if m.strip()]
            rep = coverage_experiment(gen, a, args.n, args.reps, methods, args.level, args.seed,
                                      B=args.B, block_length=args.block, kind=args.kind,
                                      family=args.family, workers=w)
        elif exp == "robustness":
            rep = robustness_experiment(gen, a, _csv_floats(args.eps), args.outlier, args.n,
                                        args.reps, args.seed, workers=w)
        elif exp == "comparison":
            eps = _csv_floats(args.eps)
            rep = comparison_table(gen, a, args.n, args.reps, args.seed,
                                   eps=max(eps) if eps else 0.01, outlier=args.outlier, workers=w)
        else:
            raise ConfigError(f"unknown experiment {exp!r}")
    out = rep.as_dict()
    return out, rep.tables


def cmd_axioms(args) -> tuple[dict, dict]:
    rows = []
    for a in args.alpha:
        if args.input is not None:
            x1 = ingest_csv(args.input, args.column)
            x2 = ingest_csv(args.input, args.column2 if args.column2 is not None else 1)
            rep = check_axioms(x1, x2, a, args.cash, args.scale, args.tol)
            rows.append(rep.as_dict())
        else:
            rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(int(round(a * 1e6)),)))
            worst = {"cash": 0.0, "homogeneity": 0.0}
            monotone_fail = 0
            for _ in range(args.pairs):
                n = int(rng.integers(2, 20))
                x1 = rng.normal(size=n)
                x2 = x1 + np.abs(rng.normal(size=n))
                rep = check_axioms(x1, x2, a, args.cash, args.scale, args.tol)
                worst["cash"] = max(worst["cash"], rep.cash_violation)
                worst["homogeneity"] = max(worst["homogeneity"], rep.homogeneity_violation)
                monotone_fail += rep.monotone is False
            ce = find_subadditivity_counterexample(a, rng, args.trials)
            rows.append({
                "alpha": a,
                "pairs": args.pairs,
                "max_cash_violation": worst["cash"],
                "max_homogeneity_violation": worst["homogeneity"],
                "monotonicity_failures": int(monotone_fail),
                "subadditivity_counterexample": None if ce is None else [np.asarray(v).tolist() for v in ce],
            })
    return {"results": rows}, {"axioms": [{k: v for k, v in r.items() if not isinstance(v, (list, dict))}
                                          for r in rows]}


def _common(p: argparse.ArgumentParser, data: bool = True):
    p.add_argument("--config", help="JSON file with option values (keys as option names, '-' -> '_')")
    if data:
        p.add_argument("--input", help="CSV file, one observation per row")
        p.add_argument("--column", help="column name or 0-based index (default: first)")
    p.add_argument("--alpha", action="append", type=float, help="level in (0,1); repeatable")
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.add_argument("--table-out", help="CSV path for plot-ready tables")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expectile-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="empirical expectile, VaR, AVaR and variances")
    _common(p)
    p.add_argument("--lag", type=int, default=None, help="long-run lag (default floor(n^(1/3)))")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bootstrap", help="bootstrap confidence interval")
    _common(p)
    p.add_argument("--scheme", choices=["efron", "bayes", "circular"], default="efron")
    p.add_argument("--block", type=int, default=None)
    p.add_argument("--B", type=int, default=999)
    p.add_argument("--kind", choices=["percentile", "basic"], default="percentile")
    p.add_argument("--lag", type=int, default=None)
    p.add_argument("--dump-replicates", action="store_true")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("fit", help="parametric fit with delta-method interval")
    _common(p)
    p.add_argument("--family", choices=["lognormal", "pareto"], default="lognormal")
    p.add_argument("--cbar", type=float, default=1.0)
    p.add_argument("--hill-k", type=int, default=None, help="use the Hill estimator with this k")
    p.add_argument("--fallback-m", type=float, default=0.0)
    p.add_argument("--fallback-s2", type=float, default=1.0)
    p.add_argument("--fallback-a", type=float, default=2.0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mc", help="Monte Carlo experiment")
    p.add_argument("experiment", choices=["consistency", "normality", "coverage", "robustness",
                                          "comparison", "parametric"])
    _common(p, data=False)
    p.add_argument("--gen", default="twopoint",
                   choices=["normal", "lognormal", "pareto", "twopoint", "constant", "ar1"])
    p.add_argument("--gen-param", action="append", help="generator parameter key=value; repeatable")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--n-grid", default="100,1000,10000")
    p.add_argument("--methods", default="efron")
    p.add_argument("--B", type=int, default=999)
    p.add_argument("--block", type=int, default=None)
    p.add_argument("--kind", choices=["percentile", "basic"], default="percentile")
    p.add_argument("--family", default=None,
                   help="parametric: lognormal|pareto; coverage delta_method: lognormal_mle|pareto_mle|hill")
    p.add_argument("--estimator", choices=["mle", "hill"], default="mle")
    p.add_argument("--hill-k", type=int, default=None)
    p.add_argument("--eps", default="0,0.005,0.01,0.02,0.05")
    p.add_argument("--outlier", type=float, default=100.0)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("axioms", help="risk-measure axiom checks")
    _common(p)
    p.add_argument("--column2", help="second sample column (default: index 1)")
    p.add_argument("--cash", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=2.0)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--trials", type=int, default=2000)
    p.set_defaults(func=cmd_axioms)
    return parser


def _subparser(parser, command):
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[command]
    raise ConfigError(command)


def _resolve(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"no such config file: {args.config}")
        try:
            cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        sp = _subparser(parser, args.command)
        known = {a.dest for a in sp._actions} - {"help", "config", "experiment"}
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "alpha" in cfg and not isinstance(cfg["alpha"], list):
            cfg["alpha"] = [cfg["alpha"]]
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.alpha is None:
        args.alpha = [0.9]
    if args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env is not None else 0
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if args.workers < 1:
        raise ConfigError("workers must be positive")
    if getattr(args, "input", "absent") is None and args.command in ("estimate", "bootstrap", "fit"):
        raise ConfigError("--input is required")
    return args


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_tables(tables: dict, path: str):
    items = [(k, v) for k, v in tables.items() if v]
    base = Path(path)
    for name, rows in items:
        target = base if len(items) == 1 else base.with_name(f"{base.stem}_{name}{base.suffix}")
        cols = list(rows[0].keys())
        with target.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: json.dumps(v, default=_json_default) if isinstance(v, (list, dict)) else v
                            for k, v in r.items()})


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    t0 = time.perf_counter()
    try:
        args = _resolve(parser, argv)
        body, tables = args.func(args)
        config = {k: v for k, v in sorted(vars(args).items()) if k not in _UNREPORTED}
        report = {"command": args.command, "version": __version__, "seed": args.seed,
                  "config": config, **body}
        text = json.dumps(report, sort_keys=True, indent=2, default=_json_default, allow_nan=True) + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
            meta = {"timestamp": datetime.now(timezone.utc).isoformat(),
                    "runtime_seconds": time.perf_counter() - t0}
            Path(args.out + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        else:
            sys.stdout.write(text)
        if args.table_out and tables:
            _write_tables(tables, args.table_out)
        return 0
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())
