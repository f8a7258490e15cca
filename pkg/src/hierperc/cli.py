"""Command-line experiment harness.

Every subcommand takes its parameters from flags, optionally seeded from a flat
``key = value`` file (``--config``) whose keys are the flag names; flags win.
Output is CSV (fixed columns per subcommand, 17 significant digits) or JSON,
and depends only on the parameters and the seed, never on ``--workers``.

Exit codes: 0 success, 2 bad configuration or parameters outside a result's
regime, 3 a requested size that cannot be simulated or counted exactly.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from typing import Any

import numpy as np

from hierperc import erconn, meanfield, renorm
from hierperc._mc import map_replicates
from hierperc.errors import ExactRangeError, InfeasibleScaleError, InvalidInputError, RegimeError
from hierperc.profiles import ConnectionProfile, Constant, LogPoly, ScaledLog, Table, scale_index
from hierperc.sampler import realize_ball

WORKERS_ENV = "HIERPERC_WORKERS"

# flags that never change the numbers and so stay out of the experiment id
_RUN_ONLY = {"config", "workers", "out", "format", "command"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def _add_profile(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--rate", choices=["constant", "logpoly", "scaledlog", "table"], default="constant")
    p.add_argument("--c", type=float, help="constant rate")
    p.add_argument("--C0", type=float, default=0.0)
    p.add_argument("--C1", type=float, default=0.0)
    p.add_argument("--C2", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--C", type=float, default=0.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--interp", choices=["lower", "upper", "geometric"], default="lower")
    p.add_argument("--head", type=float)
    p.add_argument("--table", help="comma-separated c_1,c_2,...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierperc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="largest-cluster density of nested balls")
    _add_common(p)
    _add_profile(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--replicates", type=int, default=10)

    p = sub.add_parser("cascade", help="good-ball cascade simulation or its certificate")
    _add_common(p)
    _add_profile(p)
    p.add_argument("--mode", choices=["simulate", "certificate"], default="simulate")
    p.add_argument("--theta", type=float, default=0.02)
    p.add_argument("--beta0", type=float, default=0.5)
    p.add_argument("--n-start", dest="n_start", type=int, default=2)
    p.add_argument("--n-stop", dest="n_stop", type=int, default=4)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--n0", type=int)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)

    p = sub.add_parser("meanfield", help="mean-field fixed point, product and summability")
    _add_common(p)
    p.add_argument("--rate", choices=["constant", "log", "table"], default="log")
    p.add_argument("--c", type=float, help="constant rate")
    p.add_argument("--a", type=float, default=2.0, help="c_k = a log(k + shift)")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--table", help="comma-separated c_1,c_2,...")
    p.add_argument("--kmax", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("erconn", help="Erdős–Rényi connectivity tables")
    _add_common(p)
    p.add_argument("--n", type=int, help="single graph size")
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--p", type=float, help="edge probability")
    p.add_argument("--a", type=float, help="edge probability a log n / n")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--mc", action="store_true")
    p.add_argument("--bounds", action="store_true")
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--exponent", type=int, choices=[3, 13], default=13)

    p = sub.add_parser("asymptotics", help="exact annulus probabilities next to their asymptotics")
    _add_common(p)
    p.add_argument("--kind", choices=["annulus", "skip"], default="annulus")
    p.add_argument("--case", choices=list("abcdef"), default="c")
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--C", type=float, default=0.0)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--b", type=float, default=0.5)
    p.add_argument("--j", type=int, default=2)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--n-min", dest="n_min", type=int, default=2)
    p.add_argument("--n-max", dest="n_max", type=int, default=100)

    p = sub.add_parser("preperc", help="successive-annuli connection scan")
    _add_common(p)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--C", type=float, default=0.0)
    p.add_argument("--a", type=float, default=6.0, help="rate coefficient at scale points (a N in the annulus form)")
    p.add_argument("--n-min", dest="n_min", type=int, default=2)
    p.add_argument("--n-max", dest="n_max", type=int, default=1000)
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--tol", type=float, default=1e-6)
    return parser


def read_config(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _truthy(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config is None:
        return ns
    sub = parser._subparsers._group_actions[0].choices[ns.command]
    actions = {a.dest: a for a in sub._actions}
    values = read_config(ns.config)
    defaults = {}
    for key, value in values.items():
        if key in ("command", "config"):
            continue
        if key not in actions:
            raise ConfigError(f"unknown key {key!r} for {ns.command}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _truthy(value)
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# output


def experiment_id(ns: argparse.Namespace) -> str:
    params = {k: v for k, v in sorted(vars(ns).items()) if k not in _RUN_ONLY}
    blob = json.dumps({"command": ns.command, **params}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v} reached the output")
        return f"{float(v):.17g}"
    return str(v)


def _plain(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def render(ns, columns: list[str], rows: list[dict], summary: dict) -> str:
    eid = experiment_id(ns)
    if ns.format == "json":
        params = {k: v for k, v in sorted(vars(ns).items()) if k not in _RUN_ONLY}
        doc = {
            "experiment_id": eid,
            "command": ns.command,
            "params": params,
            "columns": columns,
            "rows": [[_plain(r.get(c)) for c in columns] for r in rows],
            "summary": _plain(summary),
        }
        return json.dumps(doc, allow_nan=False, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment_id", *columns])
    for r in rows:
        w.writerow([eid, *(_cell(r.get(c)) for c in columns)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def _table(text: str | None) -> tuple[float, ...]:
    if not text:
        raise ConfigError("--table needs comma-separated values")
    return tuple(float(t) for t in text.split(","))


def profile_from(ns) -> ConnectionProfile:
    if ns.rate == "constant":
        if ns.c is None:
            raise ConfigError("constant rate needs --c")
        rates = Constant(ns.c)
    elif ns.rate == "logpoly":
        rates = LogPoly(ns.C0, ns.C1, ns.C2, ns.alpha)
    elif ns.rate == "scaledlog":
        rates = ScaledLog(ns.K, ns.C, ns.a, ns.b, ns.interp, ns.head)
    else:
        rates = Table(_table(ns.table))
    return ConnectionProfile(ns.N, ns.delta, rates)


def _profile_echo(ns) -> dict:
    return {"N": ns.N, "delta": ns.delta, "rate": ns.rate}


def _nested(task):
    profile, k, seed, r = task
    return realize_ball(profile, k, seed, r).nested_sizes


def cmd_simulate(ns):
    profile = profile_from(ns)
    tasks = [(profile, ns.k, ns.seed, r) for r in range(ns.replicates)]
    sizes = map_replicates(_nested, tasks, ns.workers)
    columns = ["N", "delta", "rate", "replicate", "level", "cluster_size", "density", "seed"]
    rows = []
    for r, s in enumerate(sizes):
        for m in range(1, ns.k + 1):
            size = int(s[m - 1])
            rows.append({**_profile_echo(ns), "replicate": r, "level": m, "cluster_size": size,
                         "density": size / ns.N**m, "seed": ns.seed})
    dens = np.array(sizes, dtype=np.float64) / (float(ns.N) ** np.arange(1, ns.k + 1))
    return columns, rows, {"mean_density": dens.mean(axis=0).tolist()}


def cmd_cascade(ns):
    if ns.mode == "certificate":
        rep = renorm.cascade_certificate(ns.K, ns.b, ns.N, ns.a, ns.theta, n0=ns.n0, horizon=ns.horizon, M=ns.M, L=ns.L)
        columns = ["K", "b", "N", "a", "theta", "a_star", "kappa", "n0", "log2_n0", "product_eps", "product_B",
                   "product_A", "floors_met", "beta_min", "pG_min", "induction_ok", "first_step", "pG_chain",
                   "constants_hold"]
        pr = rep.products
        row = {"K": ns.K, "b": ns.b, "N": ns.N, "a": ns.a, "theta": ns.theta, "a_star": rep.a_star,
               "kappa": rep.kappa, "n0": rep.n0, "log2_n0": math.log2(rep.n0), "product_eps": pr["eps"],
               "product_B": pr["B"], "product_A": pr["A"], "floors_met": rep.floors_met,
               "beta_min": rep.beta_min, "pG_min": rep.pG_min, "induction_ok": rep.induction_ok,
               "first_step": rep.constants.first_step, "pG_chain": rep.constants.pG_chain,
               "constants_hold": rep.constants.holds}
        return columns, [row], {"notes": rep.notes}
    profile = profile_from(ns)
    states = renorm.run_cascade(profile, ns.K, ns.theta, ns.beta0, ns.n_start, ns.n_stop, ns.replicates, ns.seed,
                                ns.workers)
    columns = ["N", "delta", "rate", "n", "k_n", "beta", "eps", "pG_used", "beta_ok", "pG_ok", "seed"]
    rows = [{**_profile_echo(ns), "n": s.n, "k_n": scale_index(s.K, s.n), "beta": s.beta, "eps": s.eps,
             "pG_used": s.pG, "beta_ok": s.beta_ok, "pG_ok": s.pG_ok, "seed": ns.seed} for s in states]
    return columns, rows, {}


def cmd_meanfield(ns):
    if ns.rate == "constant":
        if ns.c is None:
            raise ConfigError("constant rate needs --c")
        c = ns.c
    elif ns.rate == "log":
        c = meanfield.log_rates(ns.a, ns.shift)
    else:
        c = _table(ns.table)
    seq = meanfield.beta_sequence(c, ns.kmax)
    est = meanfield.percolation_from_sequence(seq, ns.tol)
    columns = ["k", "c_k", "beta_k", "product", "exp_sum"]
    rows = [{"k": k, "c_k": seq.c[k - 1], "beta_k": seq.beta[k], "product": seq.products[k - 1],
             "exp_sum": seq.exp_sums[k - 1]} for k in range(1, ns.kmax + 1)]
    summary = {"product": est.product, "converged": est.converged, "extinct_at": est.extinct_at,
               "exp_sum": float(seq.exp_sums[-1])}
    if ns.kmax >= 100:
        rep = meanfield.exp_summability(seq.c, ns.kmax)
        summary.update(verdict=rep.verdict, decade_ratio=rep.ratio if math.isfinite(rep.ratio) else None,
                       cauchy=rep.cauchy)
    return columns, rows, summary


def cmd_erconn(ns):
    if ns.n is not None:
        sizes = [ns.n]
    elif ns.n_min is not None and ns.n_max is not None:
        sizes = list(range(ns.n_min, ns.n_max + 1))
    else:
        raise ConfigError("give --n or both --n-min and --n-max")
    if (ns.p is None) == (ns.a is None):
        raise ConfigError("give exactly one of --p and --a")
    if not (ns.exact or ns.mc or ns.bounds):
        ns.exact = True
    columns = ["n", "p", "exact", "mc", "mc_low", "mc_high", "lower_bound", "lower_bound_log_abs_raw",
               "lower_bound_clamped", "nonconnectivity_bound", "seed"]
    rows = []
    for n in sizes:
        p = ns.p if ns.p is not None else erconn.er_probability(n, ns.a)
        row = {"n": n, "p": p, "seed": ns.seed}
        if ns.exact:
            row["exact"] = erconn.exact_connectivity(n, p)
        if ns.mc:
            est = erconn.mc_connectivity(n, p, ns.replicates, ns.seed, ns.workers)
            row.update(mc=est.value, mc_low=est.low, mc_high=est.high)
        if ns.bounds:
            if ns.a is None:
                raise ConfigError("--bounds needs the --a parametrization")
            lb = erconn.durrett_lower_bound(n, ns.a)
            row.update(lower_bound=lb.value, lower_bound_log_abs_raw=lb.log_abs_raw if math.isfinite(lb.log_abs_raw) else None,
                       lower_bound_clamped=lb.clamped,
                       nonconnectivity_bound=erconn.nonconnectivity_upper_bound(n, ns.a, ns.M, ns.L, ns.exponent == 13))
        rows.append(row)
    return columns, rows, {}


def cmd_asymptotics(ns):
    ns_range = range(ns.n_min, ns.n_max + 1)
    if ns.kind == "annulus":
        columns = ["case", "N", "K", "C", "a", "n", "j", "l", "exact", "asymptotic"]
        rows = []
        for n in ns_range:
            v = renorm.annulus_connection(ns.case, ns.N, n, ns.K, ns.C, ns.a, ns.j, ns.l)
            rows.append({"case": ns.case, "N": ns.N, "K": ns.K, "C": ns.C, "a": ns.a, "n": n, "j": ns.j,
                         "l": ns.l, "exact": v.exact, "asymptotic": v.asymptotic})
        summary = {}
        if ns.case == "c":
            sw = renorm.annulus_gap_sweep(ns.N, ns.a, ns.n_max, ns.C, ns.K)
            summary["n_star"] = sw.n_star
        return columns, rows, summary
    columns = ["N", "K", "b", "a", "C", "n", "j", "exact", "shell_sum", "bound"]
    rows = []
    for n in ns_range:
        v = renorm.skip_annulus_bound(ns.N, ns.K, ns.b, ns.a, ns.C, n, ns.j, M=ns.M)
        rows.append({"N": ns.N, "K": ns.K, "b": ns.b, "a": ns.a, "C": ns.C, "n": n, "j": ns.j, "exact": v.exact,
                     "shell_sum": v.shell_sum, "bound": v.bound})
    return columns, rows, {}


def cmd_preperc(ns):
    profile = ConnectionProfile(ns.N, ns.delta, ScaledLog(ns.K, ns.C, ns.a, 0.0))
    scan = renorm.pre_percolation_scan(profile, ns.n_min, ns.n_max, ns.seed, ns.mode, ns.tol)
    columns = ["n", "prob_no_connection", "power", "partial_sum", "power_partial_sum", "joined", "seed"]
    rows = []
    for i, n in enumerate(scan.n):
        rows.append({"n": int(n), "prob_no_connection": scan.prob_no_connection[i], "power": scan.power[i],
                     "partial_sum": scan.partial_sums[i], "power_partial_sum": scan.power_partial_sums[i],
                     "joined": None if scan.indicators is None else bool(scan.indicators[i]), "seed": ns.seed})
    return columns, rows, {"a": scan.a, "cauchy": scan.cauchy}


COMMANDS = {
    "simulate": cmd_simulate,
    "cascade": cmd_cascade,
    "meanfield": cmd_meanfield,
    "erconn": cmd_erconn,
    "asymptotics": cmd_asymptotics,
    "preperc": cmd_preperc,
}


def _workers(ns) -> int:
    if ns.workers is not None:
        return ns.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse_args(argv)
        if ns.seed is None:
            raise ConfigError("--seed is mandatory")
        ns.workers = _workers(ns)
        if ns.workers < 1:
            raise ConfigError("--workers must be >= 1")
        columns, rows, summary = COMMANDS[ns.command](ns)
        text = render(ns, columns, rows, summary)
    except (ConfigError, InvalidInputError, RegimeError, ValueError) as exc:
        print(f"hierperc: error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleScaleError, ExactRangeError) as exc:
        print(f"hierperc: infeasible: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"hierperc: error: {exc}", file=sys.stderr)
        return 2
    if ns.out:
        with open(ns.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    try:
        code = run()
    except SystemExit as exc:  # argparse usage errors
        code = exc.code if isinstance(exc.code, int) else 2
    except BrokenPipeError:
        # reader went away (e.g. piped into head); keep the interpreter quiet on exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)
