"""Command-line front end.

Subcommands: moments, variance, simulate, compare, partitions, selftest.
Parameters resolve as: built-in defaults, then ``--config FILE`` (flat
``key=value`` lines or a JSON run manifest), then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from itertools import islice

from . import __version__, _backend
from .gaussian import ClosedForm, ModelParams
from .moments import (MomentQuery, evaluate_form, khop_mean, khop_moment, khop_variance,
                      variance_raw_term_count)
from .partitions import DEFAULT_LIMIT, LimitExceededError, enumerate_nonflat, nonflat_count
from .simulate import MAX_HOPS, SimConfig, run_simulation

DEFAULTS = {
    "lam": 1.0,
    "beta": 1.0,
    "d": 2,
    "dist": 1.0,
    "runs": 10_000,
    "seed": 42,
    "epsilon": 1e-6,
    "limit": DEFAULT_LIMIT,
    "format": "text",
}

# flag name in files/manifests -> argparse dest
_KEY_ALIASES = {"lambda": "lam", "ks": "k", "order": "orders"}


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a finite number >= 0, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a finite number > 0, got {text}")
    return v


def _int_list(text):
    try:
        vals = [int(t) for t in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_model_flags(p, with_dist=True):
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, help="intensity (default 1)")
    p.add_argument("--beta", type=_positive_float, help="fading exponent (default 1)")
    p.add_argument("--d", type=_positive_int, help="dimension (default 2)")
    if with_dist:
        p.add_argument("--dist", type=_nonneg_float, help="source-sink distance (default 1)")


def _add_io_flags(p, formats=("text", "json", "csv")):
    p.add_argument("--format", choices=formats, help="output format (default text)")
    p.add_argument("--out", help="write output to this file (manifest goes to OUT.manifest.json)")
    p.add_argument("--manifest", help="explicit path for the run manifest")
    p.add_argument("--config", help="flat key=value file or JSON run manifest supplying parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcmoments",
        description="Exact k-hop path-count moments in the Poisson random-connection "
                    "model, with a Monte Carlo verifier.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="n-th moment of the k-hop count")
    p.add_argument("--k", type=_positive_int, help="hop count (>= 1)")
    p.add_argument("--n", type=_positive_int, help="moment order (>= 1)")
    _add_model_flags(p)
    p.add_argument("--limit", type=_positive_int, help="partition size limit n*(k-1)")
    _add_io_flags(p)

    p = sub.add_parser("variance", help="variance of the k-hop count")
    p.add_argument("--k", type=_positive_int, help="hop count (>= 1)")
    _add_model_flags(p)
    p.add_argument("--limit", type=_positive_int, help="partition size limit 2*(k-1)")
    _add_io_flags(p)

    for name, helptext in (("simulate", "Monte Carlo estimates of hop-count moments"),
                           ("compare", "analytic vs simulated moments with z-scores")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--k", type=_int_list, help=f"hop counts, comma separated (each <= {MAX_HOPS})")
        p.add_argument("--orders", type=_int_list, help="moment orders, comma separated")
        _add_model_flags(p)
        p.add_argument("--runs", type=_positive_int, help="independent runs (default 10000)")
        p.add_argument("--seed", type=int, help="64-bit seed (default 42)")
        p.add_argument("--epsilon", type=_positive_float, help="window margin tolerance (default 1e-6)")
        p.add_argument("--workers", type=_positive_int,
                       help="worker processes (default $RCMOMENTS_WORKERS or 1)")
        if name == "compare":
            p.add_argument("--limit", type=_positive_int, help="partition size limit")
        _add_io_flags(p)

    p = sub.add_parser("partitions", help="count (and list) non-flat partitions of the n x r grid")
    p.add_argument("--n", type=_positive_int, required=False)
    p.add_argument("--r", type=_positive_int, required=False)
    p.add_argument("--list", dest="listing", type=int, default=0, metavar="COUNT",
                   help="also list the first COUNT partitions")
    p.add_argument("--limit", type=_positive_int, help="size limit n*r (default 16)")
    _add_io_flags(p)

    p = sub.add_parser("selftest", help="run the bundled invariant suite")
    p.add_argument("--format", choices=("text", "json"))
    return parser


# --- parameter resolution ------------------------------------------------------

_LIST_KEYS = {"k_list", "orders"}


def _read_config(path: str, command: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if data.get("command") not in (None, command):
            raise UsageError(f"manifest {path} is for {data['command']!r}, not {command!r}")
        return dict(data.get("params", data))
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace, valid: set[str]) -> dict:
    params = {k: v for k, v in DEFAULTS.items() if k in valid}
    if getattr(args, "config", None):
        for key, value in _read_config(args.config, args.command).items():
            key = _KEY_ALIASES.get(key, key)
            if key == "k" and "k_list" in valid:
                key = "k_list"
            if key not in valid:
                raise UsageError(f"unknown parameter {key!r} in {args.config}")
            params[key] = value
    for key in valid:
        dest = "k" if key == "k_list" else key
        value = getattr(args, dest, None)
        if value is not None:
            params[key] = value
    # normalize types (config values arrive as strings)
    conv = {"lam": _nonneg_float, "beta": _positive_float, "d": _positive_int,
            "dist": _nonneg_float, "runs": _positive_int, "seed": int,
            "epsilon": _positive_float, "limit": _positive_int, "k": _positive_int,
            "n": _positive_int, "r": _positive_int}
    for key, value in list(params.items()):
        try:
            if key in _LIST_KEYS:
                params[key] = value if isinstance(value, list) else _int_list(value)
            elif key in conv and value is not None:
                params[key] = conv[key](value)
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"invalid value for {key}: {exc}")
    return params


def _model(params) -> ModelParams:
    return ModelParams.from_distance(params["lam"], params["beta"], params["d"], params["dist"])


def _require(params, *keys):
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join("--" + k for k in missing))


# --- formatting ----------------------------------------------------------------

def _term_rows(form: ClosedForm, model: ModelParams):
    ev = evaluate_form(form, model)
    rows = []
    for term, value in ev.contributions:
        rows.append({
            "coeff": f"{term.coeff.numerator}/{term.coeff.denominator}",
            "lambda_pow": term.lambda_pow,
            "det": str(term.det),
            "c_eff": f"{term.c_eff.numerator}/{term.c_eff.denominator}",
            "value": value,
        })
    return ev.value, rows


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _form_report(kind: str, params: dict, form: ClosedForm, extra: dict, fmt: str) -> str:
    model = _model(params)
    value, rows = _term_rows(form, model)
    if fmt == "json":
        return _dumps({"command": kind, "params": params, "closed_form": form.to_json(),
                       "value": value, "terms": rows, **extra})
    if fmt == "csv":
        return _csv(rows, ["coeff", "lambda_pow", "det", "c_eff", "value"])
    lines = [f"{kind}: value = {value!r}"]
    for key, v in extra.items():
        lines.append(f"  {key}: {v}")
    lines.append(f"  {len(rows)} term(s) of coeff * lambda^p * (pi/beta)^(p d/2) * det^(-d/2)"
                 " * exp(-c_eff * beta * dist^2):")
    for row in rows:
        lines.append(f"    coeff={row['coeff']:>6}  p={row['lambda_pow']}  det={row['det']:>4}"
                     f"  c_eff={row['c_eff']:>5}  value={row['value']!r}")
    return "\n".join(lines) + "\n"


# --- commands --------------------------------------------------------------------

def cmd_moments(params: dict, fmt: str) -> tuple[str, int]:
    _require(params, "k", "n")
    k, n = params["k"], params["n"]
    q = MomentQuery(k, n)
    form = khop_moment(q, params["limit"])
    extra = {"k": k, "n": n}
    if k == 1:
        extra["note"] = "1-hop count is a Bernoulli indicator; every moment equals H_beta(x,y)"
    else:
        extra["partitions"] = nonflat_count(n, k - 1, params["limit"])
    return _form_report("moments", params, form, extra, fmt), 0


def cmd_variance(params: dict, fmt: str) -> tuple[str, int]:
    _require(params, "k")
    k = params["k"]
    form = khop_variance(k, params["limit"])
    extra = {"k": k}
    if k >= 2:
        extra["raw_partition_terms"] = variance_raw_term_count(k, params["limit"])
    return _form_report("variance", params, form, extra, fmt), 0


def _sim_config(params: dict) -> SimConfig:
    d = params["d"]
    source = tuple([0.0] * d)
    sink = tuple([float(params["dist"])] + [0.0] * (d - 1))
    return SimConfig(lam=params["lam"], beta=params["beta"], source=source, sink=sink,
                     runs=params["runs"], seed=params["seed"], k_list=tuple(params["k_list"]),
                     moment_orders=tuple(params["orders"]), epsilon=params["epsilon"])


def cmd_simulate(params: dict, fmt: str, workers: int | None = None) -> tuple[str, int]:
    try:
        cfg = _sim_config(params)
    except ValueError as exc:
        raise UsageError(str(exc))
    res = run_simulation(cfg, workers)
    dispersion = {}
    for k in cfg.k_list:
        mean = float(res.counts[:, k].mean())
        var, se = res.variances[k]
        dispersion[k] = (var / mean) if mean > 0 else None
    if fmt == "json":
        out = res.to_json()
        out["params"] = params
        out["dispersion"] = {str(k): v for k, v in dispersion.items()}
        return _dumps(out), 0
    if fmt == "csv":
        return res.to_csv(), 0
    lines = [f"simulate: {cfg.runs} runs, seed {cfg.seed}, margin {res.margin:.6g}, "
             f"truncation diagnostic {res.truncation:.3g}"]
    for m in res.moments:
        se = "n/a" if m.stderr is None else f"{m.stderr:.6g}"
        lines.append(f"  k={m.k} order={m.order}  estimate={m.estimate:.6g}  stderr={se}")
    for k in cfg.k_list:
        var, se = res.variances[k]
        se_txt = "n/a" if se is None else f"{se:.6g}"
        disp = "n/a" if dispersion[k] is None else f"{dispersion[k]:.4f}"
        lines.append(f"  k={k} variance={var:.6g} stderr={se_txt} dispersion={disp}")
    return "\n".join(lines) + "\n", 0


def _z(analytic: float, empirical: float, se: float | None) -> float:
    if se is None or se == 0:
        return 0.0 if empirical == analytic else math.inf
    return (empirical - analytic) / se


def cmd_compare(params: dict, fmt: str, workers: int | None = None) -> tuple[str, int]:
    try:
        cfg = _sim_config(params)
    except ValueError as exc:
        raise UsageError(str(exc))
    model = _model(params)
    res = run_simulation(cfg, workers)
    rows = []
    for k in cfg.k_list:
        for order in cfg.moment_orders:
            analytic = khop_moment(MomentQuery(k, order), params["limit"]).evaluate(model)
            est = res.moment(k, order)
            rows.append({"k": k, "statistic": f"moment{order}", "analytic": analytic,
                         "empirical": est.estimate, "stderr": est.stderr,
                         "z": _z(analytic, est.estimate, est.stderr)})
        analytic = khop_variance(k, params["limit"]).evaluate(model)
        var, se = res.variances[k]
        rows.append({"k": k, "statistic": "variance", "analytic": analytic, "empirical": var,
                     "stderr": se, "z": _z(analytic, var, se)})
    worst = max((abs(r["z"]) for r in rows), default=0.0)
    code = 1 if worst > 4 else 0
    if fmt == "json":
        return _dumps({"command": "compare", "params": params, "rows": rows,
                       "max_abs_z": worst, "margin": res.margin,
                       "truncation_diagnostic": res.truncation}), code
    if fmt == "csv":
        return _csv(rows, ["k", "statistic", "analytic", "empirical", "stderr", "z"]), code
    lines = [f"compare: {cfg.runs} runs, seed {cfg.seed}  (exit 1 if any |z| > 4)",
             f"  {'k':>2} {'statistic':>10} {'analytic':>14} {'empirical':>14} {'stderr':>12} {'z':>8}"]
    for r in rows:
        se = "n/a" if r["stderr"] is None else f"{r['stderr']:.6g}"
        lines.append(f"  {r['k']:>2} {r['statistic']:>10} {r['analytic']:>14.6g} "
                     f"{r['empirical']:>14.6g} {se:>12} {r['z']:>8.3f}")
    return "\n".join(lines) + "\n", code


def cmd_partitions(params: dict, fmt: str, listing: int = 0) -> tuple[str, int]:
    _require(params, "n", "r")
    n, r, limit = params["n"], params["r"], params["limit"]
    count = nonflat_count(n, r, limit)
    shown = [list(p.labels) for p in islice(enumerate_nonflat(n, r, limit), max(listing, 0))]
    if fmt == "json":
        return _dumps({"command": "partitions", "n": n, "r": r, "count": count,
                       "listing": shown}), 0
    if fmt == "csv":
        rows = [{"n": n, "r": r, "count": count}]
        return _csv(rows, ["n", "r", "count"]), 0
    lines = [f"non-flat partitions of the {n}x{r} grid: {count}"]
    lines += ["  " + " ".join(map(str, labels)) for labels in shown]
    return "\n".join(lines) + "\n", 0


_VALID = {
    "moments": {"k", "n", "lam", "beta", "d", "dist", "limit", "format"},
    "variance": {"k", "lam", "beta", "d", "dist", "limit", "format"},
    "simulate": {"k_list", "orders", "lam", "beta", "d", "dist", "runs", "seed", "epsilon",
                 "format"},
    "compare": {"k_list", "orders", "lam", "beta", "d", "dist", "runs", "seed", "epsilon",
                "limit", "format"},
    "partitions": {"n", "r", "limit", "format"},
}

_SIM_DEFAULTS = {"simulate": {"k_list": [2, 3], "orders": [1, 2]},
                 "compare": {"k_list": [2, 3], "orders": [1, 2]}}


def manifest(command: str, params: dict) -> dict:
    return {
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "backend": _backend.ACTIVE.name,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest
        return run_selftest(fmt=args.format or "text")
    try:
        valid = _VALID[args.command]
        params = resolve(args, valid)
        for key, value in _SIM_DEFAULTS.get(args.command, {}).items():
            params.setdefault(key, value)
        fmt = params.pop("format", "text")
        if args.command == "moments":
            text, code = cmd_moments(params, fmt)
        elif args.command == "variance":
            text, code = cmd_variance(params, fmt)
        elif args.command == "simulate":
            text, code = cmd_simulate(params, fmt, args.workers)
        elif args.command == "compare":
            text, code = cmd_compare(params, fmt, args.workers)
        else:
            text, code = cmd_partitions(params, fmt, args.listing)
    except (UsageError, LimitExceededError, ValueError) as exc:
        print(f"rcmoments {args.command}: error: {exc}", file=sys.stderr)
        return 2

    man = manifest(args.command, {**params, "format": fmt})
    man_path = args.manifest or (args.out + ".manifest.json" if args.out else None)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if man_path:
        with open(man_path, "w") as fh:
            fh.write(_dumps(man))
    return code


if __name__ == "__main__":
    sys.exit(main())
