"""Command-line front end.

Every tabular output uses one frozen CSV layout (``CSV_HEADER``), one row per
metric.  Exit codes: 0 success, 1 failed verification, 2 invalid arguments,
3 numerical failure.  ``LRMF_OUT_DIR`` relocates relative ``--out`` paths.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bounds import bounds_report
from .factorizations import (
    SINGLE_EPOCH,
    FactorizationError,
    Strategy,
    build,
    save_factorization,
)
from .metrics import ParticipationSchema, SensitivityError, evaluate
from .noise import SimConfig, dp_sgd_run
from .schedules import KINDS, ScheduleError, make_schedule
from .trimatrix import MatrixError
from .verify import run_checks

CSV_HEADER = ["n", "beta", "gamma", "schedule", "strategy", "schema_b", "schema_k",
              "bandwidth", "metric", "value", "status"]
OUT_DIR_ENV = "LRMF_OUT_DIR"


class UsageError(Exception):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def make_row(**kw) -> dict:
    row = {k: "" for k in CSV_HEADER}
    row["status"] = "ok"
    for k, v in kw.items():
        if k not in row:
            raise KeyError(k)
        row[k] = _fmt(v)
    return row


def _row_key(row):
    def num(x):
        try:
            return (0, float(x))
        except ValueError:
            return (1, x)
    return tuple(num(row[k]) for k in CSV_HEADER[:9])


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _resolve_out(path):
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, out) -> None:
    p = _resolve_out(out)
    if p is None:
        sys.stdout.write(text)
        return
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def _schedule_from(args):
    gamma = args.gamma if args.schedule == "polynomial" else None
    beta = 1.0 if args.schedule == "constant" else args.beta
    return make_schedule(args.schedule, args.n, beta, gamma)


def _schema_from(args, n):
    if args.b is None:
        if args.k is not None:
            raise UsageError("--k needs --b")
        return ParticipationSchema.single()
    return ParticipationSchema.minsep(n, args.b, args.k)


def _base_fields(s, strategy_label="", schema=None, bandwidth=None):
    return dict(
        n=s.n, beta=s.beta, gamma=s.gamma, schedule=s.kind, strategy=strategy_label,
        schema_b=schema.b if schema is not None and schema.mode == "minsep" else None,
        schema_k=schema.k if schema is not None and schema.mode == "minsep" else None,
        bandwidth=bandwidth,
    )


def _strategy_label(strategy, base):
    st = Strategy.parse(strategy)
    return f"bisr_{base}" if st is Strategy.BISR else st.value


def error_rows(s, strategy, schema, bandwidth=None, base="prefix", sens_mode="heuristic"):
    fact = build(s, strategy, bandwidth=bandwidth, base=base)
    rep = evaluate(fact, schema, sens_mode)
    fields = _base_fields(s, fact.label, schema, fact.bandwidth)
    rows = [make_row(**fields, metric=m, value=getattr(rep, attr))
            for m, attr in (("sensitivity", "sensitivity"), ("maxse", "maxse"), ("meanse", "meanse"))]
    if rep.multi_error is not None:
        rows.append(make_row(**fields, metric="multi_error", value=rep.multi_error))
    return rows


def bound_rows(s, schema):
    rep = bounds_report(s, schema)
    fields = _base_fields(s, "lower_bound", schema)
    rows = [make_row(**fields, metric="lb_maxse", value=rep.lb_maxse),
            make_row(**fields, metric="lb_meanse", value=rep.lb_meanse)]
    if rep.lb_multi is not None:
        rows.append(make_row(**fields, metric="lb_multi", value=rep.lb_multi))
    return rows


# --- subcommands -------------------------------------------------------------


def cmd_schedule(args):
    s = _schedule_from(args)
    if args.format == "json":
        _emit(s.to_json() + "\n", args.out)
    else:
        rows = [make_row(**_base_fields(s), metric=f"chi_{k + 1}", value=float(v))
                for k, v in enumerate(s.values)]
        _emit(render_csv(rows), args.out)
    return 0


def cmd_factorize(args):
    s = _schedule_from(args)
    fact = build(s, args.strategy, bandwidth=args.bandwidth, base=args.base)
    if args.save_dir:
        save_factorization(fact, _resolve_out(args.save_dir))
    row = make_row(**_base_fields(s, fact.label, None, fact.bandwidth), metric="residual", value=fact.residual)
    if args.format == "json":
        _emit(json.dumps({k: row[k] for k in CSV_HEADER}) + "\n", args.out)
    else:
        _emit(render_csv([row]), args.out)
    return 0


def _write_rows(rows, args):
    if args.format == "json":
        _emit(json.dumps(rows, indent=1) + "\n", args.out)
    else:
        _emit(render_csv(rows), args.out)


def cmd_errors(args):
    s = _schedule_from(args)
    schema = _schema_from(args, s.n)
    _write_rows(error_rows(s, args.strategy, schema, args.bandwidth, args.base, args.sens), args)
    return 0


def cmd_bounds(args):
    s = _schedule_from(args)
    _write_rows(bound_rows(s, _schema_from(args, s.n)), args)
    return 0


def cmd_simulate(args):
    s = _schedule_from(args)
    cfg = SimConfig.from_json(Path(args.config).read_text()) if args.config else SimConfig()
    if args.seed is not None:
        cfg.noise_seed = args.seed
    fact = build(s, args.strategy, bandwidth=args.bandwidth, base=args.base)
    traj = dp_sgd_run(cfg, fact)
    out = _resolve_out(args.out) or Path("trajectory.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out)
    out.with_suffix(".config.json").write_text(cfg.to_json())
    print(f"final loss {float(traj.losses[-1])!r} noise sigma {traj.sigma!r} -> {out}")
    return 0


def _sweep_point(point):
    kind, n, beta, gamma, strategy, bandwidth, base, b, k, sens = point
    try:
        s = make_schedule(kind, n, beta, gamma)
        schema = ParticipationSchema.minsep(n, b, k) if b is not None else ParticipationSchema.single()
        if strategy == "lower_bound":
            return bound_rows(s, schema)
        return error_rows(s, strategy, schema, bandwidth, base, sens)
    except Exception as exc:  # recorded in the status column; the sweep keeps going
        label = strategy if strategy == "lower_bound" else _strategy_label(strategy, base)
        return [make_row(n=n, beta=beta, gamma=gamma, schedule=kind, strategy=label,
                         schema_b=b, schema_k=k, bandwidth=bandwidth, metric="all",
                         status=f"error: {type(exc).__name__}: {exc}".replace("\n", " "))]


def sweep_points(spec: dict):
    """Expands a sweep spec into independent grid points."""
    for key in ("n_list", "schedules", "strategies"):
        if not spec.get(key):
            raise UsageError(f"sweep spec needs a nonempty {key!r}")
    betas = spec.get("beta_list") or [1.0]
    schemas = spec.get("schemas") or [None]
    bandwidths = spec.get("bandwidths") or [None]
    bases = spec.get("bases") or ["prefix"]
    gamma = spec.get("gamma", 1.0)
    sens = spec.get("sens", "heuristic")
    points = set()
    for kind, n, beta, strategy, schema in itertools.product(
            spec["schedules"], spec["n_list"], betas, list(spec["strategies"]) + ["lower_bound"], schemas):
        b, k = (schema.get("b"), schema.get("k")) if schema else (None, None)
        beta_eff = 1.0 if kind == "constant" else float(beta)
        g = float(gamma) if kind == "polynomial" else None
        if strategy != "lower_bound" and Strategy.parse(strategy) is Strategy.BISR:
            for p, base in itertools.product(bandwidths, bases):
                points.add((kind, int(n), beta_eff, g, "bisr", p, base, b, k, sens))
        else:
            name = strategy if strategy == "lower_bound" else Strategy.parse(strategy).value
            points.add((kind, int(n), beta_eff, g, name, None, "prefix", b, k, sens))
    return sorted(points, key=lambda p: tuple((x is None, x) for x in p))


def cmd_sweep(args):
    if args.spec:
        spec = json.loads(Path(args.spec).read_text())
    else:
        spec = {
            "n_list": args.n_list, "beta_list": args.beta_list, "schedules": args.schedules,
            "strategies": args.strategies, "bandwidths": args.bandwidths, "bases": args.bases,
            "gamma": args.gamma, "sens": args.sens,
            "schemas": [{"b": b, "k": args.k} for b in args.b_list] if args.b_list else None,
        }
    points = sweep_points(spec)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(_sweep_point, points))
    else:
        chunks = [_sweep_point(p) for p in points]
    rows = sorted((r for chunk in chunks for r in chunk), key=_row_key)
    _write_rows(rows, args)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        print(f"{failed} grid point(s) failed; see status column", file=sys.stderr)
    return 0


def cmd_verify(args):
    results = run_checks(args.check or None)
    text = "".join(json.dumps(r) + "\n" for r in results)
    _emit(text, args.out)
    failed = [r["check"] for r in results if not r["passed"]]
    if failed:
        print("FAILED: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


# --- parser ------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _strategy_name(text):
    try:
        return Strategy.parse(text).value
    except ValueError:
        names = [s.value for s in Strategy]
        raise argparse.ArgumentTypeError(f"unknown strategy {text!r}; choose from {names}") from None


def _add_schedule_flags(p, strategy=False):
    p.add_argument("--schedule", choices=KINDS, default="exponential")
    p.add_argument("--n", type=_positive_int, default=256)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if strategy:
        p.add_argument("--strategy", type=_strategy_name, default="lr_aware")
        p.add_argument("--bandwidth", type=_positive_int, default=None)
        p.add_argument("--base", choices=("prefix", "lr"), default="prefix")


def _add_schema_flags(p):
    p.add_argument("--b", type=_positive_int, default=None, help="min separation between participations")
    p.add_argument("--k", type=_positive_int, default=None, help="max participations (default ceil(n/b))")
    p.add_argument("--sens", choices=("exact", "heuristic"), default="heuristic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrmf", description="Learning-rate-aware matrix factorization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="print a learning-rate schedule")
    _add_schedule_flags(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("factorize", help="build a factorization and report its residual")
    _add_schedule_flags(p, strategy=True)
    p.add_argument("--save-dir", default=None, help="persist metadata.json + matrix files here")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("errors", help="sensitivity, MaxSE, MeanSE (and multi-epoch error)")
    _add_schedule_flags(p, strategy=True)
    _add_schema_flags(p)
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("bounds", help="lower bounds for a schedule")
    _add_schedule_flags(p)
    _add_schema_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="run the synthetic DP-SGD simulator")
    _add_schedule_flags(p, strategy=True)
    p.add_argument("--config", default=None, help="SimConfig JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="evaluate a grid and write one CSV")
    p.add_argument("--spec", default=None, help="JSON sweep spec (overrides grid flags)")
    p.add_argument("--n-list", type=_positive_int, nargs="+", default=[256])
    p.add_argument("--beta-list", type=float, nargs="+", default=[0.1])
    p.add_argument("--schedules", choices=KINDS, nargs="+", default=["exponential"])
    p.add_argument("--strategies", type=_strategy_name, nargs="*", default=[s.value for s in SINGLE_EPOCH])
    p.add_argument("--bandwidths", type=_positive_int, nargs="+", default=[64])
    p.add_argument("--bases", choices=("prefix", "lr"), nargs="+", default=["prefix"])
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--b-list", type=_positive_int, nargs="+", default=None)
    p.add_argument("--k", type=_positive_int, default=None)
    p.add_argument("--sens", choices=("exact", "heuristic"), default="heuristic")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=None, help="accepted for interface symmetry; sweeps are deterministic")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the identity/oracle self-checks")
    p.add_argument("--check", nargs="*", default=None, help="run only these checks")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ScheduleError, SensitivityError) as exc:
        print(f"lrmf: error: {exc}", file=sys.stderr)
        return 2
    except (MatrixError, FactorizationError, FloatingPointError, ArithmeticError) as exc:
        print(f"lrmf: numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"lrmf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
