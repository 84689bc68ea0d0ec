"""Command-line entry point: ``cbss <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 verify
found failing checks.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from ._validation import NumericalError
from .bvp import Grid, SolverConfig, solve_bvp
from .cbss import CbssConfig, estimate_tail, simulate_batch, theory_tail
from .feynman_kac import CandidateU, fk_estimate
from .levy_path import PathConfig
from .rng import substream, substream_seed
from .stable import StableParams, sample_stable
from .verify import verify

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment. Keys use flag names without dashes."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _emit(rows, columns, args):
    if args.format == "json":
        text = json.dumps([{c: r[i] for i, c in enumerate(columns)} for r in rows], indent=2, default=float) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _path_config(args):
    return PathConfig(args.dt, args.jump_threshold, args.scheme)


def cmd_sample_stable(args):
    rng = substream(args.seed, 0)
    vals = sample_stable(StableParams(args.alpha), args.t, rng, args.n)
    _emit([(args.t, v) for v in vals], ["t", "value"], args)


def cmd_simulate_cbss(args):
    cfg = CbssConfig(StableParams(args.alpha), _path_config(args), args.progeny_cap, args.time_cap, args.seed)
    crossed, extreme, cens, prog, ev = simulate_batch(cfg, args.x[0], args.n, substream_seed(args.seed, 0),
                                                      early_exit=not args.no_early_exit)
    rows = [(i, c, e, s, p, k) for i, (c, e, s, p, k) in enumerate(zip(crossed, extreme, cens, prog, ev))]
    _emit(rows, ["realization", "crossed", "M_lower", "censored", "progeny_used", "wall_events"], args)


def cmd_estimate_tail(args):
    cfg = CbssConfig(StableParams(args.alpha), _path_config(args), args.progeny_cap, args.time_cap, args.seed)
    ests = estimate_tail(cfg, args.x, args.n, args.workers)
    rows = []
    for e in ests:
        th = float(theory_tail(args.alpha, e.x))
        rows.append((args.alpha, e.x, e.n, e.hits, e.censored_count, e.p_hat, e.ci_low, e.ci_high,
                     e.p_hat_bracket_high, th, e.p_hat / th))
    _emit(rows, ["alpha", "x", "n", "hits", "censored", "p_hat", "ci_low", "ci_high", "bracket_high",
                 "theory", "ratio"], args)
    for e in ests:
        if not e.quality_ok:
            print(f"warning: x={e.x:g}: {e.censored_count} of {e.n} runs censored", file=sys.stderr)


def _grid(args):
    if args.grading == "geometric":
        return Grid.geometric(args.L, args.nodes, args.x_min)
    if args.grading == "uniform":
        return Grid.uniform(args.L, args.nodes)
    raise UsageError(f"unknown grading {args.grading!r}")


def cmd_solve_bvp(args):
    u = solve_bvp(StableParams(args.alpha), _grid(args), SolverConfig(args.damping, args.tol, args.max_iters))
    res = u.info["residual"]
    x = u.grid.nodes
    rows = [(xi, ui, xi ** (0.5 * args.alpha) * ui, abs(ri)) for xi, ui, ri in zip(x, u.values, res)]
    _emit(rows, ["x", "u", "x_pow_u", "residual"], args)


def _candidate(args):
    spec = args.candidate
    if spec == "bvp":
        return CandidateU.from_grid_function(
            solve_bvp(StableParams(args.alpha), Grid.geometric(args.L, args.nodes, args.x_min), SolverConfig()))
    if spec.startswith("ansatz"):
        _, _, c = spec.partition(":")
        return CandidateU.ansatz(args.alpha, float(c) if c else None)
    raise UsageError("--candidate must be 'bvp' or 'ansatz:<c>'")


def cmd_fk_check(args):
    cand = _candidate(args)
    rows = []
    for i, x in enumerate(args.x):
        est = fk_estimate(x, cand, args.alpha, _path_config(args), args.n, substream(args.seed, i),
                          horizon_mult=args.horizon_mult)
        ux = float(cand(np.array(x)))
        rows.append((x, est.mean, est.std_err, ux, est.mean / ux if ux > 0 else math.nan))
    _emit(rows, ["x", "fk_mean", "fk_se", "candidate_u", "ratio"], args)


def cmd_verify(args):
    only = None if not args.only else {c.strip() for c in args.only.split(",") if c.strip()}
    report = verify(args.level, args.seed, only=only, log=lambda s: print(s, file=sys.stderr))
    text = report.to_json() + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--alpha", type=float, default=1.0)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--workers", type=int, default=1)
    shared.add_argument("--out", default=None)
    shared.add_argument("--format", choices=["csv", "json"], default="csv")
    shared.add_argument("--config", default=None, help="key=value file; explicit flags win")

    path = argparse.ArgumentParser(add_help=False)
    path.add_argument("--dt", type=float, default=0.05)
    path.add_argument("--scheme", choices=["grid", "hybrid"], default="hybrid")
    path.add_argument("--jump-threshold", type=float, default=None)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--L", type=float, default=1e4)
    grid.add_argument("--nodes", type=int, default=400)
    grid.add_argument("--x-min", type=float, default=1e-3)

    p = argparse.ArgumentParser(prog="cbss", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample-stable", parents=[shared], help="draw X_t")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n", type=int, default=1000)
    s.set_defaults(func=cmd_sample_stable)

    caps = argparse.ArgumentParser(add_help=False)
    caps.add_argument("--x", type=float, action="append")
    caps.add_argument("--n", type=int, default=1000)
    caps.add_argument("--progeny-cap", type=int, default=10**7)
    caps.add_argument("--time-cap", type=float, default=math.inf)

    s = sub.add_parser("simulate-cbss", parents=[shared, path, caps], help="per-realisation records")
    s.add_argument("--no-early-exit", action="store_true")
    s.set_defaults(func=cmd_simulate_cbss)

    s = sub.add_parser("estimate-tail", parents=[shared, path, caps], help="P{M >= x} by simulation")
    s.set_defaults(func=cmd_estimate_tail)

    s = sub.add_parser("solve-bvp", parents=[shared, grid], help="solve the boundary value problem")
    s.add_argument("--grading", choices=["geometric", "uniform"], default="geometric")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iters", type=int, default=60)
    s.add_argument("--damping", type=float, default=1.0)
    s.set_defaults(func=cmd_solve_bvp)

    s = sub.add_parser("fk-check", parents=[shared, path, grid], help="Feynman-Kac image of a candidate")
    s.add_argument("--x", type=float, action="append")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--candidate", default="bvp")
    s.add_argument("--horizon-mult", type=float, default=50.0)
    s.set_defaults(func=cmd_fk_check)

    s = sub.add_parser("verify", parents=[shared], help="run the check battery")
    s.add_argument("--level", choices=["quick", "full"], default="quick")
    s.add_argument("--only", default=None, help="comma-separated check ids")
    s.set_defaults(func=cmd_verify)
    return p


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known or key in ("config", "func", "help"):
            raise UsageError(f"unknown config key {key!r}")
        act = known[key]
        conv = act.type or (lambda v: v)
        try:
            val = [conv(v) for v in raw.split(",")] if isinstance(act, argparse._AppendAction) else conv(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
        defaults[key] = val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if hasattr(args, "x") and args.command in ("simulate-cbss", "estimate-tail", "fk-check") and not args.x:
            args.x = [100.0]
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        code = args.func(args)
        return EXIT_OK if code is None else code
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (UsageError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
