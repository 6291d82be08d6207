"""Command-line front end.

Exit codes: 0 success, 2 configuration or argument error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .contract import optimal_actions
from .foc_solver import SolverError, solve
from .objective import eval_f
from .params import ParamsError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bracket(text):
    v = _float_list(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError("bracket must be a,b")
    return tuple(v)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="esg-incentives", description="Optimal multi-agent disclosure contracts.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="JSON config path or preset name (table1, table2, table3)")
        sp.add_argument("--out", type=Path, help="output file (default: stdout)")
        sp.add_argument("--gamma-p", type=float, dest="gamma_p", help="override gamma_P")

    sp = sub.add_parser("solve", help="maximiser, actions and optimal value at one gamma_P")
    common(sp)

    sp = sub.add_parser("sweep", help="maximisers along a gamma_P grid")
    common(sp, config_required=False)
    sp.add_argument("--grid", help="start:stop:step (inclusive)")
    sp.add_argument("--figure", choices=sorted(ex.FIGURES),
                    help="write a figure preset's CSVs into the --out directory")

    sp = sub.add_parser("flip-threshold", help="gamma_P where a diagonal loading changes sign")
    common(sp)
    sp.add_argument("--row", type=int, required=True, help="1-based agent index")
    sp.add_argument("--bracket", type=_bracket, default=(1e-3, 10.0))
    sp.add_argument("--tol", type=float, default=1e-4)

    sp = sub.add_parser("constrained", help="limiting solution as gamma_P grows without bound")
    common(sp)

    sp = sub.add_parser("convergence", help="penalty convergence table")
    common(sp)
    sp.add_argument("--gamma-p-list", type=_float_list, default=[1e2, 1e3, 1e4],
                    help="increasing comma-separated gamma_P values")

    sp = sub.add_parser("simulate", help="Monte Carlo participation and principal-value check")
    common(sp)
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _params(args):
    params = load_config(args.config)
    if args.gamma_p is not None:
        params = params.with_gamma_P(args.gamma_p)
    return params


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _print_summary(summary, stream):
    for k, v in summary.items():
        if isinstance(v, (bool, np.bool_)):
            v = str(bool(v)).lower()
        elif isinstance(v, float):
            v = format(v, ".10g")
        print(f"{k}={v}", file=stream)


def _run(args) -> int:
    cmd = args.command
    if cmd == "sweep" and args.figure:
        if args.out is None:
            raise UsageError("--figure needs --out DIR")
        for path in ex.figure_data(args.figure, args.out).values():
            print(path)
        return EXIT_OK
    if args.config is None:
        raise UsageError("--config is required")
    params = _params(args)
    # tables go to stdout unless --out is given; human-readable extras then
    # go to stderr so stdout stays a clean CSV
    side = sys.stdout if args.out is not None else sys.stderr

    if cmd == "solve":
        s = solve(params)
        _emit(ex.solve_csv(params, s), args.out)
        np.set_printoptions(precision=6, suppress=True)
        print(f"zQ=\n{s.zQ}\nzS={s.zS}\nactions={optimal_actions(s, params)}\n"
              f"f_star={eval_f(params, s):.10g}", file=side)
    elif cmd == "sweep":
        if args.grid is None:
            raise UsageError("sweep needs --grid start:stop:step or --figure")
        _emit(ex.sweep_csv(ex.sweep(params, ex.parse_grid(args.grid))), args.out)
    elif cmd == "flip-threshold":
        r = ex.flip_threshold(params, args.row, args.bracket, args.tol)
        print(format(r.gamma_P_dagger, ".10g"))
        print(f"bracket={r.bracket[0]:.10g},{r.bracket[1]:.10g} iterations={r.iterations} "
              f"method={r.method}", file=sys.stderr)
    elif cmd == "constrained":
        text, summary = ex.constrained_report(params)
        _emit(text, args.out)
        _print_summary(summary, side)
    elif cmd == "convergence":
        _emit(ex.convergence_csv(params, args.gamma_p_list), args.out)
    elif cmd == "simulate":
        if args.paths < 1:
            raise UsageError(f"--paths must be >= 1, got {args.paths}")
        text, summary = ex.simulate_report(params, args.paths, args.seed)
        _emit(text, args.out)
        _print_summary(summary, side)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    # LinAlgError derives from ValueError, so it is caught first
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParamsError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
