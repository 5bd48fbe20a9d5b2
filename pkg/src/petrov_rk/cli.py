"""Command-line front end.

Subcommands::

    derive       solve for trial/test bases of a tableau
    certify      check the embedded solution tables
    equivalence  variational versus classical stepping on the heat equation
    converge     temporal convergence study, CSV output
    plot-basis   sample a basis file on [0, 1], CSV output

Every subcommand accepts ``--config FILE`` with flat ``key = value`` lines;
explicit flags win over file values.  The seed falls back to the
``PETROV_RK_SEED`` environment variable.

Exit codes: 0 success, 1 usage, 2 solver exhausted, 3 certification
failure, 4 equivalence failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .basis import (
    SingularJacobianError,
    SolveOptions,
    certify_tables,
    read_basis,
    solve_report,
    write_basis,
)
from .butcher import REGISTRY_NAMES, ButcherTableau, load_tableau, parse_fraction, registry_get
from .march import CASES, convergence_study, equivalence_run, write_convergence_csv, write_run_csv
from .poly import evaluate

log = logging.getLogger("petrov_rk")

EXIT_OK, EXIT_USAGE, EXIT_EXHAUSTED, EXIT_CERTIFY, EXIT_EQUIVALENCE = 0, 1, 2, 3, 4
SEED_ENV = "PETROV_RK_SEED"
EQUIVALENCE_TOL = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve_tableau(name: str, alpha: str | None = None) -> ButcherTableau:
    """Registry name (optionally with ``--alpha``) or a tableau file path."""
    if Path(name).is_file():
        return load_tableau(name)
    try:
        return registry_get(name, None if alpha is None else parse_fraction(alpha))
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc.args[0] if exc.args else exc)) from None


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return _seed(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"{SEED_ENV} must be an integer in [0, 2^64)") from None
    return 0


def _fmt_res(v: float, exact: bool) -> str:
    return "0 (exact)" if exact and v == 0 else f"{v:.3e}"


# -- commands ------------------------------------------------------------------

def cmd_derive(args) -> int:
    tab = resolve_tableau(args.tableau, args.alpha)
    opts = SolveOptions(starts=args.starts, seed=resolve_seed(args.seed), mode=args.mode)
    try:
        rep = solve_report(tab, args.degree, opts)
    except SingularJacobianError as exc:
        print(f"solver exhausted: {exc}")
        return EXIT_EXHAUSTED
    d = tab.s if args.degree is None else args.degree
    print(f"{tab.name}: degree {d}, {rep.starts} starts, {rep.converged} converged, "
          f"{rep.clusters} clusters, {rep.elapsed:.2f} s")
    print(f"{len(rep.solutions)} solution(s)")
    if not rep.solutions:
        return EXIT_EXHAUSTED
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for k, (pair, rn) in enumerate(zip(rep.solutions, rep.residuals), start=1):
        kind = "exact" if pair.mode == "rational" else ("real" if pair.is_real() else "complex")
        line = f"  solution {k}: {kind:7s} residual {_fmt_res(rn, pair.mode == 'rational')}"
        if out is not None:
            path = out / f"solution-{k}.basis"
            write_basis(pair, path)
            line += f" -> {path}"
        print(line)
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        results = certify_tables(corrupt=args.corrupt, tol=args.tol)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    width = max(len(r.name) for r in results)
    print(f"{'fixture':{width}s}  {'mode':8s}  {'matrix form':>12s}  {'conditions':>12s}  result")
    for r in results:
        print(f"{r.name:{width}s}  {r.mode:8s}  {_fmt_res(r.matrix_norm, r.exact):>12s}  "
              f"{_fmt_res(r.condition_norm, r.exact):>12s}  {'pass' if r.passed else 'FAIL'}")
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} fixtures pass")
    return EXIT_OK if n_ok == len(results) else EXIT_CERTIFY


def cmd_equivalence(args) -> int:
    tab = resolve_tableau(args.tableau, args.alpha)
    rep = equivalence_run(tab, dofs=args.dofs, steps=args.steps, seed=resolve_seed(args.seed),
                          forced=args.forced, lumped=args.lumped, dump=args.dump_matrices)
    if args.csv:
        write_run_csv(rep, args.csv)
    print(f"{tab.name}: {args.dofs} dofs, {len(rep.times)} steps, "
          f"max diff {rep.max_error:.3e} (relative {rep.max_rel_error:.3e})")
    if rep.diverged or rep.max_rel_error > EQUIVALENCE_TOL:
        print(f"equivalence FAILED (tolerance {EQUIVALENCE_TOL:g})")
        return EXIT_EQUIVALENCE
    return EXIT_OK


def cmd_converge(args) -> int:
    tab = resolve_tableau(args.tableau, args.alpha)
    steps = [args.base_steps * 2 ** k for k in range(args.levels)]
    rows = convergence_study(tab, args.case, steps, n_elements=args.elements,
                             lumped=args.lumped, reference=args.reference)
    if args.csv:
        write_convergence_csv(rows, args.csv)
    print(f"{'level':>5s}  {'steps':>6s}  {'tau':>10s}  {'error_L2':>10s}  order")
    for r in rows:
        order = "" if np.isnan(r.observed_order) else f"{r.observed_order:.3f}"
        print(f"{r.level:5d}  {r.n_steps:6d}  {r.tau:10.3e}  {r.error_L2:10.3e}  {order}")
    return EXIT_OK


def cmd_plot_basis(args) -> int:
    try:
        pair = read_basis(args.basis)
    except (OSError, ValueError) as exc:
        print(f"cannot read basis file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ts = np.linspace(0.0, 1.0, args.samples)
    trial, test = pair.trial(), pair.test()
    header = ["t"] + [f"phi_{i + 1}" for i in range(pair.s)] + [f"psi_{i + 1}" for i in range(pair.s)]

    def value(p, t):
        if pair.mode == "rational":
            # exact evaluation at the (binary) sample point, then rounded once
            return repr(float(evaluate(p, Fraction(float(t)))))
        return repr(evaluate(p, float(t) if pair.mode == "real" else complex(t)))

    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for t in ts:
            w.writerow([repr(float(t))] + [value(p, t) for p in trial + test])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _add_tableau(p):
    p.add_argument("--tableau", default="rk4-classic",
                   help=f"registry name ({', '.join(REGISTRY_NAMES)}) or tableau file")
    p.add_argument("--alpha", help="parameter of rk2-alpha, e.g. 1/2")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="petrov-rk", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file with defaults")
    common.add_argument("--seed", type=_seed, default=None,
                        help=f"random seed (default: ${SEED_ENV} or 0)")

    p = sub.add_parser("derive", parents=[common], help="solve for trial/test bases")
    _add_tableau(p)
    p.add_argument("--degree", type=_nonneg_int, default=None, help="polynomial degree (default s)")
    p.add_argument("--mode", choices=("real", "complex"), default="real")
    p.add_argument("--starts", type=_positive_int, default=200)
    p.add_argument("--out", help="directory for basis files")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("certify", parents=[common], help="certify the embedded tables")
    p.add_argument("--corrupt", metavar="FIXTURE", help="perturb one fixture (negative control)")
    p.add_argument("--tol", type=_positive_float, default=1e-10)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("equivalence", parents=[common], help="variational vs classical stepping")
    _add_tableau(p)
    p.add_argument("--dofs", type=_positive_int, default=20)
    p.add_argument("--steps", type=_positive_int, default=100)
    p.add_argument("--forced", action="store_true", help="use a manufactured source term")
    p.add_argument("--lumped", action="store_true", help="row-sum lumped mass on both sides")
    p.add_argument("--csv", help="per-step CSV (step, t, diff_vs_oracle)")
    p.add_argument("--dump-matrices", help="write dense M and K to this file")
    p.set_defaults(func=cmd_equivalence)

    p = sub.add_parser("converge", parents=[common], help="temporal convergence study")
    _add_tableau(p)
    p.add_argument("--case", choices=sorted(CASES), default="high-mode")
    p.add_argument("--levels", type=_positive_int, default=5)
    p.add_argument("--base-steps", type=_positive_int, default=16)
    p.add_argument("--elements", type=_positive_int, default=512)
    p.add_argument("--reference", choices=("semidiscrete", "exact"), default="semidiscrete")
    p.add_argument("--lumped", action="store_true")
    p.add_argument("--csv", help="CSV (level, tau, h, error_L2, observed_order)")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("plot-basis", parents=[common], help="sample a basis file on [0, 1]")
    p.add_argument("basis", help="basis file written by derive")
    p.add_argument("--samples", type=_positive_int, default=101)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_plot_basis)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        # re-parse with file values as defaults so explicit flags still win
        for action in sub._actions:
            if action.dest in cfg:
                raw = cfg[action.dest]
                if action.nargs == 0:
                    val = raw.lower() in ("1", "true", "yes", "on")
                else:
                    try:
                        val = action.type(raw) if action.type else raw
                    except (ValueError, argparse.ArgumentTypeError) as exc:
                        parser.error(f"config {action.dest}: {exc}")
                    if action.choices and val not in action.choices:
                        parser.error(f"config {action.dest}: invalid choice {val!r}")
                sub.set_defaults(**{action.dest: val})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"petrov-rk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"petrov-rk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
