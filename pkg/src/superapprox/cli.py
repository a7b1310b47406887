"""Command-line front end: ``superapprox <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
from sympy import isprime

from . import finlog as fl
from . import heights as hg
from .errors import (GroupTooLarge, HypothesisFailed, MaxIterations, NotInvertible, NotSpecialLinear,
                     NotSymmetric, PostconditionFailed, SearchBudgetExceeded, Unsupported)
from .growth import check_P_predicate, growth_profile
from .lift import tower_gaps
from .modgroup import DEFAULT_CAP, SubsetHandle, enumerate_group, load_gens, lubotzky
from .regsemi import f_s
from .treereg import blocked_regularize, load_tree, regularize
from .varcount import PRESETS, escape_series, load_variety, nonregular_escape
from .walk import flattening_series, spectral_gap, uniform_on, walk_rows

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- output -----------------------------------------------------------------

class Table:
    def __init__(self, schema: str, columns: list[str], rows: list[tuple]):
        self.schema, self.columns, self.rows = schema, columns, rows


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def render(result, fmt: str) -> str:
    if isinstance(result, Table):
        if fmt == "json":
            body = {"schema": result.schema, "columns": result.columns,
                    "rows": [list(r) for r in result.rows]}
            return json.dumps(body, default=_jsonable, indent=2) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(result.columns)
        for r in result.rows:
            w.writerow([_jsonable(v) if isinstance(v, (Fraction, np.generic)) else v for v in r])
        return buf.getvalue()
    if fmt == "csv":
        flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(flat.keys())
        w.writerow([_jsonable(v) if isinstance(v, (Fraction, np.generic)) else v for v in flat.values()])
        return buf.getvalue()
    return json.dumps(result, default=_jsonable, indent=2) + "\n"


# --- shared helpers -----------------------------------------------------------

def _gens(args, k: int | None = None):
    k = args.power if k is None else k
    if args.gens:
        gens = load_gens(args.gens, gl=getattr(args, "gl", False))
        if gens.modulus != args.prime**k:
            gens = gens.reduce(args.prime**k) if gens.p == args.prime and gens.k >= k else None
            if gens is None:
                raise ValueError("generator file modulus does not match --prime/--power")
        return gens
    if args.preset == "lubotzky3":
        return lubotzky(args.prime, k, 3)
    raise ValueError(f"unknown preset {args.preset!r}")


def _table(args, k: int | None = None):
    return enumerate_group(_gens(args, k), cap=args.cap)


def _group_args(p: argparse.ArgumentParser, power: bool = True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", default="lubotzky3", choices=["lubotzky3"])
    src.add_argument("--gens", help="JSON generator file")
    p.add_argument("--prime", type=int, required=True)
    if power:
        p.add_argument("--power", type=int, default=1)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)


def _r(x: float) -> float:
    """Round to 15 significant digits so output is stable across BLAS builds."""
    return float(f"{float(x):.15g}")


def _int_range(text: str) -> list[int]:
    """``a..b`` (inclusive) or a comma list."""
    text = text.strip()
    if not text:
        return []
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


# --- commands -----------------------------------------------------------------

def cmd_enumerate(args):
    t = _table(args)
    return {"schema": "enumerate/1", "n": t.n, "p": t.p, "k": t.k, "order": t.order,
            "generators": len(t.gens), "diameter": int(t.depth.max())}


def cmd_gap(args):
    if args.method == "lift":
        levels = tower_gaps(lambda k: _gens(args, k), args.prime, args.power)
        top = levels[-1]
        return {"schema": "gap/1", "p": args.prime, "k": args.power, "order": top.order,
                "lambda": top.lam, "method": top.method, "levels": [g.as_dict() for g in levels]}
    t = _table(args)
    rep = spectral_gap(uniform_on(t), method=args.method, seed=args.seed)
    out = {"schema": "gap/1", "p": args.prime, "k": args.power}
    out.update(rep.as_dict())
    return out


def _scan_cell(args, p: int, k: int) -> tuple:
    try:
        gens = lubotzky(p, k, 3) if args.preset == "lubotzky3" else load_gens(args.gens).reduce(p**k)
    except (NotInvertible, NotSpecialLinear, ValueError) as exc:
        return (p, k, "", "", f"skipped:{exc}")
    ident = np.eye(gens.n, dtype=np.int64)
    if all(np.array_equal(g.as_array(), ident) for g in gens.gens):
        return (p, k, 1, "", "degenerate")
    try:
        t = enumerate_group(gens, cap=args.cap)
    except GroupTooLarge:
        return (p, k, "", "", "skipped:cap")
    rep = spectral_gap(uniform_on(t), seed=args.seed)
    return (p, k, t.order, round(rep.lam, 12), rep.method)


def cmd_gap_scan(args):
    primes = [p for p in _int_range(args.primes) if isprime(p)]
    powers = _int_range(args.powers)
    cells = [(p, k) for p in primes for k in powers]
    if args.threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(lambda c: _scan_cell(args, *c), cells))
    else:
        rows = [_scan_cell(args, p, k) for p, k in cells]
    rows.sort(key=lambda r: (r[0], r[1]))
    return Table("gap-scan/1", ["p", "k", "order", "lambda", "method"], rows)


def cmd_walk(args):
    t = _table(args)
    rows = walk_rows(uniform_on(t), args.steps)
    return Table("walk/1", ["l", "l2_norm", "mass_identity"], [(l, _r(a), _r(b)) for l, a, b in rows])


def cmd_flatten(args):
    t = _table(args)
    series = flattening_series(uniform_on(t), args.steps)
    floor = 1 / np.sqrt(t.order)
    return Table("flatten/1", ["l", "l2_norm", "ratio_to_uniform"],
                 [(l, _r(v), _r(v / floor)) for l, v in series])


def cmd_growth(args):
    t = _table(args)
    ball = SubsetHandle.ball(t, args.radius)
    rep = growth_profile(ball)
    if args.delta is not None:
        rep.predicate = check_P_predicate(ball, uniform_on(t), args.delta, args.steps)
    return rep.as_dict()


def cmd_treereg(args):
    tree = load_tree(args.input)
    fn = blocked_regularize if args.blocked else regularize
    return fn(tree, args.eps, strict=not args.lenient).as_dict()


def cmd_finlog_check(args):
    params = fl.FiniteLogParams.from_exponents(args.p, args.q1_exp, args.q2_exp)
    rng = np.random.default_rng(args.seed)
    failures = []
    checked = 0
    for i in range(args.samples):
        g = fl.random_congruence(args.n, params.q1, rng)
        h = fl.random_congruence(args.n, params.q1, rng)
        gamma = fl.random_sl(args.n, rng)
        for name, res in (("additive", fl.check_additive(g, h, params)),
                          ("equivariance", fl.check_equivariance(gamma, g, params)),
                          ("commutator", fl.check_commutator(g, h, params, params))):
            checked += 1
            if not res.passed:
                failures.append({"sample": i, "identity": name, "lhs": res.lhs, "rhs": res.rhs})
    return {"schema": "finlog-check/1", "p": args.p, "q1": params.q1, "q2": params.q2, "n": args.n,
            "checked": checked, "failures": failures}


def _parse_matrix(text: str) -> list[list[int]]:
    return [[int(v) for v in row.split(",")] for row in text.split(";")]


def cmd_regsemi(args):
    g = _parse_matrix(args.matrix)
    rep = f_s(g, [args.prime] if args.prime else None)
    if args.prime:
        rep.verdict(args.prime, args.power)
    out = rep.as_dict()
    if args.prime:
        out["verdict"] = rep.verdicts[(args.prime, args.power)]
    return out


def cmd_height(args):
    if args.rational is not None:
        return hg.point_height([args.rational]).as_dict()
    if args.point is not None:
        return hg.point_height(args.point.split(","), projective=args.projective).as_dict()
    return hg.poly_height(hg.IntPolynomial.parse(args.poly)).as_dict()


def cmd_escape(args):
    t = _table(args)
    mu = uniform_on(t)
    if args.regularity is not None:
        series = nonregular_escape(mu, np.eye(t.n, dtype=np.int64), args.regularity, args.steps)
    else:
        if args.constraint_file:
            w = load_variety(args.constraint_file)
        elif args.constraint in PRESETS:
            w = PRESETS[args.constraint]()
        else:
            raise ValueError(f"unknown constraint {args.constraint!r}")
        series = escape_series(w, mu, args.steps)
    return Table("escape/1", ["l", "mass"], [(l, _r(v)) for l, v in series.as_csv_rows()])


# --- parser -----------------------------------------------------------------------

def _global_args(p: argparse.ArgumentParser, default=None) -> None:
    keep = argparse.SUPPRESS if default is argparse.SUPPRESS else None
    p.add_argument("--out", default=keep, help="write output here instead of stdout")
    p.add_argument("--format", default=keep, choices=["json", "csv"])
    p.add_argument("--threads", type=int, default=keep if keep else 1)
    p.add_argument("--seed", type=int, default=keep if keep else 0)
    p.add_argument("--config", default=keep, help="key = value file; command-line flags win")


def build_parser() -> Parser:
    ap = Parser(prog="superapprox", description="Desk-scale experiments on Cayley graphs of SL_n(Z/p^k).")
    _global_args(ap)
    # The same flags are accepted after the command name; they only override when given.
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=Parser)
    add = sub.add_parser
    sub.add_parser = lambda name, **kw: add(name, parents=[common], **kw)

    p = sub.add_parser("enumerate", help="BFS-enumerate the generated group")
    _group_args(p)
    p.set_defaults(func=cmd_enumerate, fmt="json")

    p = sub.add_parser("gap", help="spectral gap of the uniform generator walk")
    _group_args(p)
    p.add_argument("--method", default="auto", choices=["auto", "dense", "iterative", "power", "lift"])
    p.set_defaults(func=cmd_gap, fmt="json")

    p = sub.add_parser("gap-scan", help="spectral gaps over a range of primes and powers")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", default="lubotzky3", choices=["lubotzky3"])
    src.add_argument("--gens")
    p.add_argument("--primes", required=True, help="a..b or comma list")
    p.add_argument("--powers", default="1..1")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_gap_scan, fmt="csv")

    for name, func, helptext in (("walk", cmd_walk, "l2 norm and return mass per step"),
                                 ("flatten", cmd_flatten, "l2 flattening series")):
        p = sub.add_parser(name, help=helptext)
        _group_args(p)
        p.add_argument("--steps", type=int, default=20)
        p.set_defaults(func=func, fmt="csv")

    p = sub.add_parser("growth", help="tripling of a word ball")
    _group_args(p)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--delta", type=float)
    p.add_argument("--steps", type=int, default=10)
    p.set_defaults(func=cmd_growth, fmt="json")

    p = sub.add_parser("treereg", help="regularize a leaf set of a k-ary tree")
    p.add_argument("--input", required=True, help="JSON {k, n, leaves}")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--blocked", action="store_true", help="use the blocked variant")
    p.add_argument("--lenient", action="store_true", help="skip the size hypotheses and report bounds")
    p.set_defaults(func=cmd_treereg, fmt="json")

    p = sub.add_parser("finlog-check", help="random checks of the finite logarithm identities")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q1-exp", type=int, default=1)
    p.add_argument("--q2-exp", type=int, default=2)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_finlog_check, fmt="json")

    p = sub.add_parser("regsemi", help="regularity measure of an integer matrix")
    p.add_argument("--matrix", required=True, help='rows separated by ";", e.g. "1,1;2,3"')
    p.add_argument("--prime", type=int)
    p.add_argument("--power", type=int, default=1)
    p.set_defaults(func=cmd_regsemi, fmt="json")

    p = sub.add_parser("height", help="height of a rational, point or polynomial")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--rational")
    what.add_argument("--point", help="comma-separated rationals")
    what.add_argument("--poly", help='terms "c:e1,e2;..."')
    p.add_argument("--projective", action="store_true")
    p.set_defaults(func=cmd_height, fmt="json")

    p = sub.add_parser("escape", help="walk mass on a subvariety per step")
    _group_args(p)
    p.add_argument("--constraint", default="trace-2")
    p.add_argument("--constraint-file")
    p.add_argument("--regularity", type=int, help="track the non-regular locus mod p^m instead")
    p.add_argument("--steps", type=int, default=20)
    p.set_defaults(func=cmd_escape, fmt="csv")
    ap.command_names = set(sub.choices)
    return ap


GLOBAL_KEYS = {"out", "format", "threads", "seed"}


def _config_argv(path: str) -> tuple[list[str], list[str]]:
    """Translate ``key = value`` lines into (global flags, command flags)."""
    glob, out = [], []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip().replace("_", "-")
            target = glob if key in GLOBAL_KEYS else out
            flag = "--" + key
            value = value.strip()
            if value.lower() == "true":
                target.append(flag)
            elif value.lower() != "false":
                target += [flag, value]
    return glob, out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    try:
        config = pre.parse_known_args(argv)[0].config
        if config:
            # File values go first so explicit flags override them.
            glob, local = _config_argv(config)
            i = next((j for j, a in enumerate(argv) if a in ap.command_names), len(argv) - 1)
            argv = glob + argv[: i + 1] + local + argv[i + 1:]
        args = ap.parse_args(argv)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        result = args.func(args)
    except (GroupTooLarge, SearchBudgetExceeded, MaxIterations) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (HypothesisFailed, PostconditionFailed, NotSpecialLinear, NotInvertible, NotSymmetric,
            Unsupported, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    text = render(result, args.format or args.fmt)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
