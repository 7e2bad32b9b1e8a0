"""Command-line entry point: analyze, renorm and fundfn subcommands.

Exit codes: 0 success (all checks pass), 2 check failure or infeasible
construction, 1 usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import fundfn
from .config import CapExceeded, settings
from .renorm import (
    PipelineInfeasible,
    PreconditionFailed,
    renorm_thm21,
    renorm_thm23,
    renorm_thm42,
    renorm_thm43,
)
from .serialize import SpecError, dump_json, load_space, space_to_dict, write_atomic
from .verify import theorem_suite


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed for sampling and searches")
    p.add_argument("--tolerance", type=float, default=settings.tol, help="numerical tolerance for checks")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--cap-enum", type=int, default=settings.enum_cap, help="largest dimension for subset enumeration")
    p.add_argument("--cap-dp", type=int, default=settings.dp_cap, help="largest dimension for the disjoint-family evaluator")
    p.add_argument("--cap-hull", type=int, default=settings.hull_cap, help="largest dimension for sign-pattern enumeration")


def _space_args(p: argparse.ArgumentParser, eps_required: bool = False) -> None:
    p.add_argument("--space", required=True, help="space spec JSON file")
    p.add_argument("--dim", type=int, help="dimension for variants that take one")
    p.add_argument("--eps", type=float, required=eps_required, help="renorming accuracy")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="greedylab", description="Greedy-approximation constants and renormings at desk scale.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="constants report and consistency checks for a space")
    _space_args(a)
    a.add_argument("--samples", type=int, default=10_000, help="sampled (x, m) pairs per space")
    a.add_argument("--budget", type=int, default=10_000, help="Property (A) random starts per space")
    a.add_argument("--truncated", action="store_true", help="also check the truncation-regime renorming (needs --eps)")
    _common(a)

    r = sub.add_parser("renorm", help="apply a renorming and write the new space spec")
    r.add_argument("construction", choices=("thm21", "thm23", "thm42", "thm43"))
    _space_args(r)
    r.add_argument("--allow-degenerate", action="store_true", help="thm43: accept n0 = dim")
    _common(r)

    f = sub.add_parser("fundfn", help="fundamental-function tables")
    f.add_argument("op", choices=("delta", "envelope", "alternating", "lemma31", "urp"))
    f.add_argument("--formula", help="identity | sqrt | power | x_over_log | constant")
    f.add_argument("--alpha", type=float, help="exponent for --formula power")
    f.add_argument("--samples", help="JSON file: list of phi(1..N) or a fundamental-function object")
    f.add_argument("--breakpoints", help="comma-separated, e.g. 1,10,100,1000")
    f.add_argument("--cap", type=int, help="grid length")
    f.add_argument("--m", default="2", help="comma-separated m values")
    f.add_argument("--eps", type=float, default=0.5)
    _common(f)
    return ap


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _table(header, rows, fmt) -> str:
    if fmt == "json":
        return dump_json([dict(zip(header, r)) for r in rows])
    return _table_csv(header, rows)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    space = load_space(args.space, args.dim)
    if args.truncated and args.eps is None:
        raise UsageError("--truncated needs --eps")
    suite = theorem_suite(space, eps=args.eps, seed=args.seed, samples=args.samples,
                          budget=args.budget, include_truncated=args.truncated)
    text = suite.to_csv() if args.format == "csv" else dump_json(suite.to_dict())
    _emit(text, args.out)
    failed = [c.id for c in suite.checks if not c.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def _constants_row(name, space):
    phi = fundfn.fundamental_function(space).values
    phis = fundfn.dual_fundamental_function(space).values
    k = np.arange(1, space.dim + 1)
    return name, fundfn.democracy_constant(space), float(np.max(phi * phis / k)), phi[-1], phis[-1]


def cmd_renorm(args) -> int:
    space = load_space(args.space, args.dim)
    c = args.construction
    if c != "thm21" and args.eps is None:
        raise UsageError(f"{c} needs --eps")
    if c == "thm21":
        out = renorm_thm21(space)
    elif c == "thm23":
        out = renorm_thm23(space, args.eps)
    elif c == "thm42":
        out = renorm_thm42(space, args.eps)
    else:
        out, _ = renorm_thm43(space, args.eps, allow_degenerate=args.allow_degenerate)
    _emit(dump_json(space_to_dict(out)), args.out)
    rows = [_constants_row("before", space), _constants_row("after", out)]
    sys.stderr.write(_table_csv(["", "democracy", "bidemocracy", "phi(dim)", "phi*(dim)"], rows))
    return 0


def _phi_from_args(args, need_cap=True):
    if args.samples:
        try:
            d = json.loads(Path(args.samples).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read samples {args.samples}: {exc}") from exc
        if isinstance(d, list):
            return fundfn.Grid(np.array([float(v) for v in d]), "ratio")
        return fundfn.from_dict(d)
    if args.formula:
        params = {"alpha": args.alpha} if args.alpha is not None else {}
        return fundfn.ClosedForm(args.formula, params, args.cap)
    raise UsageError("give --formula or --samples")


def _ms(args):
    try:
        return [int(v) for v in str(args.m).split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --m {args.m!r}") from exc


def cmd_fundfn(args) -> int:
    fmt = args.format or "csv"
    op = args.op
    if op == "alternating":
        if not args.breakpoints:
            raise UsageError("alternating needs --breakpoints")
        phi = fundfn.make_alternating_fundfn([int(v) for v in args.breakpoints.split(",")], args.cap)
        x = np.arange(1, phi.cap + 1, dtype=float)
        rows = zip(x.astype(int).tolist(), phi(x).tolist(), phi.lam(x).tolist())
        _emit(_table(["x", "phi", "lambda"], list(rows), fmt), args.out)
        return 0
    phi = _phi_from_args(args)
    cap = args.cap or getattr(phi, "cap", None)
    if not cap:
        raise UsageError("give --cap")
    if op == "delta":
        prof = fundfn.delta_profile(phi, _ms(args), cap)
        rows = [(m, v, *prof.windows[m]) for m, v in prof.values.items()]
        _emit(_table(["m", "delta", "n_lo", "n_hi"], rows, fmt), args.out)
    elif op == "envelope":
        psi = fundfn.concave_envelope(phi, cap)
        x = np.arange(1, cap + 1, dtype=float)
        rows = zip(x.astype(int).tolist(), phi(x).tolist(), psi(x).tolist(), psi.lam(x).tolist())
        _emit(_table(["x", "phi", "psi", "lambda_psi"], list(rows), fmt), args.out)
    elif op == "lemma31":
        m = _ms(args)[0]
        psi = fundfn.lemma31_construct(phi, m, args.eps, cap=cap)
        checks = psi.check(cap)
        x = np.arange(1, cap + 1, dtype=float)
        if fmt == "json":
            text = dump_json({"steps": [{"M": s.M, "n0": s.n0, "delta": s.delta} for s in psi.chain],
                              "checks": {k: v for k, v in checks.items() if k != "segments"},
                              "table": [{"x": int(a), "phi": b, "psi": c}
                                        for a, b, c in zip(x, phi(x).tolist(), psi(x).tolist())]})
        else:
            text = _table_csv(["x", "phi", "psi", "lambda_psi"],
                              zip(x.astype(int).tolist(), phi(x).tolist(), psi(x).tolist(), psi.lam(x).tolist()))
        _emit(text, args.out)
    else:  # urp
        r = fundfn.urp_check(phi, cap)
        w = fundfn.weak_urp_constant(phi, cap)
        _emit(_table(["urp_r", "weak_urp_constant"], [("" if r is None else r, w)], fmt), args.out)
    return 0


_COMMANDS = {"analyze": cmd_analyze, "renorm": cmd_renorm, "fundfn": cmd_fundfn}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    saved = dataclasses.replace(settings)
    try:
        if args.tolerance <= 0 or min(args.cap_enum, args.cap_dp, args.cap_hull) <= 0:
            raise UsageError("tolerance and caps must be positive")
        settings.tol = args.tolerance
        settings.enum_cap, settings.dp_cap, settings.hull_cap = args.cap_enum, args.cap_dp, args.cap_hull
        if getattr(args, "eps", None) is not None and args.eps <= 0:
            raise UsageError("--eps must be positive")
        return _COMMANDS[args.command](args)
    except (PipelineInfeasible, PreconditionFailed, fundfn.ConstructionInfeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        for f in dataclasses.fields(settings):
            setattr(settings, f.name, getattr(saved, f.name))


if __name__ == "__main__":
    sys.exit(main())
