"""Command-line entry point: ``lieloc <command> <example> [options]``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .conventions import conventions_hash

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--xi", type=_floats, help="coefficients of xi in the generators of g, comma separated")
    common.add_argument("--tol-rel", type=float, default=1e-5, help="relative tolerance for two-sided comparisons")
    common.add_argument("--tol-abs", type=float, default=None, help="absolute tolerance (residuals / near-zero sides)")
    common.add_argument("--quad-order", type=int, default=None, help="Gauss-Legendre points per axis")
    common.add_argument("--report", help="write a JSON report to this path ('-' for stdout)")
    common.add_argument("--seed", type=int, default=0, help="seed for random-cochain property runs")

    p = argparse.ArgumentParser(prog="lieloc", description="Checks for Lie algebroid localization examples.")
    p.add_argument("--version", action="version", version=f"lieloc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-examples", parents=[common], help="list the built-in examples")
    for name, text in (
        ("check-axioms", "anchor, Jacobi, action and delta^2 checks"),
        ("complex-checks", "twisted complex, chain map, Stokes and equivariant identity"),
        ("connection-checks", "Bianchi, moment map, Chern-Weil and fixed-point identities"),
        ("localize", "both sides of the localization formula"),
        ("bott", "both sides of the Bott-type formula"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("example", help="built-in name or path to a spec file")
        if name == "localize":
            sp.add_argument("--cocycle", help="name of a declared cocycle (default: the example's default)")
        if name == "bott":
            sp.add_argument("--phi", help="polynomial in x1.. (x_i stands for the class sigma_2i), e.g. 'x1'")
            sp.add_argument("--cocycle", help="declared cocycle to use as Xi")
        if name in ("check-axioms", "complex-checks"):
            sp.add_argument("--samples", type=int, default=None, help="random cochains per degree")
    return p


def _digest(spec, args: argparse.Namespace) -> str:
    keep = {k: v for k, v in sorted(vars(args).items()) if k not in ("report",)}
    blob = json.dumps({"spec": spec.digest if spec is not None else None, "args": keep}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def _summary(command: str, result: Dict) -> List[str]:
    lines = []
    if "checks" in result:
        for name, c in result["checks"].items():
            lines.append(f"  {'ok  ' if c['pass'] else 'FAIL'} {name:32s} {c['value']:.3e} (tol {c['tol']:.0e})")
    if "lhs" in result:
        lines.append(f"  lhs = {result['lhs']:.12g}")
        lines.append(f"  rhs = {result['rhs']:.12g}")
        lines.append(f"  |lhs - rhs| = {result['abs_diff']:.3e}, relative {result['rel_diff']:.3e}")
        for t in result.get("terms", []):
            label = t.get("label") or t.get("chart")
            lines.append(f"    {label:6s} contribution {t['contribution']:+.12g}")
    return lines


def run_command(argv: Optional[List[str]] = None, out=None) -> int:
    """Parse ``argv``, run the command, print a summary and optionally write
    the JSON report.  Returns the exit status."""
    out = out or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    from .specfile import SpecError, builtin_names, load_builtin, load_example

    started = time.perf_counter()
    spec = None
    try:
        if args.command == "list-examples":
            names = builtin_names()
            result = {"examples": {n: load_builtin(n).description for n in names}, "pass": True}
            for n in names:
                print(f"{n:24s} {result['examples'][n]}", file=out)
        else:
            spec = load_example(args.example)
            result = _dispatch(args, spec)
    except (SpecError, KeyError, ValueError, UsageError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.perf_counter() - started

    status = "PASS" if result["pass"] else "FAIL"
    if args.command != "list-examples":
        print(f"{args.command} {args.example}: {status}", file=out)
        for line in _summary(args.command, result):
            print(line, file=out)
    report = {
        "command": args.command,
        "example": getattr(args, "example", None),
        "inputs_digest": _digest(spec, args),
        "result": result,
        "pass": bool(result["pass"]),
        "tool_version": __version__,
        "conventions_hash": conventions_hash(),
        "timings": {"seconds": round(elapsed, 3)},
    }
    if args.report:
        text = json.dumps(report, sort_keys=True, indent=2, default=_json_default)
        if args.report == "-":
            print(text, file=out)
        else:
            with open(args.report, "w") as fh:
                fh.write(text + "\n")
    return EXIT_OK if result["pass"] else EXIT_FAIL


def _dispatch(args, spec) -> Dict:
    from . import checks

    tol_abs = args.tol_abs
    if args.command == "check-axioms":
        n = args.samples if args.samples is not None else 50
        return checks.axiom_suite(spec, n_cochains=n, seed=args.seed, tol=tol_abs or 1e-9)
    if args.command == "complex-checks":
        n = args.samples if args.samples is not None else 20
        return checks.complex_suite(
            spec, n_cochains=n, n_stokes=min(n, 20), order=args.quad_order or 48, seed=args.seed, tol=tol_abs or 1e-9, xi=args.xi
        )
    if args.command == "connection-checks":
        if not spec.connection:
            raise UsageError(f"example {spec.name!r} declares no connection")
        return checks.connection_suite(spec, xi=args.xi, seed=args.seed, tol=tol_abs or 1e-9)
    if spec.action is None:
        raise UsageError(f"example {spec.name!r} has no action")
    if args.xi is not None and len(args.xi) != spec.action.dim:
        raise UsageError(f"--xi needs {spec.action.dim} values for {spec.name!r}")
    if args.command == "localize":
        return checks.localization_run(
            spec, xi=args.xi, cocycle=args.cocycle, order=args.quad_order, rtol=args.tol_rel, atol=tol_abs or 1e-7
        )
    if args.command == "bott":
        if not spec.connection:
            raise UsageError(f"example {spec.name!r} declares no connection")
        return checks.bott_run(
            spec, phi=args.phi, xi=args.xi, order=args.quad_order, rtol=args.tol_rel, atol=tol_abs or 1e-7, cocycle=args.cocycle
        )
    raise UsageError(f"unknown command {args.command}")


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
