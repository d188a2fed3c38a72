"""Command line interface: ``python -m difftomo <command> ...``.

Exit codes: 0 success, 2 invalid input or recipe, 3 numerical failure,
4 file or format errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import nullcontext

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _threads(n):
    """Context capping BLAS/OpenMP worker threads (no-op without threadpoolctl)."""
    if not n:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        logging.getLogger(__name__).warning("threadpoolctl not installed; --threads ignored")
        return nullcontext()
    return threadpool_limits(limits=n)


def _print(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True, default=str))


def cmd_forward(args):
    from .pipeline import cmd_forward
    from .recipes import load_recipe

    manifest = cmd_forward(load_recipe(args.recipe), args.out)
    _print({"diagnostics": manifest["diagnostics"], "files": manifest["files"]})


def cmd_reconstruct(args):
    from .pipeline import cmd_reconstruct
    from .recipes import load_recipe

    recipe = load_recipe(args.recipe)
    if args.method:
        recipe.reconstruction["method"] = args.method
    if args.iters:
        recipe.reconstruction["cg_iters"] = args.iters
        recipe.fwi["n_iter"] = args.iters
    recipe.validate()
    report = cmd_reconstruct(recipe, args.data, args.out, timings=not args.no_timings)
    _print({k: report[k] for k in ("recipe", "method", "psnr") if k in report})


def cmd_render(args):
    from .pipeline import cmd_render

    _print(cmd_render(args.field, args.out, window=args.window, vmin=args.vmin, vmax=args.vmax,
                      part=args.part))


def cmd_compare(args):
    from .pipeline import cmd_compare_forward
    from .recipes import load_recipe

    recipe = load_recipe(args.recipe)
    if args.models:
        recipe.compare["models"] = args.models.split(",")
        recipe.validate()
    _print(cmd_compare_forward(recipe, args.out))


def cmd_verify(args):
    if args.pytest:
        import pytest

        code = pytest.main(["-q", args.pytest])
        return EXIT_OK if code == 0 else EXIT_NUMERICAL
    from .verify import run_verify

    report = run_verify(args.out, args.checks.split(",") if args.checks else None)
    for name, res in report["checks"].items():
        print(f"{'PASS' if res['passed'] else 'FAIL'} {name}")
    return EXIT_OK if report["passed"] else EXIT_NUMERICAL


def cmd_recipes(args):
    from .recipes import builtin_recipes, load_recipe

    if args.show:
        _print(load_recipe(args.show).to_dict())
    else:
        print("\n".join(builtin_recipes()))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="difftomo", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("forward", help="simulate datasets for a recipe")
    s.add_argument("recipe", help="recipe JSON file or built-in recipe name")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("reconstruct", help="reconstruct from a dataset directory")
    s.add_argument("recipe")
    s.add_argument("--data", required=True, help="directory written by 'forward'")
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=("born", "rytov", "fwi"))
    s.add_argument("--iters", type=int, help="CG iterations (born/rytov) or NLCG iterations per block (fwi)")
    s.add_argument("--no-timings", action="store_true", help="omit wall times from the report")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("render", help="write a field file as an 8-bit PGM image")
    s.add_argument("field")
    s.add_argument("--out", required=True)
    s.add_argument("--window", type=float, help="side of the centered square to show")
    s.add_argument("--vmin", type=float)
    s.add_argument("--vmax", type=float)
    s.add_argument("--part", default="real", choices=("real", "imag", "abs"))
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("compare-forward", help="receiver traces of several forward models as CSV")
    s.add_argument("recipe")
    s.add_argument("--out", required=True, help="CSV path (a JSON summary is written next to it)")
    s.add_argument("--models", help="comma separated list overriding the recipe")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("verify", help="run the deterministic self-check")
    s.add_argument("--out", default="verify_out")
    s.add_argument("--checks", help="comma separated subset of checks")
    s.add_argument("--pytest", metavar="PATH",
                   help="instead run the pytest acceptance suite at PATH")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("recipes", help="list built-in recipes or print one")
    s.add_argument("--show", metavar="NAME")
    s.set_defaults(func=cmd_recipes)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    from numpy.linalg import LinAlgError

    from .io import FormatError

    try:
        with _threads(args.threads):
            code = args.func(args)
        return EXIT_OK if code is None else code
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LinAlgError, RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
