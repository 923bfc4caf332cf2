"""Command-line entry point: ``python -m pcptensor <command> ...``.

Commands write files into an output directory, always including
``manifest.json``. Exit codes: 0 ok, 1 bad input, 2 no convergence,
3 resource cap, 64 usage.
"""

import argparse
import os
import sys
import time
import warnings

import numpy as np

from . import harness, io
from .em import FitConfig, FitError, fit, random_init
from .fisher import MAX_ORDER, FimTooLarge, fim, numerical_rank

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_CAP, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("grid axis is empty")
    if min(vals) < 1:
        raise argparse.ArgumentTypeError(f"grid values must be positive, got {text!r}")
    return tuple(vals)


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("grid axis is empty")
    if min(vals) <= 0:
        raise argparse.ArgumentTypeError(f"grid values must be positive, got {text!r}")
    return tuple(vals)


def build_parser():
    ap = _Parser(prog="pcptensor", description="Poisson CP fitting and Fisher information tools")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a rank-R model to a count tensor")
    f.add_argument("tensor")
    f.add_argument("--rank", type=int, required=True)
    f.add_argument("--schedule", choices=("ecm", "mcecm"), default="mcecm")
    f.add_argument("--inner", type=int, default=10)
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--max-iter", type=int, default=500)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", default="fit_out")

    i = sub.add_parser("fim", help="Fisher information and rank verdict for a model")
    i.add_argument("model")
    i.add_argument("tensor", nargs="?")
    kind = i.add_mutually_exclusive_group()
    kind.add_argument("--observed", action="store_true")
    kind.add_argument("--expected", action="store_true")
    i.add_argument("--rank-verdict", action="store_true", help="also write verdict.json")
    i.add_argument("--write-matrix", action="store_true", help="also write fim.json")
    i.add_argument("--max-order", type=int, default=MAX_ORDER)
    i.add_argument("--out", default="fim_out")

    m = sub.add_parser("mc-validate", help="Monte Carlo information error table")
    m.add_argument("--N", type=_int_list, default=(10,))
    m.add_argument("--S", type=_float_list, default=(1.0,))
    m.add_argument("--R", type=_int_list, default=(1, 2))
    m.add_argument("--P", type=_int_list, default=(3,))
    m.add_argument("--K", type=_int_list, default=(4, 16, 64, 256, 1024))
    m.add_argument("--reps", type=int, default=100)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--max-order", type=int, default=MAX_ORDER)
    m.add_argument("--out-dir", default="mc_out")

    r = sub.add_parser("rank-sweep", help="numerical vs conjectured rank table")
    r.add_argument("--N", type=_int_list, default=(10, 25))
    r.add_argument("--P", type=_int_list, default=(2, 3))
    r.add_argument("--R", type=_int_list, default=(1, 2, 3, 4))
    r.add_argument("--S", type=_float_list, default=(4.0,))
    r.add_argument("--reps", type=int, default=10)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-order", type=int, default=MAX_ORDER)
    r.add_argument("--out-dir", default="rank_out")
    return ap


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
    return path


def cmd_fit(args, out):
    if args.rank < 1:
        raise UsageError("--rank must be at least 1")
    if args.inner < 1 or args.max_iter < 0 or not args.tol > 0:
        raise UsageError("--inner >= 1, --max-iter >= 0 and --tol > 0 are required")
    x = io.read_tensor(args.tensor)
    cfg = FitConfig(args.schedule, args.inner, args.max_iter, args.tol, args.seed)
    init = random_init(x, args.rank, args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        try:
            model, trace = fit(x, init, cfg)
        except FitError as exc:
            _write(os.path.join(out, "trace.csv"), exc.trace.to_csv())
            print(f"fit failed: {exc}", file=sys.stderr)
            return EXIT_NOCONV, [os.path.join(out, "trace.csv")]
    paths = [os.path.join(out, "model.json"), os.path.join(out, "trace.csv")]
    io.write_model(paths[0], model)
    _write(paths[1], trace.to_csv())
    if not trace.converged:
        print(f"no convergence after {trace.n_iter} iterations", file=sys.stderr)
        return EXIT_NOCONV, paths
    return EXIT_OK, paths


def cmd_fim(args, out):
    if args.observed and not args.tensor:
        raise UsageError("--observed needs a tensor file")
    if args.expected and args.tensor:
        raise UsageError("--expected does not take a tensor file")
    model = io.read_model(args.model)
    x = io.read_tensor(args.tensor) if args.tensor else None
    info = fim(model, x, max_order=args.max_order)
    verdict = numerical_rank(info)
    paths = [_write(os.path.join(out, "eigenvalues.csv"), verdict.eigenvalues_csv())]
    if args.rank_verdict:
        paths.append(_write(os.path.join(out, "verdict.json"), verdict.to_json() + "\n"))
    if args.write_matrix:
        paths.append(_write(os.path.join(out, "fim.json"), info.to_json() + "\n"))
    print(f"{info.kind} information: order {info.matrix.shape[0]}, numerical rank "
          f"{verdict.numerical_rank}, conjectured {verdict.conjectured_rank}")
    return EXIT_OK, paths


def cmd_mc_validate(args, out):
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if min(args.K) < 2:
        raise UsageError("every K must be at least 2")
    grid = harness.McGrid(N=args.N, S=args.S, R=args.R, P=args.P, K=args.K)
    rows = harness.run_mc_validation(grid, args.reps, args.seed, args.max_order)
    return EXIT_OK, [_write(os.path.join(out, "mc_fim.csv"), harness.rows_to_csv(rows))]


def cmd_rank_sweep(args, out):
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if min(args.P) < 2:
        raise UsageError("--P values must be at least 2")
    grid = harness.RankGrid(N=args.N, P=args.P, R=args.R, S=args.S)
    rows = harness.run_rank_sweep(grid, args.reps, args.seed, args.max_order)
    return EXIT_OK, [_write(os.path.join(out, "rank.csv"), harness.rows_to_csv(rows))]


_COMMANDS = {
    "fit": (cmd_fit, "out"),
    "fim": (cmd_fim, "out"),
    "mc-validate": (cmd_mc_validate, "out_dir"),
    "rank-sweep": (cmd_rank_sweep, "out_dir"),
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    func, out_attr = _COMMANDS[args.command]
    out = getattr(args, out_attr)
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items()}
    inputs = [getattr(args, k) for k in ("tensor", "model") if getattr(args, k, None)]
    t0 = time.perf_counter()
    paths = []
    try:
        os.makedirs(out, exist_ok=True)
        status, paths = func(args, out)
    except UsageError as exc:
        print(f"pcptensor {args.command}: error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except FimTooLarge as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        status = EXIT_CAP
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        status = EXIT_INPUT
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = EXIT_INPUT
    if os.path.isdir(out):
        io.write_manifest(
            os.path.join(out, "manifest.json"), args.command, config,
            getattr(args, "seed", None), inputs, paths, time.perf_counter() - t0, status,
        )
    return status


if __name__ == "__main__":
    sys.exit(main())
