"""Command-line interface: ``stiefeldr <command> [options]``.

Exit codes
----------
0 success, 2 parse error (bad flags, unreadable CSV or config),
3 validation error (data or parameter constraints), 4 solver failure,
5 output could not be written.
"""

import argparse
import configparser
import os
import sys

import numpy as np

from .benchmark import PROBLEMS, pca_problem, run_benchmark
from .exceptions import DataValidationError, ParseError, StiefelError
from .io import emit_results, fmt, ingest_csv, read_matrix, write_csv
from .manifold import DISTANCE_METHODS, distance, gram_schmidt
from .regression import REGRESSION_METHODS, RegressionDR
from .simulate import gen_regression_sim, gen_survival_sim
from .solver import minimize_stiefel
from .survival import SurvivalDR

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_IO = 5

THREADS_ENV = "STIEFELDR_NUM_THREADS"

# built-in defaults, lowest precedence
DEFAULTS = {
    "ndr": 2,
    "method": None,
    "bw": None,
    "maxitr": 500,
    "ftol": 1e-6,
    "gtol": 1e-6,
    "btol": 1e-6,
    "epsilon": 1e-6,
    "threads": 1,
    "seed": 0,
    "n": None,
    "p": None,
    "iters": 250,
    "repeats": 1,
    "problem": "brockett",
}
CONVERTERS = {
    "ndr": int, "maxitr": int, "threads": int, "seed": int, "n": int, "p": int,
    "iters": int, "repeats": int, "bw": float, "ftol": float, "gtol": float,
    "btol": float, "epsilon": float, "method": str, "problem": str,
}


class UsageError(Exception):
    """Bad command-line usage detected after argparse (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment.  Keys use flag names."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_string("[settings]\n" + fh.read(), source=str(path))
    except OSError as exc:
        raise ParseError(path, exc.strerror or str(exc)) from None
    except configparser.Error as exc:
        raise ParseError(path, str(exc).splitlines()[0]) from None
    out = {}
    for key, raw in parser["settings"].items():
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise ParseError(path, f"unknown setting {key!r}")
        try:
            out[key] = CONVERTERS[key](raw)
        except ValueError:
            raise ParseError(path, f"bad value {raw!r} for {key!r}") from None
    return out


def resolve(args, keys):
    """Fill ``keys`` on ``args``: flag, then config file, then environment, then default."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key)
        if value is None and key == "threads" and os.environ.get(THREADS_ENV):
            raw = os.environ[THREADS_ENV]
            try:
                value = int(raw)
            except ValueError:
                raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if value is None:
            value = DEFAULTS[key]
        setattr(args, key, value)
    if getattr(args, "threads", 1) < 1:
        raise DataValidationError("threads must be at least 1")
    return args


def _control_flags(sp):
    sp.add_argument("--ndr", type=int, help="structural dimension (default 2)")
    sp.add_argument("--bw", type=float, help="kernel bandwidth (default: Silverman's rule)")
    sp.add_argument("--maxitr", type=int, help="iteration limit (default 500)")
    sp.add_argument("--ftol", type=float)
    sp.add_argument("--gtol", type=float)
    sp.add_argument("--btol", type=float)
    sp.add_argument("--epsilon", type=float, help="finite-difference step")
    sp.add_argument("--threads", type=int, help=f"gradient workers (default ${THREADS_ENV} or 1)")
    sp.add_argument("--config", help="flat key = value settings file")
    sp.add_argument("--out", required=True, help="output directory")


CONTROL_KEYS = ("ndr", "bw", "maxitr", "ftol", "gtol", "btol", "epsilon", "threads")


def build_parser():
    parser = _Parser(prog="stiefeldr", description="Orthogonality-constrained dimension reduction.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("fit-surv", help="fit a censored survival model")
    sp.add_argument("--data", required=True)
    sp.add_argument("--time", required=True, help="observed time column")
    sp.add_argument("--censor", required=True, help="failure indicator column (1 = failure)")
    _control_flags(sp)

    sp = sub.add_parser("fit-reg", help="fit a continuous-outcome model")
    sp.add_argument("--data", required=True)
    sp.add_argument("--outcome", required=True)
    sp.add_argument("--method", choices=REGRESSION_METHODS)
    _control_flags(sp)

    sp = sub.add_parser("distance", help="distance between two column spaces")
    sp.add_argument("--b1", required=True)
    sp.add_argument("--b2", required=True)
    sp.add_argument("--method", default="dist", choices=DISTANCE_METHODS)
    sp.add_argument("--x", help="design matrix CSV (canonical method)")

    sp = sub.add_parser("benchmark", help="fixed-budget Brockett timing runs")
    sp.add_argument("--problem", choices=PROBLEMS)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--repeats", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("simulate", help="write a simulated dataset")
    sp.add_argument("--design", required=True, choices=("surv", "reg"))
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.add_argument("--truth", help="optional CSV for the true directions")

    sp = sub.add_parser("optim-demo", help="leading principal direction by the manifold solver")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--maxitr", type=int)
    sp.add_argument("--config")
    sp.add_argument("--out", help="output directory (optional)")
    return parser


def _fit_metadata(est, args, extra):
    meta = {
        "ndr": int(est.ndr),
        "bw": est.bw_,
        "n_threads": int(args.threads),
        "center": est.center_,
        "scale": est.scale_,
    }
    meta.update(extra)
    return meta


def cmd_fit_surv(args, out):
    resolve(args, CONTROL_KEYS)
    data = ingest_csv(args.data, args.time, censor=args.censor)
    est = SurvivalDR(
        ndr=args.ndr, bw=args.bw, maxitr=args.maxitr, ftol=args.ftol, gtol=args.gtol,
        btol=args.btol, epsilon=args.epsilon, n_threads=args.threads,
    ).fit(data.X, data.y, data.censor)
    emit_results(
        args.out, est.result_, data.feature_names, est.transform(data.X),
        {args.time: data.y, args.censor: data.censor},
        _fit_metadata(est, args, {"model": "survival", "method": "dm",
                                  "slice_fraction": est.slice_fraction_}),
    )
    out.write(f"fval {fmt(est.result_.fval)} iterations {est.n_iter_} reason {est.result_.reason}\n")


def cmd_fit_reg(args, out):
    resolve(args, CONTROL_KEYS + ("method",))
    if args.method is None:
        args.method = "sir"
    if args.method not in REGRESSION_METHODS:
        raise UsageError(f"method must be one of {', '.join(REGRESSION_METHODS)}")
    data = ingest_csv(args.data, args.outcome)
    est = RegressionDR(
        ndr=args.ndr, method=args.method, bw=args.bw, maxitr=args.maxitr, ftol=args.ftol,
        gtol=args.gtol, btol=args.btol, epsilon=args.epsilon, n_threads=args.threads,
    ).fit(data.X, data.y)
    emit_results(
        args.out, est.result_, data.feature_names, est.transform(data.X), {args.outcome: data.y},
        _fit_metadata(est, args, {"model": "regression", "method": args.method}),
    )
    out.write(f"fval {fmt(est.result_.fval)} iterations {est.n_iter_} reason {est.result_.reason}\n")


def cmd_distance(args, out):
    b1, _ = read_matrix(args.b1)
    b2, _ = read_matrix(args.b2)
    x = read_matrix(args.x)[0] if args.x else None
    out.write(fmt(distance(b1, b2, args.method, x)) + "\n")


def cmd_benchmark(args, out):
    resolve(args, ("problem", "n", "p", "iters", "repeats", "seed"))
    n = 150 if args.n is None else args.n
    p = 5 if args.p is None else args.p
    results = run_benchmark(args.problem, n, p, args.iters, args.repeats, args.seed)
    os.makedirs(args.out, exist_ok=True)
    rows = [[str(r.repeat), str(k), v] for r in results for k, v in enumerate(r.trace)]
    write_csv(os.path.join(args.out, "trace.csv"), ["repeat", "iteration", "fval"], rows)
    write_csv(
        os.path.join(args.out, "summary.csv"),
        ["repeat", "n", "p", "iterations", "fval", "optimum", "relative_gap"],
        [[str(r.repeat), str(r.n), str(r.p), str(len(r.trace) - 1), r.fval, r.optimum, r.relative_gap]
         for r in results],
    )
    # wall-clock times differ run to run, so they live in their own file
    write_csv(os.path.join(args.out, "timing.csv"), ["repeat", "seconds"],
              [[str(r.repeat), r.elapsed] for r in results])
    for r in results:
        out.write(f"repeat {r.repeat} fval {fmt(r.fval)} gap {fmt(r.relative_gap)} seconds {fmt(r.elapsed)}\n")


def cmd_simulate(args, out):
    resolve(args, ("n", "p", "seed"))
    if args.design == "surv":
        n = 350 if args.n is None else args.n
        p = 6 if args.p is None else args.p
        if p < 6:
            raise DataValidationError("the survival design needs p >= 6")
        sim = gen_survival_sim(n, p, args.seed)
        header = [f"x{j + 1}" for j in range(p)] + ["time", "censor"]
        table = np.column_stack([sim.X, sim.Y, sim.delta])
        truth = sim.fail_edr
    else:
        n = 100 if args.n is None else args.n
        p = 4 if args.p is None else args.p
        sim = gen_regression_sim(n, p, args.seed)
        header = [f"x{j + 1}" for j in range(p)] + ["y"]
        table = np.column_stack([sim.X, sim.y])
        truth = sim.true_B
    write_csv(args.out, header, table.tolist())
    if args.truth:
        write_csv(args.truth, [f"dir{k + 1}" for k in range(truth.shape[1])], truth.tolist())
    out.write(f"wrote {n} rows to {args.out}\n")


def cmd_optim_demo(args, out):
    resolve(args, ("n", "p", "seed", "maxitr"))
    n = 400 if args.n is None else args.n
    p = 100 if args.p is None else args.p
    prob = pca_problem(n, p, args.seed)
    rng = np.random.default_rng([args.seed, 1])
    w0 = gram_schmidt(rng.standard_normal((p, 1)))
    res = minimize_stiefel(prob.spec, w0, {"maxitr": args.maxitr})
    dist = distance(res.B, prob.leading)
    if args.out:
        emit_results(args.out, res, metadata={"distance_to_svd": dist})
    out.write(f"fval {fmt(res.fval)} iterations {res.iterations} distance_to_svd {fmt(dist)}\n")


COMMANDS = {
    "fit-surv": cmd_fit_surv,
    "fit-reg": cmd_fit_reg,
    "distance": cmd_distance,
    "benchmark": cmd_benchmark,
    "simulate": cmd_simulate,
    "optim-demo": cmd_optim_demo,
}


def main(argv=None, out=None):
    """Run the CLI and return the exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except (UsageError, ParseError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PARSE
    except (ValueError, NotImplementedError) as exc:
        # data, shape and parameter constraints, including DataValidationError
        err.write(f"invalid input: {exc}\n")
        return EXIT_VALIDATION
    except StiefelError as exc:
        err.write(f"solver failed: {exc}\n")
        return EXIT_SOLVER
    except OSError as exc:
        err.write(f"i/o error: {exc}\n")
        return EXIT_IO
    except SystemExit as exc:
        # --help and friends
        return int(exc.code or 0)
    return EXIT_OK


def entry():
    sys.exit(main())
