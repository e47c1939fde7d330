"""Command-line interface: estimate, exact, gen, bench.

Every successful ``estimate``, ``exact`` and ``gen`` run prints exactly one
JSON object on stdout; ``bench`` prints CSV. Diagnostics go to stderr.
Exit codes: 0 success, 2 parameter errors, 3 input errors. Identical
configurations produce identical stdout bytes (bench timing is opt-in via
``--timing`` because wall clocks are not reproducible).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fixtures
from .core import embed_stream, materialize, schatten_norm_exact, stream_from_dense
from .errors import (
    InvalidParameterError,
    KindMismatchError,
    RequiresPSDError,
    SchattenError,
    UnsupportedPError,
)
from .multipass import new_multipass, run_all_passes
from .onepass import estimate_general, new_onepass
from .roworder import estimate_4z, run_roworder
from .streamio import read_stream, write_stream

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_INPUT = 3

_KIND_ALIASES = {
    "gaussian": "gaussian",
    "zd": "zd_sparse",
    "identity": "debug_identity",
}

_PARAMETER_ERRORS = (InvalidParameterError, RequiresPSDError,
                     UnsupportedPError, KindMismatchError)

_DEFAULTS_EPILOG = (
    "defaults: onepass t = ceil(2 * n^(1-2/p)), multipass t = "
    "ceil(2 * n^(1-1/(p-1))), repetitions r = ceil(6 / eps^2); row-order "
    "T = ceil(n^(1-1/(k+1)) / eps^2) with count-sketch width "
    "ceil(8 * T * log2 n) and depth ceil(5 * log2 n). SCHATTEN_THREADS "
    "caps bench parallelism (0 = auto)."
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schatten",
        description="Streaming Schatten p-norm estimation",
        epilog=_DEFAULTS_EPILOG,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_estimate_flags(sp):
        sp.add_argument("--algo", required=True,
                        choices=["onepass", "multipass", "roworder", "roworder4z"])
        sp.add_argument("--p", required=True, type=int, help="norm power")
        sp.add_argument("--eps", required=True, type=float,
                        help="target relative accuracy in (0, 1/2)")
        sp.add_argument("--kind", default="gaussian",
                        choices=["gaussian", "zd", "identity"],
                        help="sketch generator kind (onepass/multipass/roworder4z)")
        sp.add_argument("--seed", default=0, type=int, help="64-bit root seed")
        sp.add_argument("--t", type=int, default=None,
                        help="override sketch rows")
        sp.add_argument("--reps", type=int, default=None,
                        help="override repetition count")
        sp.add_argument("--agg", default="mean", choices=["mean", "mom"],
                        help="aggregate repetitions by mean or median-of-means")
        sp.add_argument("--assume-psd", action="store_true",
                        help="caller asserts the input matrix is PSD")
        sp.add_argument("--T", type=int, default=None, dest="big_t",
                        help="override row-order sample budget")
        sp.add_argument("--sparsity", type=int, default=None,
                        help="row-order non-zeros-per-row bound "
                             "(default: inferred from the input)")
        sp.add_argument("--input", required=True, help="stream file (v1)")

    est = sub.add_parser("estimate", help="run a streaming estimator",
                         epilog=_DEFAULTS_EPILOG)
    add_estimate_flags(est)

    ex = sub.add_parser("exact", help="exact norm power via the spectral oracle")
    ex.add_argument("--p", required=True, type=float)
    ex.add_argument("--input", required=True)

    gen = sub.add_parser("gen", help="write a fixture as a stream file")
    gen.add_argument("--kind", required=True,
                     choices=["cycle_laplacian", "cycle_union_incidence",
                              "indicator_rows", "random_psd", "random_sparse",
                              "diagonal"])
    gen.add_argument("--m", type=int, default=None, help="cycle length")
    gen.add_argument("--copies", type=int, default=1)
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--sparsity", type=int, default=2,
                     help="non-zeros per row/column for random_sparse")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--profile", default="uniform",
                     choices=["uniform", "powerlaw", "prescribed"])
    gen.add_argument("--alpha", type=float, default=1.0,
                     help="power-law spectrum exponent")
    gen.add_argument("--eigs", default=None,
                     help="comma-separated spectrum for diagonal/prescribed")
    gen.add_argument("--sets", default=None,
                     help="semicolon-separated comma lists for indicator_rows")
    gen.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="batch of seeds as CSV with summary",
                           epilog=_DEFAULTS_EPILOG)
    add_estimate_flags(bench)
    bench.add_argument("--batch", required=True, type=int,
                       help="number of seeds: seed, seed+1, ...")
    bench.add_argument("--timing", action="store_true",
                       help="append a wall_ms column (not reproducible)")
    return parser


def _estimate_json(args, stream, seed: int) -> dict:
    kind = _KIND_ALIASES[args.kind]
    t = args.t
    if kind == "debug_identity" and t is None:
        t = stream.n if args.algo != "onepass" or args.assume_psd else None
    if args.algo == "onepass":
        if args.assume_psd:
            if stream.n != stream.m:
                raise InvalidParameterError(
                    "--assume-psd needs a square input stream")
            state = new_onepass(stream.n, args.p, args.eps, kind=kind,
                                seed=seed, t=t, r=args.reps, assume_psd=True)
            state.ingest_stream(stream)
            est = state.estimate(args.agg)
        else:
            if args.p % 2 == 1:
                raise RequiresPSDError(
                    "odd p requires --assume-psd (general matrices are "
                    "supported for even p only)")
            if kind == "debug_identity" and t is None:
                t = stream.n + stream.m
            est = estimate_general(stream, args.p, args.eps, kind=kind,
                                   seed=seed, t=t, r=args.reps,
                                   aggregate=args.agg)
        out = {
            "estimate_pth_power": est.value,
            "p": est.p,
            "t": est.extra["t"],
            "reps": est.repetitions,
            "sketch_cells": est.sketch_cells,
            "cells_touched": est.extra["cells_touched"],
            "seed": seed,
        }
        return out
    if args.algo == "multipass":
        if args.assume_psd:
            if stream.n != stream.m:
                raise InvalidParameterError(
                    "--assume-psd needs a square input stream")
            state = new_multipass(stream.n, args.p, args.eps, kind=kind,
                                  seed=seed, t=t, r=args.reps, assume_psd=True)
            run_all_passes(state, stream)
            est = state.estimate(args.agg)
            value = est.value
        else:
            if args.p % 2 == 1:
                raise RequiresPSDError(
                    "odd p requires --assume-psd (general matrices are "
                    "supported for even p only)")
            emb = embed_stream(stream)
            state = new_multipass(emb.n, args.p, args.eps, kind=kind,
                                  seed=seed, t=t, r=args.reps)
            run_all_passes(state, emb)
            est = state.estimate(args.agg)
            value = est.value / 2.0
        return {
            "estimate_pth_power": value,
            "p": est.p,
            "t": est.extra["t"],
            "reps": est.repetitions,
            "sketch_cells": est.sketch_cells,
            "cells_touched": est.extra["cells_touched"],
            "seed": seed,
            "passes": est.extra["passes"],
        }
    if args.algo == "roworder":
        est = run_roworder(stream, args.p, args.eps, seed=seed,
                           s_a=args.sparsity, T=args.big_t)
        return {
            "estimate_pth_power": est.value,
            "p": est.p,
            "reps": est.repetitions,
            "sketch_cells": est.sketch_cells,
            "cells_touched": est.extra["cells_touched"],
            "seed": seed,
            "T": est.extra["T"],
            "K_size": est.extra["K_size"],
            "V_size": est.extra["V_size"],
            "live_cells": est.extra["live_cells"],
        }
    # roworder4z
    est = estimate_4z(stream, args.p, args.eps, kind=kind, seed=seed,
                      t=t, r=args.reps, aggregate=args.agg)
    return {
        "estimate_pth_power": est.value,
        "p": est.p,
        "t": est.extra["t"],
        "reps": est.repetitions,
        "sketch_cells": est.sketch_cells,
        "cells_touched": est.extra["cells_touched"],
        "seed": seed,
        "reduced_power": est.extra["reduced_power"],
        "frobenius_sq_estimate": est.extra["frobenius_sq_estimate"],
    }


def _cmd_estimate(args) -> int:
    stream = read_stream(args.input)
    if args.algo == "roworder" and stream.mode != "roworder":
        raise InvalidParameterError(
            f"--algo roworder needs a roworder-mode input, got {stream.mode}")
    out = _estimate_json(args, stream, args.seed)
    print(json.dumps(out))
    return EXIT_OK


def _cmd_exact(args) -> int:
    if args.p <= 0:
        raise InvalidParameterError("p must be positive")
    stream = read_stream(args.input)
    A = materialize(stream)
    value = schatten_norm_exact(A, args.p)
    print(json.dumps({
        "exact_pth_power": value,
        "p": args.p,
        "n": stream.n,
        "m": stream.m,
    }))
    return EXIT_OK


def _parse_sets(spec: str):
    out = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        out.append([int(tok) for tok in part.split(",") if tok.strip()])
    return out


def _cmd_gen(args) -> int:
    kind = args.kind
    if kind == "cycle_laplacian":
        if args.m is None:
            raise InvalidParameterError("--m (cycle length) is required")
        A, _ = fixtures.cycle_laplacian(args.m, args.copies)
        stream = stream_from_dense(A)
    elif kind == "cycle_union_incidence":
        if args.m is None:
            raise InvalidParameterError("--m (cycle length) is required")
        stream = fixtures.cycle_union_incidence(args.m, args.copies)
    elif kind == "indicator_rows":
        if args.n is None or args.sets is None:
            raise InvalidParameterError("--n and --sets are required")
        stream = fixtures.indicator_rows(_parse_sets(args.sets), args.n)
    elif kind == "random_psd":
        if args.n is None:
            raise InvalidParameterError("--n is required")
        eigs = ([float(tok) for tok in args.eigs.split(",")]
                if args.eigs else None)
        A = fixtures.random_psd(args.n, args.profile, seed=args.seed,
                                alpha=args.alpha, eigenvalues=eigs)
        stream = stream_from_dense(A)
    elif kind == "random_sparse":
        if args.n is None:
            raise InvalidParameterError("--n is required")
        stream = fixtures.random_sparse(args.n, args.sparsity, seed=args.seed)
    else:  # diagonal
        if args.eigs is None:
            raise InvalidParameterError("--eigs is required for diagonal")
        eigs = [float(tok) for tok in args.eigs.split(",")]
        stream = stream_from_dense(np.diag(eigs))
    write_stream(stream, args.out)
    print(json.dumps({
        "written": str(args.out),
        "kind": kind,
        "n": stream.n,
        "m": stream.m,
        "updates": len(stream.rows),
    }))
    return EXIT_OK


def _thread_budget() -> int:
    raw = os.environ.get("SCHATTEN_THREADS", "0")
    try:
        budget = int(raw)
    except ValueError:
        raise InvalidParameterError(
            f"SCHATTEN_THREADS must be an integer, got {raw!r}") from None
    if budget < 0:
        raise InvalidParameterError("SCHATTEN_THREADS must be >= 0")
    return budget if budget > 0 else (os.cpu_count() or 1)


def _cmd_bench(args) -> int:
    if args.batch < 1:
        raise InvalidParameterError("--batch must be >= 1")
    stream = read_stream(args.input)
    exact = schatten_norm_exact(materialize(stream), float(args.p))
    seeds = [args.seed + i for i in range(args.batch)]

    def one(seed: int):
        start = time.perf_counter()
        out = _estimate_json(args, stream, seed)
        wall_ms = 1000.0 * (time.perf_counter() - start)
        return out, wall_ms

    workers = min(_thread_budget(), len(seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(seed) for seed in seeds]

    header = ["seed", "estimate", "exact", "relative_error",
              "sketch_cells", "cells_touched"]
    if args.timing:
        header.append("wall_ms")
    lines = [",".join(header)]
    successes = 0
    estimates = []
    for seed, (out, wall_ms) in zip(seeds, results):
        err = (abs(out["estimate_pth_power"] - exact) / exact
               if exact != 0 else abs(out["estimate_pth_power"]))
        if err <= args.eps:
            successes += 1
        estimates.append(out["estimate_pth_power"])
        row = [str(seed), repr(out["estimate_pth_power"]), repr(exact),
               repr(err), str(out["sketch_cells"]), str(out["cells_touched"])]
        if args.timing:
            row.append(f"{wall_ms:.3f}")
        lines.append(",".join(row))
    # Summary row: estimate column holds the mean estimate, relative_error
    # column holds the fraction of seeds inside (1 +- eps).
    summary = ["summary", repr(float(np.mean(estimates))), repr(exact),
               repr(successes / len(seeds)), "", ""]
    if args.timing:
        summary.append("")
    lines.append(",".join(summary))
    print("\n".join(lines))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "estimate": _cmd_estimate,
        "exact": _cmd_exact,
        "gen": _cmd_gen,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except _PARAMETER_ERRORS as exc:
        print(f"schatten: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except (SchattenError, OSError) as exc:
        print(f"schatten: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
