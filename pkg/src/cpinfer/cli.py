"""Command-line entry point: ``cpinfer detect|test|simulate|estimate-sigma|bench``.

Exit codes: 0 success, 2 bad arguments, 3 bad data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings

import numpy as np

from .binseg import binseg
from .core import DegenerateBoundaryError, InvariantError, TimeSeries, make_spanning_contrast, make_window_contrast
from .harness import SimConfig, simulate, timing_sweep
from .infer_bs import bs_S
from .infer_l0 import l0_S
from .l0 import l0_lambda_for_k, l0_segment
from .pvalue import DegenerateSigmaWarning, TestResult, estimate_sigma, selective_p

EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class DataError(Exception):
    pass


class ArgError(Exception):
    pass


def read_series(path: str) -> np.ndarray:
    """One value per line; a single non-numeric first line is taken as a header."""
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as e:
        raise DataError(str(e)) from e
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DataError(f"{path}: no data")
    try:
        float(lines[0])
    except ValueError:
        lines = lines[1:]
    vals = []
    for i, ln in enumerate(lines, 1):
        try:
            vals.append(float(ln))
        except ValueError:
            raise DataError(f"{path}: line {i} is not a number: {ln!r}") from None
    v = np.asarray(vals)
    if v.size < 2:
        raise DataError(f"{path}: need at least two values")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{path}: values must be finite")
    return v


def _fit(ts: TimeSeries, args):
    if args.method == "binseg":
        if args.k is None:
            raise ArgError("binseg needs --k")
        if not 1 <= args.k <= ts.T - 1:
            raise ArgError(f"--k must lie in [1, {ts.T - 1}]")
        return binseg(ts, args.k), None
    if args.k is not None:
        raise ArgError("l0 takes --lambda or --k-target, not --k")
    if args.lam is not None:
        if not args.lam > 0:
            raise ArgError("--lambda must be positive")
        return l0_segment(ts, args.lam), args.lam
    if args.k_target is None:
        raise ArgError("l0 needs --lambda or --k-target")
    found = l0_lambda_for_k(ts, args.k_target)
    if not found.exact:
        print(f"warning: no lambda gives exactly {args.k_target} changepoints; "
              f"using {found.fit.K}", file=sys.stderr)
    return found.fit, found.lam


def _emit(obj, as_json: bool, text: str):
    print(json.dumps(obj) if as_json else text)


def cmd_detect(args) -> int:
    ts = TimeSeries(read_series(args.input))
    fit, lam = _fit(ts, args)
    out = {"method": args.method, "locations": list(fit.locations), "means": [float(m) for m in fit.means],
           "objective": fit.objective}
    if lam is not None:
        out["lambda"] = lam
    if fit.orders:
        out["orders"] = list(fit.orders)
        out["signs"] = list(fit.signs)
    _emit(out, args.json, " ".join(map(str, fit.locations)))
    return 0


_CONDITION = {
    ("binseg", "step-sign"): "step_sign",
    ("binseg", "locations"): "full",
    ("binseg", "fixed"): "fixed",
    ("l0", "locations"): "full",
    ("l0", "fixed"): "window",
}


def cmd_test(args) -> int:
    key = (args.method, args.condition)
    if key not in _CONDITION:
        raise ArgError(f"--condition {args.condition} is not available for {args.method}")
    if args.method == "l0" and (args.condition == "fixed") != (args.contrast == "window"):
        raise ArgError("l0 pairs --condition fixed with --contrast window, and locations with spanning")
    v = read_series(args.input)
    if args.estimate_sigma:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSigmaWarning)
            sigma = estimate_sigma(v)
        if not sigma > 0:
            raise DataError("estimated sigma is zero")
    else:
        if not args.sigma > 0:
            raise ArgError("--sigma must be positive")
        sigma = args.sigma
    ts = TimeSeries(v, sigma)
    fit, lam = _fit(ts, args)
    if not 1 <= args.j <= fit.K:
        raise ArgError(f"--j must lie in [1, {fit.K}]")
    tau = fit.locations[args.j - 1]
    if args.contrast == "window":
        if args.h is None:
            raise ArgError("--contrast window needs --h")
        nu = make_window_contrast(tau, args.h, ts.T)
    else:
        nu = make_spanning_contrast(fit, args.j, ts.T)
    mode = _CONDITION[key]
    if args.method == "binseg":
        trunc = "auto" if args.trunc is None else (None if args.trunc == "none" else float(args.trunc))
        S = bs_S(ts, fit.K, args.j, nu, mode, trunc=trunc, fit=fit)
    else:
        S = l0_S(ts, lam, args.j, nu, mode, fit=fit)
    c = nu.dot(ts)
    scale = sigma * math.sqrt(nu.norm_sq)
    cond = {"step_sign": "step_sign", "full": "locations"}.get(mode, "fixed")
    try:
        p = selective_p(S, c, scale)
    except ValueError as e:
        raise ArithmeticError(str(e)) from e
    res = TestResult(tau, args.j, c, nu.norm_sq, scale, S, p, "selective", cond)
    _emit(res.to_json(), args.json, f"tau={tau} p={res.p:.6g}")
    return 0


def cmd_simulate(args) -> int:
    cfg = SimConfig(T=args.t, K=args.k, delta=args.delta, sigma=args.sigma, reps=args.reps, seed=args.seed,
                    approach=args.approach, h=args.h, alpha=args.alpha, m=args.m,
                    k=args.bs_steps, lam=args.lam, estimate_sigma=args.estimate_sigma)
    simulate(cfg, args.out)
    return 0


def cmd_estimate_sigma(args) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSigmaWarning)
        s = estimate_sigma(read_series(args.input))
    if not s > 0:
        raise DataError("estimated sigma is zero: more than half the first differences coincide")
    print(repr(s))
    return 0


def cmd_bench(args) -> int:
    grid = [int(g) for g in args.grid.split(",")] if args.grid else None
    rows = timing_sweep(args.mode, grid, runs=args.runs, seed=args.seed)
    fields = ["param", "approach", "seconds"] if args.mode == "approaches" else ["param", "seconds"]
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ARGS)


def _detector_args(p):
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("binseg", "l0"), required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--k-target", type=int)
    p.add_argument("--json", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cpinfer", description="Changepoint detection with selective p-values.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="estimate changepoints")
    _detector_args(p)
    p.set_defaults(run=cmd_detect)

    p = sub.add_parser("test", help="selective p-value for one estimated changepoint")
    _detector_args(p)
    p.add_argument("--j", type=int, required=True, help="1-based index in location order")
    p.add_argument("--contrast", choices=("spanning", "window"), required=True)
    p.add_argument("--h", type=int)
    p.add_argument("--condition", choices=("step-sign", "locations", "fixed"), required=True)
    s = p.add_mutually_exclusive_group(required=True)
    s.add_argument("--sigma", type=float)
    s.add_argument("--estimate-sigma", action="store_true")
    p.add_argument("--trunc", help="cut-off M, or 'none' (binseg only; default auto)")
    p.set_defaults(run=cmd_test)

    p = sub.add_parser("simulate", help="Monte Carlo replicates of one approach")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="true number of changepoints")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--approach", type=int, choices=range(1, 9), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--h", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--bs-steps", type=int, help="binseg steps and l0 target count (default: --k)")
    p.add_argument("--lambda", dest="lam", type=float, help="fixed l0 penalty instead of per-replicate tuning")
    p.add_argument("--estimate-sigma", action="store_true")
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("estimate-sigma", help="robust noise level from first differences")
    p.add_argument("--input", required=True)
    p.set_defaults(run=cmd_estimate_sigma)

    p = sub.add_parser("bench", help="timing sweeps")
    p.add_argument("--mode", choices=("window-h", "approaches"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="comma-separated h values or series lengths")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except ArgError as e:
        print(f"cpinfer: error: {e}", file=sys.stderr)
        return EXIT_ARGS
    except DataError as e:
        print(f"cpinfer: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateBoundaryError, InvariantError, FloatingPointError, ArithmeticError) as e:
        print(f"cpinfer: numerical failure: {e!r}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # configuration checks in the library (SimConfig, contrast bounds, ...)
        print(f"cpinfer: error: {e}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
