"""Command line interface: ``gplvm-density {fit,eval,bench,selftest}``."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .datasets import load_dataset
from .exceptions import InvalidInputError, NumericalError, ParseError
from .io import load_model, save_model
from .preprocessing import Preprocessor
from .selftest import run_selftest


def _ints(text):
    return [int(t) for t in str(text).split(",") if t]


def _strs(text):
    return [t for t in str(text).split(",") if t]


def _params(args):
    if args.method in ("lz",):
        return {"d": args.d[0]}
    if args.method in ("lpo-det", "lpo-rd"):
        return {"d": args.d[0], "P": args.P[0]}
    if args.method == "gm":
        return {"K": args.K}
    if args.method == "mp":
        return {"d": args.d[0], "r": args.r}
    return {}


def cmd_fit(args):
    data = load_dataset(args.dataset, seed=args.seed).features
    if args.n_tr:
        train_idx, test_idx = harness.make_splits(len(data), args.n_tr[0], 1, args.seed)[0]
    else:
        train_idx, test_idx = np.arange(len(data)), np.arange(0)
    _guard(args, [args.method], [len(train_idx)], data.shape[1])
    params = _params(args)
    pre = Preprocessor(args.preproc[0]).fit(data[train_idx])
    model = harness.build_model(args.method, params, args.steps, args.seed)
    model.fit(pre.transform(data[train_idx]))
    report = {"dataset": args.dataset, "method": args.method, "params": params,
              "n_tr": int(len(train_idx)), "preproc": pre.to_dict()["mode"], "seed": args.seed}
    if len(test_idx):
        mean = harness.evaluate_model(model, pre.transform(data[test_idx]))
        report.update(log_density=mean, log_density_raw_space=mean + pre.log_abs_det_)
    if args.out:
        save_model(args.out, model, pre, method=args.method, params=params)
        report["model"] = str(args.out)
    print(json.dumps(report))
    return 0


def cmd_eval(args):
    if not args.model:
        raise InvalidInputError("eval needs --model")
    model, pre = load_model(args.model)
    data = load_dataset(args.dataset, seed=args.seed).features
    log_abs_det = 0.0
    if pre is not None:
        data = pre.transform(data)
        log_abs_det = pre.log_abs_det_
    mean = harness.evaluate_model(model, data)
    print(json.dumps({"dataset": args.dataset, "model": str(args.model), "n": int(len(data)),
                      "log_density": mean, "log_density_raw_space": mean + log_abs_det}))
    return 0


def cmd_bench(args):
    ds = load_dataset(args.dataset, seed=args.seed)
    methods = harness.METHODS if args.method == "all" else _strs(args.method)
    n_tr = args.n_tr or [min(50, ds.n_samples // 2)]
    _guard(args, methods, n_tr, ds.n_features)
    specs = harness.build_grid(ds.name, ds.n_features, ds.n_samples, methods, n_tr, args.preproc,
                               args.splits, args.seed, args.steps, args.d, args.P)
    print(f"{len(specs)} runs", file=sys.stderr)
    records = harness.run_grid(specs, ds.features, workers=args.workers)
    out = Path(args.out or "bench_out")
    results = harness.write_outputs(records, out)
    for (method, n), res in harness.best_of(results, raw_space=True).items():
        print(f"{method:8s} n_tr={n:<5d} best {res.raw_mean:9.4f} (+/- {res.stderr:.4f})  "
              f"{json.dumps(res.params)} {res.preproc}")
    failed = sum(r["status"] != "ok" for r in records)
    if failed:
        print(f"{failed} of {len(records)} runs failed; see {out / 'runs'}", file=sys.stderr)
    return 0


def cmd_selftest(args):
    return 0 if run_selftest() else 1


def _guard(args, methods, n_tr, n_features):
    if harness.needs_allow_large(methods, n_tr, n_features) and not args.allow_large:
        raise InvalidInputError(
            f"GPLVM training with N_tr > {harness.LARGE_N_TR} or D > {harness.LARGE_D} is slow; "
            "pass --allow-large to run it anyway")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", default="synthetic:curve",
                        help="svmlight file or synthetic:<curve|gauss3>")
    common.add_argument("--method", default=None,
                        help=f"one of {', '.join(harness.METHODS)} (bench: comma list or 'all')")
    common.add_argument("--d", type=_ints, default=None, help="latent dimension(s)")
    common.add_argument("--P", type=_ints, default=None, help="leave-out count(s)")
    common.add_argument("--K", type=int, default=1, help="gm cluster count (fit only)")
    common.add_argument("--r", type=int, default=5, help="mp neighbour count (fit only)")
    common.add_argument("--preproc", type=_strs, default=["raw"], help="raw|scaled|whitened (or r,s,w)")
    common.add_argument("--n-tr", dest="n_tr", type=_ints, default=None, help="training size(s)")
    common.add_argument("--splits", type=int, default=10)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--steps", type=int, default=600)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="model file (fit) or output directory (bench)")
    common.add_argument("--model", default=None, help="saved model to score (eval)")
    common.add_argument("--allow-large", action="store_true")

    parser = argparse.ArgumentParser(prog="gplvm-density", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in [("fit", cmd_fit, "fit one model on one split"),
                            ("eval", cmd_eval, "score a saved model on a dataset"),
                            ("bench", cmd_bench, "run a method grid over splits"),
                            ("selftest", cmd_selftest, "run the built-in oracle checks")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    # single fits default to one cell, benchmarks to the full grid
    grid = args.command == "bench"
    args.method = args.method or ("all" if grid else "lpo-det")
    args.d = args.d or (list(harness.LATENT_DIMS) if grid else [1])
    args.P = args.P or (list(harness.LEAVE_OUT) if grid else [5])
    try:
        return args.func(args)
    except (InvalidInputError, ParseError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
