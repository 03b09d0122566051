"""Command-line interface: ``fourier-gpc {train,predict,evaluate,benchmark,kernel-check}``.

Exit codes: 0 success, 2 usage or data error, 3 numerical failure.
The default linear-algebra thread count comes from ``FOURIER_GPC_THREADS``
and can be overridden with ``--threads``; a single thread gives bitwise
reproducible reductions.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    Dataset,
    TransformKind,
    apply_transform,
    balanced_sample,
    confusion_counts,
    fit_preprocessing,
    load_csv,
    overall_accuracy,
    read_matrix,
)
from .errors import CorruptModelError, DomainError, IngestionError, NumericalError, UnsupportedVersionError
from .features import approx_kernel, sample_frequencies, se_kernel, standard_normal
from .model import load, predict_label, predict_proba, save
from .optim import OptimizerConfig
from .trainer import TrainConfig, fit

log = logging.getLogger("fourier_gpc")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

BENCHMARK_HEADER = ["mode", "n", "D", "seed", "train_seconds", "test_seconds", "train_oa", "test_oa", "status"]
TRACE_HEADER = ["iteration", "log_F", "gamma", "elapsed"]


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _modes(text):
    values = [t.strip().lower() for t in text.split(",") if t.strip()]
    if not values or any(v not in ("rff", "vff") for v in values):
        raise argparse.ArgumentTypeError(f"modes must be drawn from rff,vff, got {text!r}")
    return values


def _preprocess(text):
    kind, _, k = text.partition(":")
    if kind == "none" and not k:
        return TransformKind.NONE, None
    if kind == "standardize" and not k:
        return TransformKind.STANDARDIZE, None
    if kind == "standardize-pca" and k:
        return TransformKind.STANDARDIZE_PCA, _positive_int(k)
    raise argparse.ArgumentTypeError(
        f"expected none, standardize or standardize-pca:K, got {text!r}"
    )


def _label_col(text):
    return int(text) if text.lstrip("-").isdigit() else text


_HEADER = {"auto": None, "yes": True, "no": False}


def _add_data_flags(p, required_label=False):
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--label-col", type=_label_col, required=required_label,
                   help="label column name (needs a header) or zero-based index")
    p.add_argument("--header", choices=sorted(_HEADER), default="auto",
                   help="whether the first row is a header (default: detect)")


def _add_train_flags(p):
    p.add_argument("--preprocess", type=_preprocess, default=(TransformKind.STANDARDIZE, None),
                   help="none | standardize | standardize-pca:K (default standardize)")
    p.add_argument("--max-iters", type=_positive_int, default=50, help="outer iteration cap")
    p.add_argument("--tol", type=_positive_float, default=1e-5, help="relative log-bound change to stop")
    p.add_argument("--max-evals", type=_positive_int, default=100, help="CG evaluations per outer iteration")
    p.add_argument("--ridge", action="store_true", help="VFF: add 0.5*|V|^2 to the objective")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fourier-gpc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="linear-algebra threads (default: $FOURIER_GPC_THREADS or library default)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a classifier and write a model file")
    _add_data_flags(p)
    p.add_argument("--mode", choices=["rff", "vff"], default="rff")
    p.add_argument("--num-freqs", type=_positive_int, required=True, help="number of Fourier frequencies D")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--balanced", type=_positive_int, default=None,
                   help="train on a balanced sample of this many rows")
    _add_train_flags(p)

    p = sub.add_parser("predict", help="write one prediction per input row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", type=_label_col, default=None,
                   help="column to drop before predicting, if the file has labels")
    p.add_argument("--header", choices=sorted(_HEADER), default="auto")
    p.add_argument("--out", required=True)
    p.add_argument("--proba", action="store_true", help="write P(y=1) instead of labels")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("evaluate", help="print accuracy and confusion counts")
    _add_data_flags(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model file to predict with")
    src.add_argument("--pred", help="file of precomputed 0/1 predictions, one per line")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("benchmark", help="run the (mode, n, D, repeat) grid and write a CSV")
    _add_data_flags(p)
    p.add_argument("--grid-n", type=_int_list, required=True)
    p.add_argument("--grid-d", type=_int_list, required=True)
    p.add_argument("--modes", type=_modes, default=["rff", "vff"])
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = sub.add_parser("kernel-check", help="exact vs approximated SE kernel error per D")
    p.add_argument("--dims", type=_positive_int, required=True)
    p.add_argument("--sigma", type=_positive_float, default=1.0)
    p.add_argument("--gamma", type=_positive_float, default=1.0)
    p.add_argument("--grid-d", type=_int_list, required=True)
    p.add_argument("--pairs", type=_positive_int, required=True)
    p.add_argument("--seeds", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for the point pairs")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    return parser


def _load(args, label_col) -> Dataset:
    return load_csv(args.data, label_col, _HEADER[args.header])


def _train_config(args, mode, D, seed) -> TrainConfig:
    return TrainConfig(
        mode=mode,
        D=D,
        seed=seed,
        max_outer_iters=args.max_iters,
        rel_tol=args.tol,
        optimizer=OptimizerConfig(max_evals=args.max_evals),
        ridge_on_V=args.ridge,
    )


def _preprocessing(args, X):
    kind, k = args.preprocess
    if kind is TransformKind.STANDARDIZE_PCA and k > min(X.shape):
        raise UsageError(f"--preprocess: PCA dimension {k} exceeds min(n, d) = {min(X.shape)}")
    return fit_preprocessing(X, kind, k)


def cmd_train(args) -> int:
    ds = _load(args, args.label_col)
    if ds.n < 2:
        raise UsageError(f"--data: need at least two rows, found {ds.n}")
    if args.balanced is not None:
        ds, _ = balanced_sample(ds, args.balanced, args.seed)
    transform = _preprocessing(args, ds.X)
    model, trace = fit(ds, _train_config(args, args.mode, args.num_freqs, args.seed), transform)
    save(model, args.out)
    trace_path = Path(args.out).with_suffix(".trace.csv")
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace.records:
            w.writerow([r.iteration, repr(r.log_F), repr(r.gamma), f"{r.wall_time:.6f}"])
    print(f"status={trace.status.value}")
    print(f"outer_iters={trace.records[-1].iteration}")
    print(f"log_F={trace.records[-1].log_F!r}")
    print(f"model={args.out}")
    print(f"trace={trace_path}")
    return EXIT_OK


def _features_for(model, args):
    ds_X = _read_features(args.data, args.label_col, _HEADER[args.header])
    if ds_X.shape[1] != model.input_dim:
        raise UsageError(
            f"--data has {ds_X.shape[1]} feature columns, model expects {model.input_dim}"
        )
    return ds_X


def _read_features(path, label_col, header):
    """Feature matrix of a file that may or may not carry labels."""
    if label_col is not None:
        return load_csv(path, label_col, header).X
    return read_matrix(path, header)[1]


def cmd_predict(args) -> int:
    model = load(args.model)
    X = _features_for(model, args)
    with open(args.out, "w", encoding="utf-8") as fh:
        if args.proba:
            for p in predict_proba(model, X):
                fh.write(f"{float(p)!r}\n")
        else:
            for lab in predict_label(model, X, args.threshold):
                fh.write(f"{int(lab)}\n")
    print(f"rows={X.shape[0]}")
    return EXIT_OK


def _read_predictions(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        pred = np.array([int(float(ln)) for ln in lines])
    except ValueError as exc:
        raise IngestionError(f"--pred: {exc}") from None
    if not np.all((pred == 0) | (pred == 1)):
        raise IngestionError("--pred: predictions must be 0 or 1")
    return pred


def cmd_evaluate(args) -> int:
    ds = _load(args, args.label_col)
    if ds.n == 0:
        raise UsageError("--data: file has no rows to evaluate")
    seconds = None
    if args.model is not None:
        model = load(args.model)
        if ds.d != model.input_dim:
            raise UsageError(f"--data has {ds.d} feature columns, model expects {model.input_dim}")
        t0 = time.perf_counter()
        pred = predict_label(model, ds.X, args.threshold)
        seconds = time.perf_counter() - t0
    else:
        pred = _read_predictions(args.pred)
        if pred.shape[0] != ds.n:
            raise UsageError(f"--pred has {pred.shape[0]} rows, --data has {ds.n}")
    c = confusion_counts(pred, ds.y)
    n0, n1 = c["TN"] + c["FP"], c["TP"] + c["FN"]
    out = {
        "n": ds.n,
        "OA": overall_accuracy(pred, ds.y),
        "accuracy_class0": c["TN"] / n0 if n0 else float("nan"),
        "accuracy_class1": c["TP"] / n1 if n1 else float("nan"),
        **c,
    }
    if seconds is not None:
        out["predict_seconds"] = seconds
    for key, value in out.items():
        print(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return EXIT_OK


def run_benchmark(ds: Dataset, args) -> list[dict]:
    rows = []
    cells = [(m, n, D, args.seed + r) for m in sorted(set(args.modes)) for n in sorted(set(args.grid_n))
             for D in sorted(set(args.grid_d)) for r in range(args.repeats)]
    for mode, n, D, seed in cells:
        row = {"mode": mode, "n": n, "D": D, "seed": seed, "train_seconds": "", "test_seconds": "",
               "train_oa": "", "test_oa": "", "status": "ok"}
        try:
            train, test = balanced_sample(ds, n, seed)
            transform = _preprocessing(args, train.X)
            t0 = time.perf_counter()
            model, trace = fit(train, _train_config(args, mode, D, seed), transform)
            row["train_seconds"] = f"{time.perf_counter() - t0:.6f}"
            row["train_oa"] = repr(overall_accuracy(predict_label(model, train.X), train.y))
            if test.n:
                t0 = time.perf_counter()
                pred = predict_label(model, test.X)
                row["test_seconds"] = f"{time.perf_counter() - t0:.6f}"
                row["test_oa"] = repr(overall_accuracy(pred, test.y))
            else:
                row["status"] = "no_test_rows"
        except (DomainError, NumericalError, UsageError) as exc:
            row["status"] = f"error: {exc}"
            log.warning("cell %s n=%d D=%d seed=%d failed: %s", mode, n, D, seed, exc)
        rows.append(row)
        log.info("cell %s n=%d D=%d seed=%d %s", mode, n, D, seed, row["status"])
    rows.sort(key=lambda r: (r["mode"], r["n"], r["D"], r["seed"]))
    return rows


def cmd_benchmark(args) -> int:
    ds = _load(args, args.label_col)
    rows = run_benchmark(ds, args)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCHMARK_HEADER)
        w.writeheader()
        w.writerows(rows)
    meta = {
        "version": __version__,
        "threads": _resolve_threads(args.threads),
        "data": str(args.data),
        "grid_n": args.grid_n,
        "grid_d": args.grid_d,
        "modes": args.modes,
        "repeats": args.repeats,
        "seed": args.seed,
        "timing": "wall-clock seconds around fit and predict calls only",
    }
    with open(str(args.out) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    print(f"rows={len(rows)}")
    print(f"failed={sum(r['status'] != 'ok' for r in rows)}")
    return EXIT_OK


def kernel_error_table(d, sigma, gamma, grid_d, pairs, seeds, seed=0):
    """Mean |approx/gamma - exact/gamma| per D over ``seeds`` bases and ``pairs`` point pairs."""
    pts = standard_normal((pairs, 2, d), seed + 7919) * sigma
    exact = np.array([se_kernel(a, b, sigma, gamma) for a, b in pts]) / gamma
    table = []
    for D in grid_d:
        err = 0.0
        self_err = 0.0
        for s in range(seeds):
            basis = sample_frequencies(D, d, seed + s)
            for (a, b), k in zip(pts, exact):
                err += abs(approx_kernel(a, b, basis, sigma, gamma) / gamma - k)
                self_err = max(self_err, abs(approx_kernel(a, a, basis, sigma, gamma) / gamma - 1.0))
        table.append({"D": D, "mean_abs_error": float(err) / (pairs * seeds), "self_kernel_error": float(self_err)})
    return table


def cmd_kernel_check(args) -> int:
    table = kernel_error_table(args.dims, args.sigma, args.gamma, args.grid_d, args.pairs, args.seeds, args.seed)
    with contextlib.ExitStack() as stack:
        fh = sys.stdout if args.out is None else stack.enter_context(open(args.out, "w", newline="", encoding="utf-8"))
        w = csv.writer(fh)
        w.writerow(["D", "mean_abs_error", "self_kernel_error"])
        for row in table:
            w.writerow([row["D"], repr(row["mean_abs_error"]), repr(row["self_kernel_error"])])
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "kernel-check": cmd_kernel_check,
}


def _resolve_threads(threads):
    if threads is None:
        env = os.environ.get("FOURIER_GPC_THREADS")
        threads = int(env) if env and env.isdigit() and int(env) > 0 else None
    return threads


def _thread_limit(threads):
    threads = _resolve_threads(threads)
    if threads is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with _thread_limit(args.threads):
            return COMMANDS[args.command](args)
    except NumericalError as exc:
        where = f" at outer iteration {exc.iteration}" if exc.iteration is not None else ""
        print(f"fourier-gpc: numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, DomainError, IngestionError, CorruptModelError, UnsupportedVersionError) as exc:
        print(f"fourier-gpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fourier-gpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
