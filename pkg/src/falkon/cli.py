"""Command-line experiment runner.

``falkon run`` loads a dataset (or generates a synthetic one), splits off a
test set, z-scores the features with training statistics, trains one solver,
evaluates it and writes a report directory. ``falkon compare`` runs several
solvers on the same data and split and merges their per-iteration test
metric into one CSV.

Settings come from three layers; later layers win:

1. built-in defaults,
2. ``--config FILE``: flat ``key = value`` lines (keys are the long flag
   names without the leading dashes; ``-`` and ``_`` are interchangeable;
   ``#`` starts a comment),
3. command-line flags.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import os
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import (
    DENSE_CAP,
    DenseCapError,
    IterTrace,
    Tracer,
    cg_nystrom_unpreconditioned,
    gd_nystrom,
    krr_direct,
    nystrom_direct,
)
from .data import (
    Dataset,
    DatasetFormatError,
    load_dense_csv,
    load_sparse_index_value,
    split_train_test,
    zscore_apply,
    zscore_fit,
)
from .diagnostics import theory_report
from .kernels import KernelSpec
from .metrics import classification_error, evaluate, regression_metrics
from .solver import (
    FalkonConfig,
    falkon_predict,
    falkon_train,
    falkon_train_basic_gradient,
    save_model,
    select_centers,
)
from .synthetic import GENERATORS

SOLVERS = ("falkon", "falkon_basic_gd", "krr", "nystrom_direct", "gd", "cg")
ITERATIVE = ("falkon", "falkon_basic_gd", "gd", "cg")
TASKS = ("regression", "binary", "multiclass")
THREADS_ENV = "FALKON_THREADS"

FORMATS_HELP = """\
input formats:
  csv     one sample per line, comma separated, label in the last column
          (see --label-column, --header)
  sparse  one sample per line: "label idx:val idx:val ..." with 1-based,
          strictly increasing indices; absent entries are zero

task labels:
  regression  real labels, used as they are
  binary      exactly two distinct label values; the smaller maps to -1
  multiclass  any label values; classes are numbered in sorted order and
              trained one-vs-rest with +1/-1 targets

report directory (--out):
  report.txt   settings, metrics table and, with --diagnostics, the theory block
  metrics.csv  one header row and one value row: n_test,mse,rmse,relative_error,c_err,auc
  trace.csv    iterative solvers: iteration,objective,test_metric,seconds
  model.bin    trained model (binary, see the package README)
  compare.csv  compare only: iteration,<solver>,... (test metric; gaps left empty)

--no-timestamp drops the timestamp line and writes every timing as 0, so two
runs with the same settings produce byte-identical files.

environment:
  FALKON_THREADS  default for --threads (otherwise the number of CPUs)
"""


def _float_list(s):
    return tuple(float(v) for v in str(s).split(",") if v.strip())


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*options):
    def conv(s):
        if s not in options:
            raise ValueError(f"{s!r} is not one of {', '.join(options)}")
        return s
    return conv


# (name, type, default, help)
OPTIONS = [
    ("data", str, None, "dataset file"),
    ("format", _choice("csv", "sparse"), "csv", "dataset file format"),
    ("label-column", int, -1, "csv label column (negative counts from the end)"),
    ("header", _bool, False, "csv file has a header line"),
    ("synthetic", _choice(*GENERATORS), None, "generate a bundled dataset instead of --data"),
    ("n", int, 2000, "rows of the synthetic dataset"),
    ("dim", int, 5, "features of the synthetic dataset"),
    ("task", _choice(*TASKS), "regression", "learning task"),
    ("center-labels", _bool, False, "regression: fit labels minus their training mean"),
    ("solver", _choice(*SOLVERS), "falkon", "training algorithm"),
    ("kernel", _choice("gaussian", "gaussian_diag", "linear"), "gaussian", "kernel family"),
    ("sigma", float, 1.0, "gaussian kernel width"),
    ("sigma-per-dim", _float_list, None, "comma-separated widths; implies --kernel gaussian_diag"),
    ("lambda", float, 1e-4, "regularization parameter"),
    ("centers", int, 200, "number of Nystrom centers M"),
    ("iters", int, 20, "iterations t"),
    ("sampling", _choice("uniform", "leverage"), "uniform", "center sampling scheme"),
    ("scores-file", str, None, "precomputed leverage scores, one per line"),
    ("backend", _choice("auto", "cholesky", "pivoted_qr", "eigendecomposition"), "auto",
     "preconditioner factorization"),
    ("relative-error", _choice("mean", "norm"), "mean",
     "relative error as rmse / mean(y) or as |yhat - y| / |y|"),
    ("test-fraction", float, 0.2, "fraction of rows held out for testing"),
    ("seed", int, 0, "seed for the split, the sampling and synthetic data"),
    ("block-rows", int, None, "rows per kernel block (default: M)"),
    ("threads", int, None, f"worker threads (default: ${THREADS_ENV} or the CPU count)"),
    ("dense-cap", int, DENSE_CAP, "largest dense system the exact solvers may form"),
    ("diagnostics", _bool, False, "add the dense theory diagnostics to the report"),
    ("out", str, "falkon_out", "report directory"),
    ("no-timestamp", _bool, False, "omit the timestamp and zero all timings"),
]
_BY_KEY = {name.replace("-", "_"): (name, conv, default) for name, conv, default, _ in OPTIONS}
_FLAGS = {"header", "center-labels", "diagnostics", "no-timestamp"}


class ConfigError(ValueError):
    """Bad configuration file or flag combination."""


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file into converted settings."""
    settings = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key = key.strip().replace("-", "_")
            if key not in _BY_KEY:
                raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
            conv = _BY_KEY[key][1]
            try:
                settings[key] = conv(value.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: field {key!r}: {exc}") from None
    return settings


def _argparse_type(conv):
    def wrapped(s):
        try:
            return conv(s)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    wrapped.__name__ = getattr(conv, "__name__", "value")
    return wrapped


def _add_options(p):
    p.add_argument("--config", help="key = value settings file; flags override it")
    for name, conv, default, help_ in OPTIONS:
        dest = name.replace("-", "_")
        shown = f" (default: {default})" if default not in (None, False) else ""
        if name in _FLAGS:
            p.add_argument(f"--{name}", dest=dest, action="store_const", const=True, default=None,
                           help=help_)
        else:
            p.add_argument(f"--{name}", dest=dest, type=_argparse_type(conv), default=None,
                           help=help_ + shown)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="falkon",
        description="Train and evaluate FALKON and baseline kernel ridge regression solvers.",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="train one solver and write a report",
                         epilog=FORMATS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_options(run)
    cmp_ = sub.add_parser("compare", help="run several solvers on one split and merge their traces",
                          epilog=FORMATS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_options(cmp_)
    cmp_.add_argument("--solvers", default="falkon,cg,gd",
                      help="comma-separated solvers to run (default: falkon,cg,gd)")
    cmp_.add_argument("configs", nargs="*",
                      help="one config file per run; each is layered under the shared flags")
    return parser


def resolve_settings(args, config_path=None) -> dict:
    """Defaults, then the config file, then explicit flags."""
    settings = {key: default for key, (_, _, default) in _BY_KEY.items()}
    path = config_path or args.config
    if path:
        settings.update(read_config_file(path))
    for key in _BY_KEY:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["threads"] is None:
        env = os.environ.get(THREADS_ENV)
        try:
            settings["threads"] = int(env) if env else (os.cpu_count() or 1)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if settings["sigma_per_dim"] is not None:
        settings["kernel"] = "gaussian_diag"
    if (settings["data"] is None) == (settings["synthetic"] is None):
        raise ConfigError("give exactly one of --data or --synthetic")
    for key in ("centers", "iters", "n", "dim", "threads"):
        if settings[key] < 1:
            raise ConfigError(f"field {key!r} must be >= 1, got {settings[key]}")
    if not settings["lambda"] > 0:
        raise ConfigError(f"field 'lambda' must be positive, got {settings['lambda']}")
    return settings


def make_kernel(s) -> KernelSpec:
    if s["kernel"] == "linear":
        return KernelSpec.linear()
    if s["kernel"] == "gaussian_diag":
        if s["sigma_per_dim"] is None:
            raise ConfigError("kernel gaussian_diag needs --sigma-per-dim")
        return KernelSpec.gaussian_diag(s["sigma_per_dim"])
    return KernelSpec.gaussian(s["sigma"])


def load_dataset(s) -> Dataset:
    if s["synthetic"] is not None:
        return GENERATORS[s["synthetic"]](n=s["n"], d=s["dim"], seed=s["seed"])
    if s["format"] == "sparse":
        return load_sparse_index_value(s["data"])
    return load_dense_csv(s["data"], label_column=s["label_column"], skip_header=s["header"])


def encode_labels(labels, task, classes):
    """Training targets and evaluation labels given the sorted label values of the whole dataset."""
    if task == "regression":
        return labels, labels
    if task == "binary":
        pm = np.where(labels == classes[-1], 1.0, -1.0)
        return pm, pm
    ids = np.searchsorted(classes, labels)
    targets = -np.ones((labels.size, classes.size))
    targets[np.arange(labels.size), ids] = 1.0
    return targets, ids


def prepare(s):
    """Load, split, z-score. Returns ``(train, test, test_labels, stats, offset)``.

    ``offset`` is the training label mean under ``center_labels`` (0
    otherwise); it is subtracted from the train and test datasets but not
    from ``test_labels``.

    Class numbering comes from the whole dataset so it does not depend on
    which classes land in the test split.
    """
    ds = load_dataset(s)
    classes = np.unique(ds.labels)
    if s["task"] == "binary" and classes.size != 2:
        raise ConfigError(f"task binary needs exactly two label values, found {classes.size}")
    train, test = split_train_test(ds, s["test_fraction"], seed=s["seed"])
    stats = zscore_fit(train)
    y_tr, _ = encode_labels(train.labels, s["task"], classes)
    y_te, test_labels = encode_labels(test.labels, s["task"], classes)
    offset = 0.0
    if s["center_labels"]:
        if s["task"] != "regression":
            raise ConfigError("--center-labels applies to regression only")
        offset = float(np.mean(y_tr))
    train = Dataset(zscore_apply(train, stats).features, y_tr - offset)
    test = Dataset(zscore_apply(test, stats).features, test_labels - offset)
    return train, test, test_labels, stats, offset


def _trace_metric(task):
    if task == "regression":
        return lambda y, p: regression_metrics(y, p)["rmse"]
    return classification_error


def train_one(s, train, test):
    """Train the configured solver. Returns ``(model, trace or None, extra dict)``."""
    kernel = make_kernel(s)
    lam = s["lambda"]
    M = min(s["centers"], train.n)
    solver = s["solver"]
    config = FalkonConfig(kernel=kernel, lam=lam, M=M, t=s["iters"], sampling=s["sampling"],
                          scores=s["scores_file"], seed=s["seed"], block_rows=s["block_rows"],
                          backend=s["backend"], threads=s["threads"])
    multi = train.labels.ndim == 2
    metric = _trace_metric(s["task"])
    extra = {}
    if solver == "krr":
        return krr_direct(train, kernel, lam, cap=s["dense_cap"]), None, extra
    selection = select_centers(train, config)
    C = selection.centers_of(train.features)
    if solver in ("falkon", "falkon_basic_gd"):
        tracer = None if multi else Tracer(train, C, kernel, lam, test, metric, s["block_rows"])
        fit = falkon_train if solver == "falkon" else falkon_train_basic_gradient
        model, report = fit(train, config, centers=selection, callback=tracer)
        extra["factors"] = report.factors
        extra["selection"] = selection
        return model, (tracer.trace if tracer is not None else None), extra
    if multi:
        raise ConfigError(f"solver {solver} supports regression and binary tasks only")
    if solver == "nystrom_direct":
        return nystrom_direct(train, selection, kernel, lam, cap=s["dense_cap"]), None, extra
    if solver == "gd":
        model, trace = gd_nystrom(train, selection, kernel, lam, s["iters"], test=test,
                                  block_rows=s["block_rows"], seed=s["seed"], metric=metric)
    else:
        model, trace = cg_nystrom_unpreconditioned(train, selection, kernel, lam, s["iters"], test=test,
                                                   block_rows=s["block_rows"], metric=metric)
    return model, trace, extra


def _headline(task):
    return "rmse" if task == "regression" else "c_err"


def _format_setting(v):
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def write_report(s, out, evalrep, trace, theory, seconds, timestamp):
    out.mkdir(parents=True, exist_ok=True)
    lines = ["FALKON run report"]
    if timestamp:
        lines.append(f"timestamp: {datetime.datetime.now().isoformat(timespec='seconds')}")
    lines.append("")
    lines.append("[settings]")
    width = max(len(k) for k in s)
    for k in sorted(s):
        if k in ("out", "no_timestamp"):
            continue
        lines.append(f"{k:<{width}}  {_format_setting(s[k])}")
    lines.append("")
    lines.append("[metrics]")
    lines.append(evalrep.to_table().rstrip("\n"))
    lines.append(f"{'seconds':<14}  {seconds:.6g}")
    if theory is not None:
        lines.append("")
        lines.append("[theory]")
        lines.append(theory.to_text().rstrip("\n"))
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    (out / "metrics.csv").write_text(evalrep.to_csv_row(header=True))
    if trace is not None:
        trace.to_csv(out / "trace.csv", timings=timestamp)


def run(s, out=None, quiet=False):
    """Execute one run from resolved settings. Returns ``(eval_report, trace)``."""
    out = Path(out or s["out"])
    timestamp = not s["no_timestamp"]
    train, test, test_labels, stats, offset = prepare(s)
    t0 = time.perf_counter()
    model, trace, extra = train_one(s, train, test)
    model = dataclasses.replace(model, offset=offset)
    seconds = time.perf_counter() - t0 if timestamp else 0.0
    pred = falkon_predict(model, test.features, s["block_rows"])
    evalrep = evaluate(test_labels, pred, s["task"], relative=s["relative_error"])
    theory = None
    if s["diagnostics"]:
        if "factors" not in extra:
            raise ConfigError("--diagnostics needs solver falkon or falkon_basic_gd")
        theory = theory_report(train, extra["selection"], extra["factors"], model.kernel, s["lambda"],
                               cap=s["dense_cap"])
    write_report(s, out, evalrep, trace, theory, seconds, timestamp)
    save_model(dataclasses.replace(model, norm_stats=stats), out / "model.bin")
    key = _headline(s["task"])
    if not quiet:
        M = model.centers.shape[0]
        t = s["iters"] if s["solver"] in ITERATIVE else 0
        print(f"{s['solver']} M={M} t={t} lambda={s['lambda']!r} {key}={getattr(evalrep, key):.6g} "
              f"seconds={seconds:.3f}")
    return evalrep, trace


def merge_traces(named_traces) -> list:
    """Rows ``[iteration, metric_1, ...]`` over the union of iterations; gaps are ``""``."""
    iters = sorted({k for _, tr in named_traces for k in tr.iteration})
    columns = [dict(zip(tr.iteration, tr.test_metric)) for _, tr in named_traces]
    rows = []
    for k in iters:
        row = [k]
        for col in columns:
            v = col.get(k)
            row.append("" if v is None else repr(v))
        rows.append(row)
    return rows


def write_compare_csv(path, named_traces):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", *[name for name, _ in named_traces]])
        w.writerows(merge_traces(named_traces))


_DATA_KEYS = ("data", "format", "label_column", "header", "synthetic", "n", "dim", "task", "test_fraction", "seed")


def compare(args):
    if args.configs:
        runs = [resolve_settings(args, path) for path in args.configs]
    else:
        base = resolve_settings(args)
        runs = []
        for name in [v.strip() for v in args.solvers.split(",") if v.strip()]:
            if name not in SOLVERS:
                raise ConfigError(f"unknown solver {name!r}")
            runs.append({**base, "solver": name})
    first = runs[0]
    for other in runs[1:]:
        diff = [k for k in _DATA_KEYS if other[k] != first[k]]
        if diff:
            raise ConfigError(f"runs disagree on dataset or split settings: {', '.join(diff)}")
    out = Path(first["out"])
    named = []
    seen = {}
    for s in runs:
        label = s["solver"]
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}_{seen[label]}"
        _, trace = run(s, out / label)
        named.append((label, trace if trace is not None else IterTrace()))
    write_compare_csv(out / "compare.csv", named)
    print(f"wrote {out / 'compare.csv'}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            run(resolve_settings(args))
        else:
            compare(args)
    except DenseCapError as exc:
        print(f"falkon: error: {exc} (flag --dense-cap)", file=sys.stderr)
        return 2
    except (ConfigError, DatasetFormatError, OSError, ValueError) as exc:
        print(f"falkon: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
