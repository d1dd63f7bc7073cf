"""Benchmark harness and command line entry point.

Reports are JSON documents (``REPORT_SCHEMA_VERSION``)::

    {
      "schema_version": 1,
      "library_version": "...",
      "config": {...},                      # BenchmarkConfig echo
      "runs": [                             # one entry per run
        {"run": 0, "seed": 0, "status": "ok", "error": null,
         "train_mse": ..., "train_accuracy": ..., "test_mse": ...,
         "test_accuracy": ..., "seconds": ..., "iterations": ...}
      ],
      "summary": {"train_mse": {"mean": ..., "std": ...}, ...}
    }

Accuracies are percentages (``null`` for regression).  ``seconds`` is the
wall clock of the training call alone.  ``std`` is the population standard
deviation over successful runs.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import data
from .activations import DEFAULT_EPSILON, Activation, Kind
from .baselines import AdamConfig, adam_train, elm_train
from .errors import ArchParseError, ZorbError
from .linalg import DEFAULT_RCOND
from .metrics import CLASSIFICATION, REGRESSION, compute_metrics
from .network import Flatten, Network, init_conv, init_dense, predict
from .serialize import load as load_model
from .serialize import save as save_model
from .zorb import ZorbConfig, zorb_train

REPORT_SCHEMA_VERSION = 1
TIMING_KEYS = ("seconds",)
ALGORITHMS = ("zorb", "adam", "elm")

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0+unknown"


# -- architectures ------------------------------------------------------------


def parse_arch(spec, input_dim=None, input_geometry=None, seed=0, epsilon=DEFAULT_EPSILON):
    """Build a freshly initialized network from a comma-separated layer list.

    Tokens: ``dense:N``, ``conv:FxKHxKW`` (optionally ``conv:FxKHxKW:S`` for
    stride ``S``), ``flatten`` and the activation names ``linear``,
    ``sigmoid``, ``tanh``, ``relu``, ``softmax``.  Either ``input_dim`` or
    ``input_geometry`` (for conv nets) must be given.
    """
    if not spec or not spec.strip():
        raise ArchParseError("empty architecture")
    rng = np.random.default_rng(seed)
    geometry = tuple(input_geometry) if input_geometry else None
    dim = int(np.prod(geometry)) if geometry else input_dim
    if dim is None:
        raise ArchParseError("input_dim or input_geometry is required")
    layers = []
    kinds = {k.value: k for k in Kind}
    for pos, raw in enumerate(spec.split(",")):
        tok = raw.strip().lower()
        name, _, arg = tok.partition(":")
        try:
            if name in kinds and not arg:
                layers.append(Activation(kinds[name], epsilon=epsilon))
            elif name == "dense":
                width = int(arg)
                if width < 1:
                    raise ValueError("width must be positive")
                if geometry is not None:
                    raise ArchParseError("dense layer after conv needs 'flatten'", pos, raw)
                layers.append(init_dense(dim, width, rng))
                dim = width
            elif name == "conv":
                if geometry is None:
                    raise ArchParseError("conv layer needs image input geometry", pos, raw)
                shape, _, stride = arg.partition(":")
                nf, kh, kw = (int(v) for v in shape.split("x"))
                layer = init_conv(geometry, nf, (kh, kw), int(stride or 1), rng)
                layers.append(layer)
                geometry = layer.output_geometry
                dim = layer.out_dim
            elif name == "flatten" and not arg:
                if geometry is None:
                    raise ArchParseError("flatten without image geometry", pos, raw)
                layers.append(Flatten(geometry))
                geometry = None
            else:
                raise ArchParseError("unknown layer", pos, raw)
        except ArchParseError:
            raise
        except ValueError as exc:
            raise ArchParseError(f"bad layer argument ({exc})", pos, raw) from exc
    try:
        return Network(layers, input_dim=input_dim if not input_geometry else None,
                       input_geometry=input_geometry)
    except ValueError as exc:
        raise ArchParseError(str(exc)) from exc


@dataclass(frozen=True)
class Preset:
    loader: object
    arch: str
    learning_rate: float = 0.01
    iterations: int = 2500
    rcond: float = DEFAULT_RCOND


# Hidden widths for the MNIST presets are our choice; only depth is known.
MNIST_ARCHS = {
    "mnist": "dense:1000,sigmoid,dense:500,sigmoid,dense:250,sigmoid,dense:100,sigmoid,"
             "dense:50,sigmoid,dense:10,softmax",
    "mnist8": "dense:1000,sigmoid,dense:800,sigmoid,dense:600,sigmoid,dense:400,sigmoid,"
              "dense:200,sigmoid,dense:100,sigmoid,dense:50,sigmoid,dense:10,softmax",
    "mnist11": "dense:1000,sigmoid,dense:900,sigmoid,dense:800,sigmoid,dense:700,sigmoid,"
               "dense:600,sigmoid,dense:500,sigmoid,dense:400,sigmoid,dense:300,sigmoid,"
               "dense:200,sigmoid,dense:100,sigmoid,dense:10,softmax",
}

PRESETS = {
    "boston": Preset(lambda s, n: data.load_boston(seed=s), "dense:32,sigmoid,dense:1,linear"),
    "sinc": Preset(lambda s, n: data.gen_sinc(),
                   "dense:200,sigmoid,dense:200,sigmoid,dense:1,linear"),
    "iris": Preset(lambda s, n: data.load_iris(seed=s), "dense:8,sigmoid,dense:3,softmax"),
    "xor": Preset(lambda s, n: data.gen_xor(seed=s),
                  "dense:16,tanh,dense:8,relu,dense:1,sigmoid"),
    "two_spirals": Preset(
        lambda s, n: data.gen_two_spirals(seed=s),
        "dense:32,tanh,dense:16,relu,dense:8,tanh,dense:4,relu,dense:1,sigmoid",
        learning_rate=0.005,
    ),
    "mnist": Preset(lambda s, n: data.load_mnist(n_train=n, seed=s), MNIST_ARCHS["mnist"],
                    0.001, 5000),
    "mnist8": Preset(lambda s, n: data.load_mnist(n_train=n, seed=s), MNIST_ARCHS["mnist8"],
                     0.001, 5000),
    "mnist11": Preset(lambda s, n: data.load_mnist(n_train=n, seed=s), MNIST_ARCHS["mnist11"],
                      0.0005, 5000),
    "cifar10": Preset(lambda s, n: data.load_cifar10(n_subsample=n, seed=s),
                      "conv:32x3x3,sigmoid,flatten,dense:10,softmax", 0.001, 200000, 1e-2),
}


# -- benchmark ------------------------------------------------------------------


@dataclass
class BenchmarkConfig:
    dataset: str
    algorithm: str = "zorb"
    arch: str | None = None
    seed: int = 0
    rcond: float | None = None
    learning_rate: float | None = None
    iterations: int | None = None
    batch_size: int = 32
    target_mse: float | None = None
    runs: int = 1
    subsample: int | None = None
    task: str | None = None
    output: str | None = None
    csv_output: str | None = None
    parallel_runs: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @property
    def preset(self):
        return PRESETS.get(self.dataset)

    def resolved(self):
        """Copy with every preset-dependent default filled in."""
        p = self.preset
        out = BenchmarkConfig(**asdict(self))
        if out.arch is None:
            if p is None:
                raise ValueError(f"--arch is required for dataset {self.dataset!r}")
            out.arch = p.arch
        if out.rcond is None:
            out.rcond = p.rcond if p else DEFAULT_RCOND
        if out.learning_rate is None:
            out.learning_rate = p.learning_rate if p else 0.01
        if out.iterations is None:
            out.iterations = p.iterations if p else 2500
        return out


def load_dataset(cfg):
    p = cfg.preset
    if p is not None:
        return p.loader(cfg.seed, cfg.subsample)
    path = Path(cfg.dataset)
    if path.suffix.lower() != ".csv" or not path.exists():
        raise ValueError(f"unknown dataset {cfg.dataset!r}; use a preset name or a CSV path")
    task = cfg.task or REGRESSION
    return data.load_csv(path, data.CsvSchema(target=-1, task=task), seed=cfg.seed)


def build_network(cfg, ds, seed):
    if ds.geometry is not None and cfg.arch.strip().lower().startswith("conv"):
        return parse_arch(cfg.arch, input_geometry=ds.geometry, seed=seed)
    return parse_arch(cfg.arch, input_dim=ds.input_dim, seed=seed)


def adam_config(cfg, seed, target_mse=None):
    return AdamConfig(
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        max_iterations=cfg.iterations,
        target_mse=target_mse if target_mse is not None else cfg.target_mse,
        seed=seed,
    )


def train_once(cfg, ds, seed):
    """Build, train and return ``(network, TrainReport)`` for one run."""
    net = build_network(cfg, ds, seed)
    if cfg.algorithm == "zorb":
        rep = zorb_train(net, ds.train_X, ds.train_Y, ZorbConfig(rcond=cfg.rcond, seed=seed),
                         task=ds.task,
                         eval_batch_size=500 if ds.geometry is not None else None)
    elif cfg.algorithm == "elm":
        rep = elm_train(net, ds.train_X, ds.train_Y, cfg.rcond, seed, task=ds.task)
    else:
        rep = adam_train(net, ds.train_X, ds.train_Y, adam_config(cfg, seed), task=ds.task)
    return net, rep


def evaluate(net, ds):
    # chunking changes BLAS rounding; only do it where memory demands it
    chunk = 500 if ds.geometry is not None else None
    train = compute_metrics(predict(net, ds.train_X, chunk), ds.train_Y, ds.task)
    test = compute_metrics(predict(net, ds.test_X, chunk), ds.test_Y, ds.task)
    return {
        "train_mse": train[0],
        "train_accuracy": train[1],
        "test_mse": test[0],
        "test_accuracy": test[1],
    }


def _one_run(cfg, r, ds=None):
    seed = cfg.seed + r
    row = {"run": r, "seed": seed, "status": "ok", "error": None}
    try:
        ds = ds if ds is not None else load_dataset(cfg)
        net, rep = train_once(cfg, ds, seed)
        row.update(evaluate(net, ds))
        row["seconds"] = rep.wall_clock_total
        row["iterations"] = rep.iterations
    except (ZorbError, ArithmeticError, ValueError) as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


METRICS = ("train_mse", "train_accuracy", "test_mse", "test_accuracy", "seconds")


def summarize(rows):
    ok = [r for r in rows if r["status"] == "ok"]
    summary = {}
    for key in METRICS:
        vals = [r[key] for r in ok if r.get(key) is not None]
        if vals:
            summary[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
        else:
            summary[key] = None
    summary["runs_ok"] = len(ok)
    summary["runs_failed"] = len(rows) - len(ok)
    return summary


@dataclass
class BenchmarkReport:
    config: dict
    runs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION
    library_version: str = __version__

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "library_version": self.library_version,
            "config": self.config,
            "runs": self.runs,
            "summary": self.summary,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path):
        cols = ["run", "seed", "status", *METRICS, "iterations", "error"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            for row in self.runs:
                w.writerow(row)


def strip_timings(obj):
    """Drop wall-clock fields (recursively) so reports can be compared."""
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def run_benchmark(cfg):
    cfg = cfg.resolved()
    if cfg.parallel_runs > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallel_runs) as pool:
            rows = list(pool.map(_one_run, [cfg] * cfg.runs, range(cfg.runs)))
    else:
        ds = load_dataset(cfg)
        rows = [_one_run(cfg, r, ds) for r in range(cfg.runs)]
    echo = asdict(cfg)
    echo.pop("parallel_runs")
    report = BenchmarkReport(config=echo, runs=rows, summary=summarize(rows))
    if cfg.output:
        Path(cfg.output).write_text(report.to_json() + "\n")
    if cfg.csv_output:
        report.write_csv(cfg.csv_output)
    return report


def adam_time_to_error(cfg, target_mse, seed=None, ds=None):
    """Wall clock Adam needs to reach ``target_mse`` on the training split
    (or to exhaust its iteration budget).  Returns ``(seconds, report)``."""
    cfg = cfg.resolved()
    ds = ds if ds is not None else load_dataset(cfg)
    seed = cfg.seed if seed is None else seed
    net = build_network(cfg, ds, seed)
    rep = adam_train(net, ds.train_X, ds.train_Y, adam_config(cfg, seed, target_mse),
                     task=ds.task)
    return rep.wall_clock_total, rep


# -- command line -------------------------------------------------------------


def _add_common(p):
    p.add_argument("--dataset", required=True,
                   help=f"preset ({', '.join(PRESETS)}) or path to a CSV file")
    p.add_argument("--algo", choices=ALGORITHMS, default="zorb")
    p.add_argument("--arch", help="layer list, e.g. dense:16,tanh,dense:1,sigmoid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rcond", type=float)
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--iters", type=int, help="Adam iteration budget")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--target-mse", type=float, help="Adam early-stop threshold")
    p.add_argument("--subsample", type=int, help="training subsample size (MNIST, CIFAR-10)")
    p.add_argument("--task", choices=(REGRESSION, CLASSIFICATION), help="for CSV datasets")


def _config(args, **extra):
    return BenchmarkConfig(
        dataset=args.dataset,
        algorithm=args.algo,
        arch=args.arch,
        seed=args.seed,
        rcond=args.rcond,
        learning_rate=args.lr,
        iterations=args.iters,
        batch_size=args.batch_size,
        target_mse=args.target_mse,
        subsample=args.subsample,
        task=args.task,
        **extra,
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="zorbnet", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="repeat seeded runs and write a JSON report")
    _add_common(bench)
    bench.add_argument("--runs", type=int, default=1)
    bench.add_argument("--out", help="JSON report path (stdout when omitted)")
    bench.add_argument("--csv", help="also write one CSV row per run")
    bench.add_argument("--parallel-runs", type=int, default=1)

    train = sub.add_parser("train", help="train one model")
    _add_common(train)
    train.add_argument("--model-out", help="where to save the trained model")
    train.add_argument("--out", help="JSON metrics path (stdout when omitted)")

    ev = sub.add_parser("eval", help="evaluate a saved model")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--model-in", required=True)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--subsample", type=int)
    ev.add_argument("--task", choices=(REGRESSION, CLASSIFICATION))
    ev.add_argument("--out")

    ds = sub.add_parser("datasets", help="dataset utilities")
    ds_sub = ds.add_subparsers(dest="datasets_command", required=True)
    fetch = ds_sub.add_parser("fetch", help=f"download into ${data.DATA_DIR_ENV}")
    fetch.add_argument("names", nargs="+", choices=sorted(data.DEFAULT_URLS))
    fetch.add_argument("--dest")
    return parser


def _emit(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            cfg = _config(args, runs=args.runs, output=args.out, csv_output=args.csv,
                          parallel_runs=args.parallel_runs)
            report = run_benchmark(cfg)
            if not args.out:
                print(report.to_json())
            if report.summary["runs_ok"] == 0:
                print("error: every run failed", file=sys.stderr)
                return 1
        elif args.command == "train":
            cfg = _config(args).resolved()
            ds = load_dataset(cfg)
            net, rep = train_once(cfg, ds, cfg.seed)
            if args.model_out:
                save_model(net, args.model_out)
            payload = {"config": asdict(cfg), "seconds": rep.wall_clock_total,
                       "iterations": rep.iterations, **evaluate(net, ds)}
            _emit(payload, args.out)
        elif args.command == "eval":
            cfg = BenchmarkConfig(dataset=args.dataset, seed=args.seed,
                                  subsample=args.subsample, task=args.task)
            ds = load_dataset(cfg)
            net = load_model(args.model_in)
            _emit({"dataset": args.dataset, **evaluate(net, ds)}, args.out)
        elif args.command == "datasets":
            for path in data.fetch(args.names, args.dest):
                print(path)
    except (ZorbError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
