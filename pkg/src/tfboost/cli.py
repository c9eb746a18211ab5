"""``tfboost`` command line: fit, predict, simulate, bench.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.  Output files are written atomically, so a failed
command leaves no partial files behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import bench as bench_mod
from .baselines import FLM_FORMAT, deserialize_flm
from .boost import (
    MODEL_FORMAT,
    BoostConfig,
    deserialize,
    fit_depth_grid,
    mspe,
    parse_loss,
    predict_boost,
    serialize,
)
from .cart import TreeConfig
from .dataio import atomic_write, read_dataset
from .errors import DataError, ModelFormatError, NumericalError, TFBoostError
from .fda import build_basis
from .simgen import (
    METHODS,
    PREDICTORS,
    REGRESSIONS,
    MethodOptions,
    SimResults,
    SimSetting,
    check_methods,
    run_setting,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

LEARNERS = {"a1": ("A", 1), "a2": ("A", 2), "a3": ("A", 3), "b": ("B", 1)}


class UsageError(TFBoostError):
    """Bad flags or configuration values."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration


def _int_list(text: str) -> List[int]:
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None
    if not vals:
        raise UsageError("empty integer list")
    return vals


def _int(text) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise UsageError(f"expected an integer, got {text!r}") from None


def _pos_int(text) -> int:
    v = _int(text)
    if v < 1:
        raise UsageError(f"expected a positive integer, got {text!r}")
    return v


def _float(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise UsageError(f"expected a number, got {text!r}") from None


def _seed(text) -> int:
    v = _int(text)
    if v < 0:
        raise UsageError("seed must be non-negative")
    return v


def _nonneg_int(text) -> int:
    v = _int(text)
    if v < 0:
        raise UsageError(f"expected a non-negative integer, got {text!r}")
    return v


# every option a flag or a --config file may set: (parser, default)
OPTIONS: Dict[str, tuple] = {
    "train": (str, None),
    "valid": (str, None),
    "test": (str, None),
    "model": (str, None),
    "out": (str, None),
    "learner": (str, "b"),
    "pool_size": (_pos_int, 200),
    "gamma": (_float, 0.05),
    "t_max": (_pos_int, 1000),
    "depths": (_int_list, [1, 2, 3, 4]),
    "min_node": (_pos_int, 5),
    "n_interior": (_nonneg_int, 3),
    "degree": (_pos_int, 3),
    "loss": (str, "squared"),
    "seed": (_seed, None),
    "jobs": (_pos_int, 1),
    "setting": (str, None),
    "methods": (str, "tfboost-b,flm1,flm2"),
    "reps": (_pos_int, 10),
    "repeat": (_pos_int, 5),
}


def read_config(path: str) -> Dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment.  Unknown keys are rejected."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from None
    out: Dict[str, str] = {}
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{i}: expected key = value")
        key = key.strip().replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{i}: unknown key {key!r}; known keys: {', '.join(sorted(OPTIONS))}")
        out[key] = value.strip()
    return out


def resolve(args: argparse.Namespace, keys: Sequence[str]) -> Dict:
    """Merge flags over config-file values over defaults for ``keys``."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key in keys:
        conv, default = OPTIONS[key]
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = conv(flag)
        elif key in cfg:
            out[key] = conv(cfg[key])
        else:
            out[key] = default
    return out


def _need(opts: Dict, *keys: str) -> None:
    missing = [k for k in keys if not opts.get(k)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _resolve_seed(opts: Dict) -> int:
    if opts.get("seed") is None:
        seed = int(np.random.SeedSequence().generate_state(1)[0])
        print(f"seed: {seed}")
        return seed
    return int(opts["seed"])


def boost_config(opts: Dict, seed: int) -> BoostConfig:
    learner = str(opts["learner"]).lower()
    if learner not in LEARNERS:
        raise UsageError(f"unknown learner {learner!r}; choose from {', '.join(LEARNERS)}")
    kind, K = LEARNERS[learner]
    try:
        parse_loss(opts["loss"])
        if any(d < 1 for d in opts["depths"]):
            raise UsageError("depths must be >= 1")
        return BoostConfig(
            learner=kind, K=K, P=opts["pool_size"], gamma=opts["gamma"], t_max=opts["t_max"],
            tree=TreeConfig(1, opts["min_node"]), loss=opts["loss"], seed=seed,
        )
    except UsageError:
        raise
    except DataError as exc:
        raise UsageError(str(exc)) from None


def depth_seeds(seed: int, depths: Sequence[int]) -> List[int]:
    return [int(np.random.SeedSequence(seed, spawn_key=(d,)).generate_state(1)[0]) for d in depths]


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    opts = resolve(args, ["train", "valid", "test", "model", "out", "learner", "pool_size", "gamma",
                          "t_max", "depths", "min_node", "n_interior", "degree", "loss", "seed"])
    _need(opts, "train", "valid", "model")
    cfg = boost_config(opts, 0)
    seed = _resolve_seed(opts)
    cfg = replace(cfg, seed=seed)
    train = read_dataset(opts["train"], require_response=True)
    valid = read_dataset(opts["valid"], require_response=True)
    test = read_dataset(opts["test"], require_response=True) if opts["test"] else None
    basis = build_basis(train.grid.interval, opts["n_interior"], opts["degree"])

    model, by_depth = fit_depth_grid(train, valid, basis, cfg, opts["depths"],
                                     seeds=depth_seeds(seed, opts["depths"]))
    fitted = predict_boost(model, train)
    if not np.all(np.isfinite(fitted)):
        raise NumericalError("fitted values are not finite")
    t_stop = model.t_stop
    report = {
        "seed": seed,
        "learner": opts["learner"],
        "depth": model.config.tree.max_depth,
        "valid_loss_by_depth": {str(k): v for k, v in by_depth.items()},
        "t_stop": t_stop,
        "train_loss": float(model.train_loss[t_stop - 1]),
        "valid_loss": float(model.valid_loss[t_stop - 1]),
        "train_trace": model.train_loss.tolist(),
        "valid_trace": model.valid_loss.tolist(),
        "fitted": dict(zip(train.ids, fitted.tolist())),
    }
    if test is not None:
        report["test_mspe"] = mspe(model, test)

    atomic_write(opts["model"], serialize(model))
    if opts["out"]:
        atomic_write(opts["out"], json.dumps(report, sort_keys=True, indent=1) + "\n")

    print(f"depth {report['depth']}  t_stop {t_stop}  "
          f"train {report['train_loss']:.6g}  valid {report['valid_loss']:.6g}"
          + (f"  test mspe {report['test_mspe']:.6g}" if test is not None else ""))
    step = max(1, cfg.t_max // 10)
    print("iteration,train_loss,valid_loss")
    for t in list(range(step, cfg.t_max + 1, step)) + ([] if cfg.t_max % step == 0 else [cfg.t_max]):
        print(f"{t},{model.train_loss[t - 1]:.6g},{model.valid_loss[t - 1]:.6g}")
    return EXIT_OK


def load_model(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror or exc}") from None
    try:
        fmt = json.loads(text).get("format")
    except (json.JSONDecodeError, AttributeError):
        fmt = MODEL_FORMAT  # let the loader report the location
    if fmt == FLM_FORMAT:
        return deserialize_flm(text)
    return deserialize(text)


def cmd_predict(args) -> int:
    opts = resolve(args, ["model", "test", "out"])
    _need(opts, "model", "test", "out")
    model = load_model(opts["model"])
    data = read_dataset(opts["test"])
    pred = predict_boost(model, data) if hasattr(model, "steps") else model.predict(data)
    lines = ["id,prediction"] + [f"{i},{p!r}" for i, p in zip(data.ids, pred.tolist())]
    atomic_write(opts["out"], "\n".join(lines) + "\n")
    return EXIT_OK


def parse_settings(text: str, seed: int) -> List[SimSetting]:
    if text.strip().lower() == "all":
        return [SimSetting(p, r, s, seed=seed) for p in PREDICTORS for r in REGRESSIONS[:4]
                for s in (20.0, 5.0)]
    return [SimSetting.parse(part, seed=seed) for part in text.split(";") if part.strip()]


def cmd_simulate(args) -> int:
    opts = resolve(args, ["setting", "methods", "reps", "seed", "jobs", "out", "gamma", "t_max",
                          "pool_size", "depths", "min_node", "loss"])
    _need(opts, "setting", "out")
    try:
        methods = check_methods(opts["methods"].split(","))
        sim_opts = MethodOptions(gamma=opts["gamma"], t_max=opts["t_max"], pool_size=opts["pool_size"],
                                 depths=tuple(opts["depths"]), min_node=opts["min_node"],
                                 loss=opts["loss"])
        BoostConfig(gamma=sim_opts.gamma, t_max=sim_opts.t_max, P=sim_opts.pool_size,
                    tree=TreeConfig(1, sim_opts.min_node), loss=sim_opts.loss)
        seed = _resolve_seed(opts)
        settings = parse_settings(opts["setting"], seed)
    except UsageError:
        raise
    except DataError as exc:
        raise UsageError(str(exc)) from None
    results = SimResults()
    for setting in settings:
        res = run_setting(setting, methods, opts["reps"], sim_opts, jobs=opts["jobs"])
        results.records.extend(res.records)
    out = opts["out"]
    atomic_write(os.path.join(out, "results.csv"), results.to_csv())
    summary = results.summary_table()
    atomic_write(os.path.join(out, "summary.txt"), summary)
    print(summary, end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    opts = resolve(args, ["repeat", "seed"])
    rows = bench_mod.run(opts["repeat"], opts["seed"] or 0)
    print(bench_mod.format_rows(rows), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tfboost", description="Tree-based functional boosting for scalar-on-function regression.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    p.set_defaults(func=None)

    def common(sp):
        sp.add_argument("--config", help="key = value file; flags override its entries")
        sp.add_argument("--seed", help="master seed (drawn and printed when absent)")

    f = sub.add_parser("fit", help="fit a boosted model with validation-based depth selection")
    common(f)
    f.add_argument("--train", help="training dataset CSV")
    f.add_argument("--valid", help="validation dataset CSV")
    f.add_argument("--test", help="optional test dataset CSV for a held-out MSPE")
    f.add_argument("--model", help="output model document")
    f.add_argument("--out", help="output metrics report (JSON)")
    f.add_argument("--learner", choices=sorted(LEARNERS), default=None)
    f.add_argument("--pool-size", dest="pool_size", help="random directions per Type B tree")
    f.add_argument("--gamma", help="shrinkage in (0, 1)")
    f.add_argument("--t-max", dest="t_max", help="boosting iterations")
    f.add_argument("--depths", help="comma-separated maximum tree depths to compare")
    f.add_argument("--min-node", dest="min_node", help="minimum rows per leaf")
    f.add_argument("--n-interior", dest="n_interior", help="interior knots of the B-spline basis")
    f.add_argument("--degree", help="B-spline degree")
    f.add_argument("--loss", help="'squared' or 'huber:<delta>'")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predict responses for a dataset")
    pr.add_argument("--config")
    pr.add_argument("--model", help="fitted model document")
    pr.add_argument("--test", "--data", dest="test", help="dataset CSV (y may be blank)")
    pr.add_argument("--out", help="output predictions CSV")
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="run simulation settings and summarize test MSPE")
    common(s)
    s.add_argument("--setting", help="e.g. 'r1,M2,snr20'; separate several with ';' or use 'all'")
    s.add_argument("--methods", help="comma-separated: " + ", ".join(METHODS))
    s.add_argument("--reps", help="replications per setting")
    s.add_argument("--jobs", help="worker processes")
    s.add_argument("--out", help="output directory")
    s.add_argument("--gamma")
    s.add_argument("--t-max", dest="t_max")
    s.add_argument("--pool-size", dest="pool_size")
    s.add_argument("--depths")
    s.add_argument("--min-node", dest="min_node")
    s.add_argument("--loss")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="time the numba and numpy kernels")
    b.add_argument("--config")
    b.add_argument("--repeat")
    b.add_argument("--seed")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.func is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
