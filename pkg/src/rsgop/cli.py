"""Command line harness: ``gop run``, ``gop compare`` and ``gop problems``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional

from .acquisition import METHODS, VALUE_TRANSFORMS, RunConfig, Trace, run_optimization
from .problems import builtin_problems, get_problem
from .rbf import KERNELS, KernelKind

log = logging.getLogger("rsgop")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_NO_NEW_POINT = 3

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

# config-file keys and the flag each one mirrors
CONFIG_KEYS = {
    "problem": "--problem",
    "method": "--method",
    "kernel": "--kernel",
    "gamma": "--gamma",
    "budget": "--budget",
    "seed": "--seed",
    "cycle_length": "--cycle-length",
    "noise": "--noise",
    "output_path": "--out",
    "n_initial": "--n-initial",
    "value_transform": "--value-transform",
}
DEFAULTS = {
    "problem": "branin",
    "method": "rbf",
    "kernel": "cubic",
    "gamma": None,
    "budget": 50,
    "seed": 0,
    "cycle_length": 5,
    "noise": 0.0,
    "output_path": None,
    "n_initial": None,
    "value_transform": "median",
}


class ConfigError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_trace(trace: Trace, path, wall_times: bool = False) -> None:
    """Write one CSV row per evaluation.

    Floats use ``repr`` so values round-trip exactly. ``wall_ms`` is written as
    ``0`` unless ``wall_times`` is set, which keeps repeated runs byte-identical.
    """
    dim = trace[0].point.size if len(trace) else 0
    header = ["iter", *(f"x{j + 1}" for j in range(dim)), "f", "best_f", "target", "acq_score", "wall_ms"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in trace:
            w.writerow(
                [
                    r.iteration,
                    *(_fmt(v) for v in r.point),
                    _fmt(r.value),
                    _fmt(r.best_value),
                    _fmt(r.target),
                    _fmt(r.acquisition_score),
                    r.wall_time_ms if wall_times else 0,
                ]
            )


def summarize(method: str, trace: Trace, wall_ms: int) -> dict:
    best = trace.best_record
    return {
        "method": method,
        "best_value": best.value,
        "best_point": [float(v) for v in best.point],
        "evals": len(trace),
        "evals_to_best": best.iteration,
        "status": trace.status,
        "wall_ms": wall_ms,
    }


def _positive_int(flag, v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(flag, f"expected a positive integer, got {v!r}")
    return v


def _merge(args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    merged = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("--config", str(exc)) from None
        if not isinstance(data, dict):
            raise ConfigError("--config", "expected a JSON object")
        for key, value in data.items():
            if key not in CONFIG_KEYS:
                raise ConfigError("--config", f"unknown key {key!r}")
            merged[key] = value
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def build_config(args: argparse.Namespace, method: Optional[str] = None):
    """Validate the merged settings; returns ``(problem, RunConfig)``.

    :raises ConfigError: naming the offending flag.
    """
    m = _merge(args)
    if method is not None:
        m["method"] = method
    if m["method"] not in METHODS:
        raise ConfigError("--method", f"unknown method {m['method']!r}; choose from {', '.join(METHODS)}")
    noise = m["noise"]
    if not isinstance(noise, (int, float)) or isinstance(noise, bool) or noise < 0:
        raise ConfigError("--noise", f"expected a nonnegative number, got {noise!r}")
    seed = m["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("--seed", f"expected an integer, got {seed!r}")
    try:
        problem = get_problem(m["problem"], noise=float(noise), seed=seed)
    except KeyError:
        names = ", ".join(p.name for p in builtin_problems())
        raise ConfigError("--problem", f"unknown problem {m['problem']!r}; choose from {names}") from None
    gamma = m["gamma"]
    if gamma is not None and (not isinstance(gamma, (int, float)) or isinstance(gamma, bool) or not gamma > 0):
        raise ConfigError("--gamma", f"expected a positive number, got {gamma!r}")
    try:
        kernel = KernelKind(m["kernel"], gamma=None if gamma is None else float(gamma))
    except ValueError as exc:
        flag = "--gamma" if gamma is not None and m["kernel"] in KERNELS else "--kernel"
        raise ConfigError(flag, str(exc)) from None
    budget = _positive_int("--budget", m["budget"])
    cycle_length = _positive_int("--cycle-length", m["cycle_length"])
    n_initial = m["n_initial"]
    if n_initial is not None:
        _positive_int("--n-initial", n_initial)
    if m["value_transform"] not in VALUE_TRANSFORMS:
        raise ConfigError("--value-transform", f"choose from {', '.join(VALUE_TRANSFORMS)}")
    cfg = RunConfig(
        method=m["method"],
        kernel=kernel,
        budget=budget,
        seed=seed,
        cycle_length=cycle_length,
        n_initial=n_initial,
        value_transform=m["value_transform"],
        problem=problem.name,
        output_path=m["output_path"],
    )
    n0 = cfg.initial_size(problem.domain.dim)
    if budget < n0:
        raise ConfigError("--budget", f"budget {budget} is below the initial design size {n0}")
    return problem, cfg


def _timed_run(problem, cfg: RunConfig) -> tuple[Trace, int]:
    t0 = time.perf_counter()
    trace = run_optimization(problem.objective, cfg)
    return trace, int(round(1000 * (time.perf_counter() - t0)))


def _exit_code(trace: Trace) -> int:
    if trace.status == "no_new_point":
        return EXIT_NO_NEW_POINT
    if trace.status == "singular_system":
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_run(args) -> int:
    problem, cfg = build_config(args)
    out = Path(cfg.output_path or f"{problem.name}_{cfg.method}.csv")
    trace, wall_ms = _timed_run(problem, cfg)
    write_trace(trace, out)
    summary = summarize(cfg.method, trace, wall_ms)
    with open(out.with_suffix(".json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(
        f"{problem.name} {cfg.method}: best={summary['best_value']!r} "
        f"evals={summary['evals']} wall_ms={wall_ms} status={trace.status}"
    )
    if trace.status not in ("budget_exhausted", "target_reached", "stalled"):
        print(f"stopped early: {trace.message}", file=sys.stderr)
    return _exit_code(trace)


def cmd_compare(args) -> int:
    configs = [build_config(args, method) for method in METHODS]
    problem = configs[0][0]
    out = Path(configs[0][1].output_path or f"compare_{problem.name}")
    out.mkdir(parents=True, exist_ok=True)
    rows, code = [], EXIT_OK
    for problem, cfg in configs:
        trace, wall_ms = _timed_run(problem, cfg)
        write_trace(trace, out / f"{cfg.method}.csv")
        rows.append(summarize(cfg.method, trace, wall_ms))
        code = max(code, _exit_code(trace))
    with open(out / "summary.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    print(f"{'method':<12}{'best_value':>24}{'evals_to_best':>15}{'evals':>7}{'wall_ms':>10}")
    for r in rows:
        print(f"{r['method']:<12}{r['best_value']:>24.12g}{r['evals_to_best']:>15}{r['evals']:>7}{r['wall_ms']:>10}")
    return code


def cmd_problems(args) -> int:
    for p in builtin_problems():
        dom = p.domain
        ref = "-" if p.reference_minimum is None else f"{p.reference_minimum[1]:g}"
        box = " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(dom.lower, dom.upper))
        print(f"{p.name:<16} d={dom.dim}  {box}  min={ref}  {p.description}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gop", description="Response-surface global optimization benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem")
    common.add_argument("--kernel", help=f"one of {', '.join(KERNELS)} (rbf only)")
    common.add_argument("--gamma", type=float, help="shape parameter for multiquadric and gaussian kernels")
    common.add_argument("--budget", type=int, help="total number of evaluations")
    common.add_argument("--seed", type=int)
    common.add_argument("--cycle-length", dest="cycle_length", type=int)
    common.add_argument("--noise", type=float, help="uniform noise amplitude for expfit_inverse")
    common.add_argument("--n-initial", dest="n_initial", type=int, help="initial design size, default 2(d+1)")
    common.add_argument("--value-transform", dest="value_transform", help="none or median (rbf only)")
    common.add_argument("--config", help="JSON file of settings; flags override it")

    run = sub.add_parser("run", parents=[common], help="run one method")
    run.add_argument("--method", help=", ".join(METHODS))
    run.add_argument("--out", dest="output_path", help="trace CSV path; the summary goes next to it as .json")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", parents=[common], help="run all methods with a shared seed and budget")
    cmp_.add_argument("--out", dest="output_path", help="output directory")
    cmp_.set_defaults(func=cmd_compare)

    probs = sub.add_parser("problems", help="list builtin problems")
    probs.set_defaults(func=cmd_problems)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("GOP_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise ConfigError("GOP_LOG", f"expected one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        _setup_logging()
        return args.func(args)
    except ConfigError as exc:
        print(f"gop: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
