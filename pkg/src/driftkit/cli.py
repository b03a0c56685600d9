"""Command line entry point: ``driftkit run | synth | power``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DataError, DriftkitError, UsageError
from .pipeline import RunConfig, render_summary, report_json, run, write_report
from .synth import Experiment1Params, Experiment2Params, estimate_power, power_grid, write_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# config-file / flag key -> RunConfig field
_RUN_KEYS = {
    "source": ("source_path", str),
    "target": ("target_path", str),
    "label": ("label_column", str),
    "task": ("task", str),
    "test-frac": ("test_fraction", float),
    "B": ("B", int),
    "alpha": ("alpha", float),
    "seed": ("seed", int),
    "bins": ("num_bins", int),
    "l2": ("l2", float),
    "shifts": ("hypotheses", str),
    "noise-variance": ("noise_variance", float),
    "y-estimator": ("y_estimator", str),
}

_PARAM_ALIASES = {
    "δ": "delta", "delta": "delta",
    "γ": "gamma", "gamma": "gamma",
    "λ": "lam", "lambda": "lam", "lam": "lam",
    "θ": "theta", "theta": "theta",
    "d": "d", "pad": "pad_dims", "pad_dims": "pad_dims",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_config_file(path) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key == "out":
            values["out"] = value
            continue
        if key not in _RUN_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _run_config(args) -> tuple[RunConfig, str | None]:
    merged: dict[str, str] = {}
    if args.config:
        merged.update(read_config_file(args.config))
    for key in list(_RUN_KEYS) + ["out"]:
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            merged[key] = value
    kwargs = {}
    for key, value in merged.items():
        if key == "out":
            continue
        name, cast = _RUN_KEYS[key]
        try:
            kwargs[name] = cast(value)
        except ValueError:
            raise UsageError(f"bad value for {key}: {value!r}") from None
    return RunConfig(**kwargs), merged.get("out")


def _parse_params(text: str | None, experiment: int, n: int):
    kwargs = {"n": n}
    for item in (text or "").split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise UsageError(f"bad parameter {item!r}; expected name=value")
        name, value = (s.strip() for s in item.split("=", 1))
        if name not in _PARAM_ALIASES:
            raise UsageError(f"unknown parameter {name!r}")
        field = _PARAM_ALIASES[name]
        kwargs[field] = int(value) if field in ("d", "pad_dims") else float(value)
    cls = Experiment1Params if experiment == 1 else Experiment2Params
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise UsageError(f"parameter not valid for experiment {experiment}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="driftkit", description="Detect and test five types of dataset shift.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="test source vs target CSV files")
    r.add_argument("--config", help="key=value config file; flags override it")
    r.add_argument("--source")
    r.add_argument("--target")
    r.add_argument("--label")
    r.add_argument("--task", choices=["classification", "regression"])
    r.add_argument("--test-frac", dest="test_frac")
    r.add_argument("--B", dest="B")
    r.add_argument("--alpha")
    r.add_argument("--seed")
    r.add_argument("--bins")
    r.add_argument("--l2")
    r.add_argument("--shifts", help="comma list from D,F,R,C1,C2")
    r.add_argument("--noise-variance", dest="noise_variance")
    r.add_argument("--y-estimator", dest="y_estimator", choices=["plugin", "classifier"])
    r.add_argument("--out", help="write the JSON report here (default: stdout)")
    r.add_argument("--summary", action="store_true", help="print a text table to stdout")

    s = sub.add_parser("synth", help="write synthetic source/target CSVs")
    s.add_argument("--experiment", type=int, choices=[1, 2], required=True)
    s.add_argument("--params", help="e.g. delta=0.1,gamma=0 or lambda=1,theta=0,pad=9")
    s.add_argument("--n", type=int, default=2500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-prefix", default="")

    w = sub.add_parser("power", help="Monte Carlo power estimate, one JSON line per test")
    w.add_argument("--experiment", type=int, choices=[1, 2], required=True)
    w.add_argument("--hypothesis", default="D,F,R,C1,C2")
    w.add_argument("--params")
    w.add_argument("--n", type=int, default=2500, help="train and test rows per population")
    w.add_argument("--mc", type=int, default=100)
    w.add_argument("--B", type=int, default=100)
    w.add_argument("--alpha", type=float, default=0.05)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--true-conditional", action="store_true",
                   help="use the exact null label model for C2")
    w.add_argument("--grid", type=int, default=0,
                   help="evaluate a grid x grid power surface instead of one point")
    return p


def _cmd_run(args) -> int:
    config, out = _run_config(args)
    report = run(config)
    if out:
        write_report(report, out)
    elif not args.summary:
        sys.stdout.write(report_json(report))
    if args.summary:
        print(render_summary(report))
    return EXIT_OK


def _cmd_synth(args) -> int:
    params = _parse_params(args.params, args.experiment, args.n)
    for path in write_experiment(params, args.seed, args.out_prefix):
        print(path)
    return EXIT_OK


def _cmd_power(args) -> int:
    params = _parse_params(args.params, args.experiment, args.n)
    task = "classification" if args.experiment == 1 else "regression"
    config = RunConfig(task=task, test_fraction=0.5, B=args.B, alpha=args.alpha)
    if args.grid:
        half = 0.5 if args.experiment == 1 else 1.0
        axis = axis1 = np.linspace(-half, half, args.grid)
        if args.experiment == 1:
            # 0.5 + delta must stay inside (0, 1)
            axis1 = np.clip(axis, -0.45, 0.45)

            def make(a, b):
                return Experiment1Params(a, b, params.d, params.n)
        else:
            def make(a, b):
                return Experiment2Params(a, b, params.pad_dims, params.n)
        for row in power_grid(make, axis1, axis, args.hypothesis, args.mc, config, args.seed):
            print(json.dumps(row))
        return EXIT_OK
    conditional = "true" if args.true_conditional else None
    for est in estimate_power(params, args.hypothesis, args.mc, config, args.seed, conditional).values():
        print(json.dumps(est.as_dict()))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return {"run": _cmd_run, "synth": _cmd_synth, "power": _cmd_power}[args.command](args)
    except DataError as exc:
        print(f"driftkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, DriftkitError) as exc:
        print(f"driftkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"driftkit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
