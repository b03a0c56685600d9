"""Synthetic shift generators and a Monte Carlo power harness.

Experiment 1 (binary label)::

    source: Y ~ Ber(1/2),         X | Y ~ N(Y * 1_d, I_d)
    target: Y ~ Ber(1/2 + delta), X | Y ~ N((Y + gamma) * 1_d, I_d)

Experiment 2 (continuous label)::

    source: X ~ N(0, 1),      Y | X ~ N(X, 1)
    target: X ~ N(lambda, 1), Y | X ~ N(X + theta, 1)

with ``pad_dims`` independent standard normal columns appended to X in
both populations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .data import CLASSIFICATION, REGRESSION, LabeledSamples, write_csv
from .errors import UsageError
from .model import ConditionalModel, ProbabilisticClassifier, gaussian_conditional
from .pipeline import RunConfig, detect_shift
from .testing import Hypothesis, parse_hypotheses


@dataclass(frozen=True)
class Experiment1Params:
    delta: float = 0.0
    gamma: float = 0.0
    d: int = 3
    n: int = 2500

    def __post_init__(self):
        if not 0.0 < 0.5 + self.delta < 1.0:
            raise UsageError(f"0.5 + delta must lie in (0, 1), got delta={self.delta}")
        if self.d < 1 or self.n < 1:
            raise UsageError("d and n must be positive")


@dataclass(frozen=True)
class Experiment2Params:
    lam: float = 0.0
    theta: float = 0.0
    pad_dims: int = 0
    n: int = 2500

    def __post_init__(self):
        if self.pad_dims < 0 or self.n < 1:
            raise UsageError("pad_dims must be >= 0 and n positive")


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _check_population(population: int) -> None:
    if population not in (1, 2):
        raise UsageError("population must be 1 (source) or 2 (target)")


def gen_experiment1(params: Experiment1Params, population: int, rng, n: int | None = None) -> LabeledSamples:
    _check_population(population)
    g = _rng(rng)
    n = params.n if n is None else n
    p1 = 0.5 if population == 1 else 0.5 + params.delta
    shift = 0.0 if population == 1 else params.gamma
    y = (g.random(n) < p1).astype(np.int64)
    x = (y + shift)[:, None] + g.standard_normal((n, params.d))
    return LabeledSamples(x, y, CLASSIFICATION, num_classes=2)


def gen_experiment2(params: Experiment2Params, population: int, rng, n: int | None = None) -> LabeledSamples:
    _check_population(population)
    g = _rng(rng)
    n = params.n if n is None else n
    mu, offset = (0.0, 0.0) if population == 1 else (params.lam, params.theta)
    x = mu + g.standard_normal(n)
    y = x + offset + g.standard_normal(n)
    pad = g.standard_normal((n, params.pad_dims))
    return LabeledSamples(np.column_stack([x, pad]), y, REGRESSION)


def generator_for(params) -> Callable:
    if isinstance(params, Experiment1Params):
        return gen_experiment1
    if isinstance(params, Experiment2Params):
        return gen_experiment2
    raise UsageError(f"unknown parameter type {type(params).__name__}")


def source_conditional(params) -> ConditionalModel:
    """The exact source label model ``P(Y | X)``, which is also the target's
    when there is no conditional shift."""
    if isinstance(params, Experiment1Params):
        # log-odds of Y=1 given x: sum(x) - d/2
        w = np.r_[-params.d / 2.0, np.ones(params.d)][None, :]
        return ConditionalModel("categorical", classifier=ProbabilisticClassifier(w, (0, 1), 0.0))
    return gaussian_conditional(np.r_[0.0, 1.0, np.zeros(params.pad_dims)], 1.0)


def write_experiment(params, seed: int, out_prefix: str) -> tuple[Path, Path]:
    """Draw both populations and write ``<prefix>source.csv`` / ``<prefix>target.csv``."""
    gen = generator_for(params)
    s1, s2 = np.random.SeedSequence(seed).spawn(2)
    paths = (Path(f"{out_prefix}source.csv"), Path(f"{out_prefix}target.csv"))
    paths[0].parent.mkdir(parents=True, exist_ok=True)
    for pop, ss, path in zip((1, 2), (s1, s2), paths):
        write_csv(gen(params, pop, np.random.default_rng(ss)), path)
    return paths


@dataclass(frozen=True)
class PowerEstimate:
    hypothesis: Hypothesis
    power: float
    se: float
    rejections: int
    n_mc: int
    errors: int = 0

    def as_dict(self) -> dict:
        return {"hypothesis": self.hypothesis.value, "power": self.power, "se": self.se,
                "rejections": self.rejections, "n_mc": self.n_mc, "errors": self.errors}


def estimate_power(params, hypotheses: Iterable | str = "D,F,R,C1,C2", n_mc: int = 100,
                   config: RunConfig | None = None, seed: int = 0, conditional=None,
                   generator: Callable | None = None,
                   on_report: Callable | None = None) -> dict[Hypothesis, PowerEstimate]:
    """Rejection frequency of each hypothesis over ``n_mc`` fresh simulations.

    Every repetition draws ``2 * params.n`` rows per population and splits
    them in half, so train and test sets hold about ``params.n`` rows per
    population. ``conditional`` fixes the C2 label model (a
    :class:`ConditionalModel`, or ``"true"`` for :func:`source_conditional`).
    Repetition ``j`` is seeded from the ``j``-th pair of words of the seed
    sequence, so results do not depend on execution order. ``on_report`` is
    called with every repetition's :class:`~driftkit.pipeline.ShiftReport`.
    """
    if n_mc < 1:
        raise UsageError("n_mc must be at least 1")
    hyps = parse_hypotheses(hypotheses)
    gen = generator or generator_for(params)
    task = CLASSIFICATION if isinstance(params, Experiment1Params) else REGRESSION
    config = replace(config or RunConfig(task=task, test_fraction=0.5), task=task, hypotheses=hyps)
    if isinstance(conditional, str):
        if conditional != "true":
            raise UsageError("conditional must be a ConditionalModel or 'true'")
        conditional = source_conditional(params)
    words = np.random.SeedSequence(seed).generate_state(2 * n_mc, dtype=np.uint32)
    rejections = dict.fromkeys(hyps, 0)
    errors = dict.fromkeys(hyps, 0)
    for j in range(n_mc):
        data_rng = np.random.default_rng(int(words[2 * j]))
        source = gen(params, 1, data_rng, n=2 * params.n)
        target = gen(params, 2, data_rng, n=2 * params.n)
        report = detect_shift(source, target, config, seed=int(words[2 * j + 1]), conditional=conditional)
        if on_report is not None:
            on_report(report)
        for r in report.results:
            h = Hypothesis(r.hypothesis)
            if r.error is not None:
                errors[h] += 1
            elif r.reject:
                rejections[h] += 1
    out = {}
    for h in hyps:
        power = rejections[h] / n_mc
        out[h] = PowerEstimate(h, power, math.sqrt(power * (1 - power) / n_mc), rejections[h], n_mc, errors[h])
    return out


def power_grid(make_params: Callable[[float, float], object], axis1, axis2, hypotheses="D,F,R,C1,C2",
               n_mc: int = 100, config: RunConfig | None = None, seed: int = 0) -> list[dict]:
    """Power surface over a grid, one record per (grid point, hypothesis).

    Defaults in the CLI: 5 x 5 points over [-1, 1]^2 for experiment 2 and
    [-0.5, 0.5]^2 for experiment 1, with the delta axis pulled in to +-0.45 so
    that 0.5 + delta stays inside (0, 1).
    """
    rows = []
    for i, a in enumerate(axis1):
        for k, b in enumerate(axis2):
            res = estimate_power(make_params(a, b), hypotheses, n_mc, config, seed=seed + 1000 * i + k)
            for est in res.values():
                rows.append({"param1": float(a), "param2": float(b), **est.as_dict()})
    return rows
