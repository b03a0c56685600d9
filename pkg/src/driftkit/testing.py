"""Resampling p-values for the five shift hypotheses.

Each p-value compares the noisy observed statistic ``T0`` with ``B`` noisy
statistics of modified test sets and returns ``(1 + #{j: T0 <= Tj}) / (B + 1)``.
Modifications are global permutations of the origin column (D, F, R), origin
permutations within label levels (C1), or label redraws from a conditional
model for the target rows (C2).

Random draws come from one generator per call, in this order: the ``B + 1``
tie-break noises, then the ``B`` modifications as one batch. Replicate ``j``
is row ``j`` of each batch, so replicate results do not depend on evaluation
order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import CLASSIFICATION, AugmentedDataset
from .divergence import ShiftStatistics
from .errors import UsageError
from .model import ConditionalModel, sample_conditional

DEFAULT_NOISE_VARIANCE = 1e-10
DEFAULT_B = 100


class Hypothesis(str, enum.Enum):
    TOTAL = "D"
    FEATURE = "F"
    RESPONSE = "R"
    COND1 = "C1"
    COND2 = "C2"

    @property
    def description(self) -> str:
        return {
            "D": "total dataset shift (joint of X, Y)",
            "F": "feature shift (marginal of X)",
            "R": "response shift (marginal of Y)",
            "C1": "conditional shift type 1 (X given Y)",
            "C2": "conditional shift type 2 (Y given X)",
        }[self.value]


ALL_HYPOTHESES = tuple(Hypothesis)


def parse_hypotheses(text) -> tuple[Hypothesis, ...]:
    """Parse ``"D,F,C2"`` (or an iterable) into hypotheses in canonical order."""
    items = text.split(",") if isinstance(text, str) else list(text)
    try:
        chosen = {Hypothesis(str(getattr(s, "value", s)).strip().upper()) for s in items if str(s).strip()}
    except ValueError as exc:
        raise UsageError(f"unknown hypothesis in {text!r}; choose from D,F,R,C1,C2") from exc
    if not chosen:
        raise UsageError("no hypotheses selected")
    return tuple(h for h in ALL_HYPOTHESES if h in chosen)


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    hypothesis: Hypothesis
    statistic: float
    p_value: float
    B: int
    noise_variance: float
    seed: int | None = None

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha


def rank_p_value(t0: float, t_rep) -> float:
    t_rep = np.asarray(t_rep, dtype=float)
    return float((1 + np.count_nonzero(t0 <= t_rep)) / (t_rep.size + 1))


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _origin(test) -> np.ndarray:
    return np.asarray(test.origin if isinstance(test, AugmentedDataset) else test)


def permute_global(test, rng, size: int | None = None) -> np.ndarray:
    """Randomly permuted origin column; rows now equal to 2 form the modified
    target subset. With ``size`` returns a ``(size, n)`` batch."""
    z = _origin(test)
    g = _rng(rng)
    if size is None:
        return g.permutation(z)
    return g.permuted(np.broadcast_to(z, (size, z.size)).copy(), axis=1)


def permute_local(test, rng, levels=None, size: int | None = None) -> np.ndarray:
    """Origin column permuted independently inside each label level."""
    z = _origin(test)
    if levels is None:
        if not isinstance(test, AugmentedDataset) or test.task != CLASSIFICATION:
            raise UsageError("local permutation needs discrete labels or explicit (binned) levels")
        levels = test.labels
    levels = np.asarray(levels)
    if levels.shape != z.shape:
        raise UsageError("one level per test row required")
    g = _rng(rng)
    out = np.broadcast_to(z, (size or 1, z.size)).copy()
    for level in np.unique(levels):
        idx = np.flatnonzero(levels == level)
        if idx.size > 1:
            out[:, idx] = g.permuted(out[:, idx], axis=1)
    return out[0] if size is None else out


def crt_resample(test: AugmentedDataset, conditional: ConditionalModel, rng,
                 size: int | None = None) -> np.ndarray:
    """Labels of the test set with every target row's label redrawn from
    ``conditional`` given its features; source rows and all features are
    left untouched."""
    g = _rng(rng)
    target = np.flatnonzero(test.origin == 2)
    x = test.features[target]
    reps = size or 1
    out = np.broadcast_to(test.labels, (reps, len(test))).astype(
        float if conditional.kind == "gaussian" else test.labels.dtype)
    draws = sample_conditional(conditional, np.tile(x, (reps, 1)), g)
    out[:, target] = np.asarray(draws).reshape(reps, target.size)
    return out[0] if size is None else out


StatFn = Callable[[np.ndarray, "np.ndarray | None"], np.ndarray]


def statistic_for(stats: ShiftStatistics, hypothesis: Hypothesis) -> StatFn:
    return {
        Hypothesis.TOTAL: stats.kl_joint,
        Hypothesis.FEATURE: stats.kl_x,
        Hypothesis.RESPONSE: stats.kl_y,
        Hypothesis.COND1: stats.kl_x_given_y,
        Hypothesis.COND2: stats.kl_y_given_x,
    }[Hypothesis(hypothesis)]


def p_value(stat_fn: StatFn, test: AugmentedDataset, hypothesis: Hypothesis, B: int = DEFAULT_B,
            noise_variance: float = DEFAULT_NOISE_VARIANCE, rng=None,
            conditional: ConditionalModel | None = None, levels=None, seed: int | None = None) -> TestResult:
    """Resampling p-value for one hypothesis.

    ``stat_fn(z, labels)`` evaluates the statistic for a batch of modified
    test sets (see :class:`~driftkit.divergence.ShiftStatistics`). ``levels``
    overrides the label levels used by the local permutation, e.g. binned
    continuous labels.
    """
    hypothesis = Hypothesis(hypothesis)
    if B < 1:
        raise UsageError("B must be at least 1")
    if not noise_variance > 0:
        raise UsageError("noise variance must be positive")
    if hypothesis is Hypothesis.COND1 and levels is None and test.task != CLASSIFICATION:
        raise UsageError("C1 needs discrete labels; bin continuous labels first")
    if hypothesis is Hypothesis.COND2 and conditional is None:
        raise UsageError("C2 needs a fitted conditional label model")
    g = _rng(rng)
    noise = g.normal(0.0, np.sqrt(noise_variance), B + 1)
    labels = None
    if hypothesis is Hypothesis.COND1:
        z = permute_local(test, g, levels, size=B)
    elif hypothesis is Hypothesis.COND2:
        z = np.broadcast_to(test.origin, (B, len(test)))
        labels = crt_resample(test, conditional, g, size=B)
    else:
        z = permute_global(test, g, size=B)
    observed = float(stat_fn(test.origin[None, :], None)[0])
    replicates = np.asarray(stat_fn(z, labels), dtype=float) + noise[1:]
    return TestResult(hypothesis, observed, rank_p_value(observed + noise[0], replicates), B,
                      noise_variance, seed)
