"""End-to-end shift detection run and its JSON/text report."""

from __future__ import annotations

import contextlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .data import CLASSIFICATION, REGRESSION, LabeledSamples, apply_binning, augment_and_split, load_pair, make_binning
from .divergence import PLUGIN, KLEstimates, ShiftStatistics, default_y_estimator, fit_ratio_models, plugin_terms
from .errors import ConfigurationError, DriftkitError, UsageError
from .model import DEFAULT_L2, ConditionalModel, fit_conditional
from .ratio import saturation_rate, validation_cross_entropy
from .testing import (ALL_HYPOTHESES, DEFAULT_NOISE_VARIANCE, Hypothesis, p_value, parse_hypotheses,
                      statistic_for)

# order of the child seed streams spawned from the run seed
_STREAMS = ("split", "label_model") + tuple(h.value for h in ALL_HYPOTHESES)
# a single label contributing more than this to the plug-in KL_Y gets a warning
LARGE_PLUGIN_TERM = 0.5


@dataclass(frozen=True)
class RunConfig:
    source_path: str | None = None
    target_path: str | None = None
    label_column: str = "y"
    task: str = CLASSIFICATION
    test_fraction: float = 0.1
    B: int = 100
    alpha: float = 0.05
    seed: int = 0
    num_bins: int = 10
    l2: float = DEFAULT_L2
    hypotheses: tuple[Hypothesis, ...] = ALL_HYPOTHESES
    noise_variance: float = DEFAULT_NOISE_VARIANCE
    y_estimator: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "hypotheses", parse_hypotheses(self.hypotheses))
        except UsageError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigurationError(f"task must be classification or regression, got {self.task!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigurationError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if int(self.B) != self.B or self.B < 1:
            raise ConfigurationError(f"B must be a positive integer, got {self.B}")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.num_bins < 0 or self.num_bins == 1:
            raise ConfigurationError("bins must be 0 (disabled) or at least 2")
        if self.l2 < 0:
            raise ConfigurationError("l2 must be non-negative")
        if not self.noise_variance > 0:
            raise ConfigurationError("noise variance must be positive")
        if self.y_estimator not in (None, "plugin", "classifier"):
            raise ConfigurationError("y_estimator must be plugin or classifier")
        if self.y_estimator == "plugin" and self.task == REGRESSION:
            raise ConfigurationError("the plug-in KL estimator needs a classification task")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hypotheses"] = [h.value for h in self.hypotheses]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class HypothesisOutcome:
    hypothesis: str
    kl: float | None = None
    p_value: float | None = None
    reject: bool | None = None
    statistic: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class ShiftReport:
    estimates: KLEstimates
    results: tuple[HypothesisOutcome, ...]
    diagnostics: dict
    config: dict
    seed: int
    version: str = __version__

    def outcome(self, hypothesis) -> HypothesisOutcome:
        key = Hypothesis(hypothesis).value
        for r in self.results:
            if r.hypothesis == key:
                return r
        raise KeyError(key)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "estimates": self.estimates.as_dict(),
            "results": [asdict(r) for r in self.results],
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShiftReport":
        return cls(
            estimates=KLEstimates(**d["estimates"]),
            results=tuple(HypothesisOutcome(**r) for r in d["results"]),
            diagnostics=d["diagnostics"],
            config=d["config"],
            seed=d["seed"],
            version=d["version"],
        )


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except DriftkitError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _kl_for(estimates: KLEstimates, h: Hypothesis) -> float:
    return {
        Hypothesis.TOTAL: estimates.kl_joint,
        Hypothesis.FEATURE: estimates.kl_x,
        Hypothesis.RESPONSE: estimates.kl_y,
        Hypothesis.COND1: estimates.kl_x_given_y,
        Hypothesis.COND2: estimates.kl_y_given_x,
    }[h]


def detect_shift(source: LabeledSamples, target: LabeledSamples, config: RunConfig | None = None, *,
                 conditional: ConditionalModel | None = None, fitter: Callable | None = None,
                 **overrides) -> ShiftReport:
    """Split, fit, estimate and test on in-memory samples.

    ``conditional`` replaces the label model fitted on the training rows for
    the C2 test (e.g. a known true conditional in simulations); ``fitter``
    swaps the origin classifier (see :func:`driftkit.ratio.fit_ratio`).
    """
    config = replace(config or RunConfig(task=source.task), **overrides)
    if source.task != config.task or target.task != config.task:
        raise ConfigurationError(f"samples are {source.task}/{target.task} but config says {config.task}")
    streams = dict(zip(_STREAMS, np.random.SeedSequence(config.seed).spawn(len(_STREAMS))))
    warnings: list[str] = []

    with _stage("split"):
        split = augment_and_split(source, target, config.test_fraction, streams["split"])
    test = split.test
    y_estimator = config.y_estimator or default_y_estimator(config.task)
    with _stage("fit ratio models"):
        models = fit_ratio_models(split, config.l2, y_estimator, fitter)
    with _stage("estimate divergences"):
        stats = ShiftStatistics(models, test, y_estimator)
        estimates = stats.estimates()

    ce, saturation = {}, {}
    for view, m in models.items():
        ce[view.value] = validation_cross_entropy(m, test)
        saturation[view.value] = saturation_rate(m, test.features, test.labels)
        if not getattr(m.classifier, "converged", True):
            warnings.append(f"{view.value} origin classifier did not converge")
        if saturation[view.value] > 0:
            warnings.append(f"{view.value} log-ratio saturated on {saturation[view.value]:.3%} of test rows")

    terms = None
    if y_estimator == PLUGIN:
        terms = plugin_terms(test.labels[test.origin == 1], test.labels[test.origin == 2])
        for level, t in terms.items():
            if abs(t) > LARGE_PLUGIN_TERM:
                warnings.append(f"label {level} contributes {t:.4f} to the plug-in KL_Y")

    results = []
    for h in config.hypotheses:
        rng = np.random.default_rng(streams[h.value])
        kwargs = {}
        try:
            if h is Hypothesis.COND1 and config.task == REGRESSION:
                if config.num_bins == 0:
                    raise UsageError("C1 with continuous labels needs binning (bins >= 2)")
                rule = make_binning(test.labels, config.num_bins)
                kwargs["levels"] = apply_binning(rule, test.labels)
            elif h is Hypothesis.COND2:
                label_model = conditional
                if label_model is None:
                    label_model = fit_conditional(split.train, config.task, config.l2,
                                                  rng=streams["label_model"])
                    warnings.extend(label_model.warnings)
                kwargs["conditional"] = label_model
            res = p_value(statistic_for(stats, h), test, h, config.B, config.noise_variance, rng,
                          seed=config.seed, **kwargs)
        except DriftkitError as exc:
            results.append(HypothesisOutcome(h.value, kl=_kl_for(estimates, h), error=str(exc)))
            continue
        results.append(HypothesisOutcome(h.value, kl=_kl_for(estimates, h), p_value=res.p_value,
                                         reject=res.reject(config.alpha), statistic=res.statistic))

    diagnostics = {
        "validation_cross_entropy": ce,
        "saturation_rate": saturation,
        "split": {
            "n_train_source": split.n_tr_1,
            "n_train_target": split.n_tr_2,
            "n_test_source": test.n1,
            "n_test_target": test.n2,
        },
        "warnings": warnings,
    }
    if terms is not None:
        diagnostics["plugin_kl_terms"] = {str(k): v for k, v in terms.items()}
    return ShiftReport(estimates, tuple(results), diagnostics, config.to_dict(), config.seed)


def run(config: RunConfig) -> ShiftReport:
    if not config.source_path or not config.target_path:
        raise ConfigurationError("source and target paths are required")
    with _stage("load"):
        source, target = load_pair(config.source_path, config.target_path, config.label_column, config.task)
    return detect_shift(source, target, config)


# ---------------------------------------------------------------------------
# output


def report_json(report: ShiftReport) -> str:
    return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"


def write_report(report: ShiftReport, path) -> None:
    try:
        Path(path).write_text(report_json(report), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path) -> ShiftReport:
    return ShiftReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fmt(v, spec: str) -> str:
    return "-" if v is None else format(v, spec)


def render_summary(report: ShiftReport) -> str:
    rows = [("test", "shift", "KL", "p-value", "decision")]
    alpha = report.config.get("alpha", 0.05)
    for r in report.results:
        if r.error is not None:
            decision = f"error: {r.error}"
        else:
            decision = "reject" if r.reject else "no evidence"
        rows.append((r.hypothesis, Hypothesis(r.hypothesis).description, _fmt(r.kl, ".4f"),
                     _fmt(r.p_value, ".4f"), decision))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row[:4], widths)) + "  " + row[4] for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    lines.append(f"alpha = {alpha}")
    return "\n".join(lines)


def check_decomposition(report_dict: dict) -> bool:
    """Recompute both conditional KLs from the emitted marginals."""
    e = report_dict["estimates"]
    return (e["kl_joint"] - e["kl_y"] == e["kl_x_given_y"]
            and e["kl_joint"] - e["kl_x"] == e["kl_y_given_x"]
            and all(math.isfinite(e[k]) for k in ("kl_joint", "kl_x", "kl_y")))
