"""KL divergence estimates for the five shift types."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .data import CLASSIFICATION, AugmentedDataset, SplitDatasets
from .errors import SupportError, UsageError
from .model import DEFAULT_L2
from .ratio import FeatureView, RatioModel, fit_ratio, log_ratio

PLUGIN = "plugin"
CLASSIFIER = "classifier"


@dataclass(frozen=True)
class KLEstimates:
    kl_joint: float
    kl_x: float
    kl_y: float
    kl_x_given_y: float
    kl_y_given_x: float
    y_estimator: str

    @classmethod
    def from_marginals(cls, kl_joint: float, kl_x: float, kl_y: float, y_estimator: str) -> "KLEstimates":
        kl_joint, kl_x, kl_y = float(kl_joint), float(kl_x), float(kl_y)
        return cls(kl_joint, kl_x, kl_y, kl_joint - kl_y, kl_joint - kl_x, y_estimator)

    def as_dict(self) -> dict:
        return asdict(self)


def estimate_kl(model: RatioModel, test_target: AugmentedDataset) -> float:
    """Average estimated log-ratio over target test rows (may be negative)."""
    rows = test_target.population(2) if np.any(test_target.origin == 1) else test_target
    if len(rows) == 0:
        raise UsageError("no target test rows to average over")
    return float(np.mean(log_ratio(model, rows.features, rows.labels)))


def _plugin_from_counts(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Row-wise plug-in KL(p2 || p1) from label counts; inf where p2 > 0 = p1."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    p1 = c1 / c1.sum(axis=-1, keepdims=True)
    p2 = c2 / c2.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p2 > 0, p2 * (np.log(p2) - np.log(p1)), 0.0)
    return terms.sum(axis=-1)


def plugin_kl_y(test_source_labels, test_target_labels) -> float:
    """Plug-in KL between target and source label frequencies."""
    y1 = np.asarray(test_source_labels)
    y2 = np.asarray(test_target_labels)
    if y1.size == 0 or y2.size == 0:
        raise UsageError("both label samples must be non-empty")
    unseen = np.setdiff1d(np.unique(y2), np.unique(y1))
    if unseen.size:
        raise SupportError(f"target test label(s) {unseen.tolist()} absent from the source test labels")
    levels, codes = np.unique(np.concatenate([y1, y2]), return_inverse=True)
    c1 = np.bincount(codes[: y1.size], minlength=levels.size)
    c2 = np.bincount(codes[y1.size:], minlength=levels.size)
    return float(_plugin_from_counts(c1, c2))


def plugin_terms(test_source_labels, test_target_labels) -> dict:
    """Per-label contributions ``p2 * log(p2 / p1)`` to the plug-in estimate."""
    y1 = np.asarray(test_source_labels)
    y2 = np.asarray(test_target_labels)
    levels, codes = np.unique(np.concatenate([y1, y2]), return_inverse=True)
    p1 = np.bincount(codes[: y1.size], minlength=levels.size) / y1.size
    p2 = np.bincount(codes[y1.size:], minlength=levels.size) / y2.size
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p2 > 0, p2 * (np.log(p2) - np.log(p1)), 0.0)
    return {level.item(): float(t) for level, t in zip(levels, terms)}


def default_y_estimator(task: str) -> str:
    return PLUGIN if task == CLASSIFICATION else CLASSIFIER


def fit_ratio_models(split: SplitDatasets, l2: float = DEFAULT_L2, y_estimator: str | None = None,
                     fitter: Callable | None = None, reduce_x: bool = False) -> dict[FeatureView, RatioModel]:
    """Fit the joint, X and (unless the plug-in is used) Y ratio models on train."""
    y_estimator = y_estimator or default_y_estimator(split.train.task)
    models = {FeatureView.X: fit_ratio(split.train, FeatureView.X, l2, fitter)}
    reducer = models[FeatureView.X] if reduce_x else None
    models[FeatureView.JOINT] = fit_ratio(split.train, FeatureView.JOINT, l2, fitter, x_reducer=reducer)
    if y_estimator == CLASSIFIER:
        models[FeatureView.Y] = fit_ratio(split.train, FeatureView.Y, l2, fitter)
    return {v: models[v] for v in (FeatureView.JOINT, FeatureView.X, FeatureView.Y) if v in models}


class ShiftStatistics:
    """Test-set KL statistics, evaluated for batches of modified test sets.

    A modified test set is described by an origin vector ``z`` over all test
    rows (rows with ``z == 2`` form the target subset) and optionally a
    replacement label vector. Both arguments to the ``kl_*`` methods are
    2-D: one row per replicate. Log-ratios of unmodified rows are cached, so
    permutation replicates cost one masked mean each.
    """

    def __init__(self, models: dict[FeatureView, RatioModel], test: AugmentedDataset,
                 y_estimator: str | None = None):
        self.models = models
        self.test = test
        self.y_estimator = y_estimator or (CLASSIFIER if FeatureView.Y in models else PLUGIN)
        if self.y_estimator == PLUGIN and test.task != CLASSIFICATION:
            raise UsageError("the plug-in KL estimator needs discrete labels")
        if self.y_estimator == CLASSIFIER and FeatureView.Y not in models:
            raise UsageError("classifier-based KL_Y needs a Y-view ratio model")
        self._cache = {
            view: m.log_ratio_projected(m.project(test.features, test.labels)) for view, m in models.items()
        }
        if test.task == CLASSIFICATION:
            self._levels, self._codes = np.unique(test.labels, return_inverse=True)

    @property
    def origin(self) -> np.ndarray:
        return self.test.origin

    def _mean_log_ratio(self, view: FeatureView, z: np.ndarray, labels: np.ndarray | None) -> np.ndarray:
        mask = z == 2
        counts = mask.sum(axis=1)
        if labels is None or view is FeatureView.X:
            # row-wise sum rather than a mat-vec: its rounding does not depend on the batch size
            return np.where(mask, self._cache[view], 0.0).sum(axis=1) / counts
        b, i = np.nonzero(mask)
        model = self.models[view]
        lr = model.log_ratio_projected(model.project(self.test.features[i], labels[b, i]))
        return np.bincount(b, weights=lr, minlength=z.shape[0]) / counts

    def kl_joint(self, z, labels=None) -> np.ndarray:
        return self._mean_log_ratio(FeatureView.JOINT, z, labels)

    def kl_x(self, z, labels=None) -> np.ndarray:
        return self._mean_log_ratio(FeatureView.X, z, None)

    def kl_y(self, z, labels=None) -> np.ndarray:
        if self.y_estimator == CLASSIFIER:
            return self._mean_log_ratio(FeatureView.Y, z, labels)
        if labels is None:
            codes = np.broadcast_to(self._codes, z.shape)
            k = self._levels.size
        else:
            levels, codes = np.unique(labels, return_inverse=True)
            codes = codes.reshape(z.shape)
            k = levels.size
        rows = np.arange(z.shape[0])[:, None] * k
        flat = (rows + codes).ravel()
        size = z.shape[0] * k
        c1 = np.bincount(flat, weights=(z == 1).ravel(), minlength=size).reshape(-1, k)
        c2 = np.bincount(flat, weights=(z == 2).ravel(), minlength=size).reshape(-1, k)
        return _plugin_from_counts(c1, c2)

    def kl_x_given_y(self, z, labels=None) -> np.ndarray:
        return self.kl_joint(z, labels) - self.kl_y(z, labels)

    def kl_y_given_x(self, z, labels=None) -> np.ndarray:
        return self.kl_joint(z, labels) - self.kl_x(z, labels)

    def estimates(self) -> KLEstimates:
        z = self.origin[None, :]
        if self.y_estimator == PLUGIN:
            # raises on unsupported target labels; the batch path would return inf
            plugin_kl_y(self.test.labels[self.origin == 1], self.test.labels[self.origin == 2])
        return KLEstimates.from_marginals(self.kl_joint(z)[0], self.kl_x(z)[0], self.kl_y(z)[0],
                                          self.y_estimator)


def compute_all(split: SplitDatasets, l2: float = DEFAULT_L2, y_estimator: str | None = None,
                fitter: Callable | None = None) -> KLEstimates:
    models = fit_ratio_models(split, l2, y_estimator, fitter)
    return ShiftStatistics(models, split.test, y_estimator).estimates()
