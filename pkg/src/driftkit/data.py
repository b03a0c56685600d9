"""Sample ingestion, the origin-augmented pooled dataset, splitting and label binning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BinningError, ConfigurationError, DataError, IngestionError, UsageError

CLASSIFICATION = "classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)


def _check_task(task: str) -> str:
    if task not in TASKS:
        raise UsageError(f"task must be one of {TASKS}, got {task!r}")
    return task


@dataclass(frozen=True)
class Encoding:
    """Column layout shared by the source and target files.

    ``categories`` maps each categorical feature column to its levels in
    first-appearance order; ``label_classes`` does the same for a
    classification label.
    """

    feature_columns: tuple[str, ...]
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)
    label_classes: tuple[str, ...] = ()

    @property
    def feature_names(self) -> list[str]:
        names = []
        for col in self.feature_columns:
            if col in self.categories:
                names.extend(f"{col}={level}" for level in self.categories[col])
            else:
                names.append(col)
        return names

    @property
    def dim(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True, eq=False)
class LabeledSamples:
    """A batch of (feature vector, label) pairs stored column-wise.

    Classification labels are integer class ids in ``range(num_classes)``;
    regression labels are floats.
    """

    features: np.ndarray
    labels: np.ndarray
    task: str = CLASSIFICATION
    num_classes: int = 0
    encoding: Encoding | None = None

    def __post_init__(self):
        _check_task(self.task)
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError("features must be a 2-D array")
        if self.task == CLASSIFICATION:
            y = np.asarray(self.labels)
            if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("classification labels must be integer class ids")
            y = y.astype(np.int64)
            k = self.num_classes or (int(y.max()) + 1 if y.size else 0)
            if y.size and (y.min() < 0 or y.max() >= k):
                raise DataError(f"class ids must lie in [0, {k})")
            object.__setattr__(self, "num_classes", k)
        else:
            y = np.asarray(self.labels, dtype=float)
            object.__setattr__(self, "num_classes", 0)
        if y.shape != (x.shape[0],):
            raise DataError(f"{x.shape[0]} feature rows but {y.shape} labels")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise DataError("features and labels must be finite (no NaN/Inf)")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


# ---------------------------------------------------------------------------
# CSV ingestion


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_table(path: Path, label_column: str) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise IngestionError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestionError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if label_column not in header:
        raise IngestionError(f"{path}: label column {label_column!r} not in header {header}")
    if not body:
        raise IngestionError(f"{path}: no data rows")
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise IngestionError(f"{path}: row {i} has {len(r)} cells, header has {len(header)}")
    return header, [[c.strip() for c in r] for r in body]


def _infer_encoding(
    tables: Sequence[tuple[Path, list[str], list[list[str]]]], label_column: str, task: str
) -> Encoding:
    path0, header, body0 = tables[0]
    for path, h, _ in tables[1:]:
        if h != header:
            raise IngestionError(f"{path}: header {h} differs from {path0}: {header}")
    feature_columns = tuple(c for c in header if c != label_column)
    categories: dict[str, tuple[str, ...]] = {}
    for col in feature_columns:
        j = header.index(col)
        # Column kind is decided by the first data cell; later cells must agree.
        if _is_number(body0[0][j]):
            continue
        seen: dict[str, None] = {}
        for _, _, body in tables:
            for r in body:
                seen.setdefault(r[j], None)
        categories[col] = tuple(seen)
    label_classes: tuple[str, ...] = ()
    if task == CLASSIFICATION:
        j = header.index(label_column)
        seen = {}
        for _, _, body in tables:
            for r in body:
                seen.setdefault(r[j], None)
        label_classes = tuple(seen)
    return Encoding(feature_columns, categories, label_classes)


def _encode(path: Path, header: list[str], body: list[list[str]], label_column: str,
            task: str, enc: Encoding) -> LabeledSamples:
    n = len(body)
    x = np.empty((n, enc.dim))
    y = np.empty(n, dtype=np.int64 if task == CLASSIFICATION else float)
    label_idx = header.index(label_column)
    class_ids = {c: i for i, c in enumerate(enc.label_classes)}
    col_idx = [header.index(c) for c in enc.feature_columns]
    for i, r in enumerate(body):
        line = i + 2  # header is line 1
        out = 0
        for col, j in zip(enc.feature_columns, col_idx):
            cell = r[j]
            if col in enc.categories:
                levels = enc.categories[col]
                if cell == "":
                    raise IngestionError(f"{path}: row {line}, column {col!r}: missing value")
                if cell not in levels:
                    raise IngestionError(f"{path}: row {line}, column {col!r}: unknown category {cell!r}")
                x[i, out:out + len(levels)] = 0.0
                x[i, out + levels.index(cell)] = 1.0
                out += len(levels)
            else:
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {line}, column {col!r}: non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise IngestionError(f"{path}: row {line}, column {col!r}: non-finite value {cell!r}")
                x[i, out] = value
                out += 1
        cell = r[label_idx]
        if task == CLASSIFICATION:
            if cell == "":
                raise IngestionError(f"{path}: row {line}, column {label_column!r}: missing label")
            y[i] = class_ids[cell]
        else:
            try:
                value = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: row {line}, column {label_column!r}: non-numeric label {cell!r}"
                ) from None
            if not math.isfinite(value):
                raise IngestionError(f"{path}: row {line}, column {label_column!r}: non-finite label {cell!r}")
            y[i] = value
    return LabeledSamples(x, y, task, num_classes=len(enc.label_classes), encoding=enc)


def load_csv(path, label_column: str, task: str = CLASSIFICATION,
             encoding: Encoding | None = None) -> LabeledSamples:
    """Read one population from a CSV file.

    Categorical feature columns are one-hot encoded, levels ordered by first
    appearance. Pass ``encoding`` to reuse a layout fitted elsewhere.
    """
    _check_task(task)
    path = Path(path)
    header, body = _read_table(path, label_column)
    enc = encoding or _infer_encoding([(path, header, body)], label_column, task)
    return _encode(path, header, body, label_column, task, enc)


def load_pair(source_path, target_path, label_column: str,
              task: str = CLASSIFICATION) -> tuple[LabeledSamples, LabeledSamples]:
    """Read source and target with one encoding fitted on their union."""
    _check_task(task)
    tables = []
    for p in (Path(source_path), Path(target_path)):
        header, body = _read_table(p, label_column)
        tables.append((p, header, body))
    enc = _infer_encoding(tables, label_column, task)
    source, target = (_encode(p, h, b, label_column, task, enc) for p, h, b in tables)
    return source, target


def write_csv(samples: LabeledSamples, path, label_column: str = "y",
              feature_names: Sequence[str] | None = None) -> None:
    names = list(feature_names or [f"x{j + 1}" for j in range(samples.dim)])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + [label_column])
        for row, label in zip(samples.features, samples.labels):
            w.writerow([repr(float(v)) for v in row] + [str(label) if samples.task == CLASSIFICATION else repr(float(label))])


# ---------------------------------------------------------------------------
# augmented dataset and split


@dataclass(frozen=True, eq=False)
class AugmentedDataset:
    """Pooled rows with their origin indicator (1 = source, 2 = target)."""

    features: np.ndarray
    labels: np.ndarray
    origin: np.ndarray
    task: str
    num_classes: int = 0

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.int8)
        if not np.isin(origin, (1, 2)).all():
            raise DataError("origin must be 1 or 2")
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)

    def __len__(self) -> int:
        return self.origin.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.origin == 1))

    @property
    def n2(self) -> int:
        return int(np.count_nonzero(self.origin == 2))

    def take(self, idx) -> "AugmentedDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return AugmentedDataset(self.features[idx], self.labels[idx], self.origin[idx],
                                self.task, self.num_classes)

    def population(self, z: int) -> "AugmentedDataset":
        return self.take(np.flatnonzero(self.origin == z))


@dataclass(frozen=True, eq=False)
class SplitDatasets:
    train: AugmentedDataset
    test: AugmentedDataset
    train_index: np.ndarray
    test_index: np.ndarray

    @property
    def n_tr_1(self) -> int:
        return self.train.n1

    @property
    def n_tr_2(self) -> int:
        return self.train.n2


def augment(source: LabeledSamples, target: LabeledSamples) -> AugmentedDataset:
    if len(source) == 0 or len(target) == 0:
        raise ConfigurationError("source and target must both be non-empty")
    if source.dim != target.dim:
        raise ConfigurationError(f"feature dimension mismatch: source {source.dim}, target {target.dim}")
    if source.task != target.task:
        raise ConfigurationError("source and target tasks differ")
    k = 0
    if source.task == CLASSIFICATION:
        k = max(source.num_classes, target.num_classes)
        missing = np.setdiff1d(np.unique(target.labels), np.unique(source.labels))
        if missing.size:
            raise DataError(f"target labels {missing.tolist()} never occur in the source sample")
    return AugmentedDataset(
        np.vstack([source.features, target.features]),
        np.concatenate([source.labels, target.labels]),
        np.concatenate([np.ones(len(source), np.int8), np.full(len(target), 2, np.int8)]),
        source.task,
        k,
    )


def augment_and_split(source: LabeledSamples, target: LabeledSamples,
                      test_fraction: float, seed) -> SplitDatasets:
    """Pool both samples with origin tags and split uniformly at random.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    pooled = augment(source, target)
    n = len(pooled)
    n_test = int(round(test_fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    split = SplitDatasets(pooled.take(train_idx), pooled.take(test_idx), train_idx, test_idx)
    if split.n_tr_1 < 1 or split.n_tr_2 < 1:
        raise ConfigurationError(
            f"split leaves {split.n_tr_1} source and {split.n_tr_2} target training rows; "
            "lower test_fraction"
        )
    if split.test.n2 < 2:
        raise ConfigurationError(
            f"split leaves {split.test.n2} target test rows (need at least 2); raise test_fraction"
        )
    return split


# ---------------------------------------------------------------------------
# binning


@dataclass(frozen=True)
class BinningRule:
    cut_points: tuple[float, ...]

    @property
    def num_bins(self) -> int:
        return len(self.cut_points) + 1


def make_binning(test_labels, num_bins: int = 10) -> BinningRule:
    """Equal-frequency bins from the quantiles of ``test_labels``."""
    if num_bins < 2:
        raise UsageError("num_bins must be at least 2")
    y = np.asarray(test_labels, dtype=float)
    distinct = np.unique(y).size
    if distinct < num_bins:
        raise BinningError(
            f"{distinct} distinct label values cannot fill {num_bins} bins; use fewer bins"
        )
    cuts = np.quantile(y, np.arange(1, num_bins) / num_bins)
    if np.any(np.diff(cuts) <= 0):
        raise BinningError(f"tied label values give repeated quantile cuts for {num_bins} bins; use fewer bins")
    return BinningRule(tuple(float(c) for c in cuts))


def apply_binning(rule: BinningRule, label):
    """Bin index of ``label`` (scalar or array); intervals are [c_{k-1}, c_k)."""
    idx = np.searchsorted(np.asarray(rule.cut_points), label, side="right")
    return int(idx) if np.ndim(idx) == 0 else idx
