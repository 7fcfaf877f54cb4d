"""Dataset carriers, CSV ingest/export, stratified folds and bootstrap resampling.

Labels are stored as ``int8`` with ``BAD = 1`` (the positive class) and
``GOOD = 0``, so every score produced in this package is a predicted
probability of default: higher means riskier.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

GOOD = 0
BAD = 1


class DataError(ValueError):
    """Raised for malformed datasets or CSV input."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CreditDataset:
    """Feature matrix with case ids and optional Good/Bad labels.

    Arrays are copied and made read-only on construction.
    """

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        ids = np.asarray(self.ids).astype(str)
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if ids.ndim != 1 or len(ids) != X.shape[0]:
            raise DataError(f"{len(ids)} ids for {X.shape[0]} feature rows")
        if len(np.unique(ids)) != len(ids):
            raise DataError("case ids are not unique")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "ids", _frozen(ids))
        object.__setattr__(self, "features", _frozen(X))
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise DataError(f"{y.shape[0] if y.ndim else 0} labels for {X.shape[0]} rows")
            if not np.all((y == GOOD) | (y == BAD)):
                raise DataError("labels must be 0 (Good) or 1 (Bad)")
            object.__setattr__(self, "labels", _frozen(y.astype(np.int8)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @property
    def bad_count(self) -> int:
        self._need_labels()
        return int(self.labels.sum())

    @property
    def bad_rate(self) -> float:
        self._need_labels()
        return float(self.labels.mean()) if self.n else float("nan")

    def _need_labels(self):
        if self.labels is None:
            raise DataError("dataset has no labels")

    def subset(self, index) -> CreditDataset:
        """Rows selected by an integer index array or boolean mask."""
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        return CreditDataset(self.ids[index], self.features[index], labels)

    def with_labels(self, labels) -> CreditDataset:
        return CreditDataset(self.ids, self.features, labels)

    def without_labels(self) -> CreditDataset:
        return CreditDataset(self.ids, self.features, None)

    @staticmethod
    def concat(parts: Sequence[CreditDataset]) -> CreditDataset:
        parts = list(parts)
        if not parts:
            raise DataError("nothing to concatenate")
        d = {p.d for p in parts if p.n}
        if len(d) > 1:
            raise DataError(f"column counts differ: {sorted(d)}")
        with_y = [p.labels is not None for p in parts]
        if any(with_y) and not all(with_y):
            raise DataError("cannot concatenate labeled and unlabeled datasets")
        width = parts[0].d
        labels = np.concatenate([p.labels for p in parts]) if all(with_y) else None
        return CreditDataset(
            np.concatenate([p.ids for p in parts]),
            np.vstack([p.features.reshape(-1, width) for p in parts]),
            labels,
        )


class SealedLabels:
    """Ground-truth reject labels kept away from reject-inference strategies.

    Only oracle evaluation code calls :meth:`reveal`; strategies receive
    the rejects as an unlabeled :class:`CreditDataset`.
    """

    __slots__ = ("_ids", "_labels")

    def __init__(self, ids, labels):
        self._ids = _frozen(np.asarray(ids).astype(str))
        self._labels = _frozen(np.asarray(labels, dtype=np.int8))

    def __repr__(self) -> str:
        return f"SealedLabels(<{len(self._ids)} sealed>)"

    def __len__(self) -> int:
        return len(self._ids)

    def reveal(self, ids: Iterable[str] | None = None) -> np.ndarray:
        if ids is None:
            return self._labels
        pos = {k: i for i, k in enumerate(self._ids)}
        try:
            return self._labels[[pos[str(k)] for k in ids]]
        except KeyError as exc:
            raise DataError(f"id {exc.args[0]!r} has no sealed label") from None


@dataclass(frozen=True, eq=False)
class PartitionedData:
    """Accepts (labeled), rejects (unlabeled) and an unbiased labeled holdout."""

    accepts: CreditDataset
    rejects: CreditDataset
    unbiased: CreditDataset
    reject_oracle: SealedLabels | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.accepts.labels is None or self.unbiased.labels is None:
            raise DataError("accepts and unbiased sample need labels")
        if self.rejects.labels is not None:
            raise DataError("rejects must be passed without labels; use reject_oracle")
        if self.accepts.n == 0 or len(np.unique(self.accepts.labels)) < 2:
            raise DataError("accepts need at least one case of each class")
        sets = [set(self.accepts.ids), set(self.rejects.ids), set(self.unbiased.ids)]
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise DataError("accepts, rejects and unbiased ids overlap")


@dataclass(frozen=True)
class FoldAssignment:
    fold: np.ndarray
    k: int

    def train_test(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (train, test) for fold ``i``."""
        return np.flatnonzero(self.fold != i), np.flatnonzero(self.fold == i)


def load_csv(
    path,
    label_column: str | None = None,
    id_column: str | None = None,
    bad_value: str = "1",
    good_value: str = "0",
) -> CreditDataset:
    """Read a headed, comma-separated, UTF-8 file into a :class:`CreditDataset`.

    Every column other than the label and id columns must parse as a real
    number. Without ``id_column`` ids are the 0-based row numbers.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: no data rows")
        rows = list(reader)
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: no data rows")

    def col(name):
        if name not in header:
            raise DataError(f"{path}: column {name!r} not in header")
        return header.index(name)

    y_col = col(label_column) if label_column else None
    id_col = col(id_column) if id_column else None
    feat_cols = [j for j in range(len(header)) if j not in (y_col, id_col)]

    X = np.empty((len(rows), len(feat_cols)))
    labels = np.empty(len(rows), dtype=np.int8) if y_col is not None else None
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        for out_j, j in enumerate(feat_cols):
            try:
                X[i, out_j] = float(row[j])
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: column {header[j]!r}: {row[j]!r} is not a number"
                ) from None
        if labels is not None:
            v = row[y_col].strip()
            if v == bad_value:
                labels[i] = BAD
            elif v == good_value:
                labels[i] = GOOD
            else:
                raise DataError(f"{path}:{lineno}: label {v!r} is neither {bad_value!r} nor {good_value!r}")

    ids = [r[id_col] for r in rows] if id_col is not None else [str(i) for i in range(len(rows))]
    if len(set(ids)) != len(ids):
        seen = set()
        dup = next(k for k in ids if k in seen or seen.add(k))
        raise DataError(f"{path}: duplicate id {dup!r}")
    return CreditDataset(np.array(ids), X, labels)


def write_csv(ds: CreditDataset, path, label_column: str = "bad", id_column: str = "id",
              feature_names: Sequence[str] | None = None) -> None:
    """Write ``ds`` in the layout :func:`load_csv` reads back."""
    names = list(feature_names) if feature_names else [f"x{j}" for j in range(ds.d)]
    header = [id_column, *names] + ([label_column] if ds.labels is not None else [])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [ds.ids[i], *(repr(float(v)) for v in ds.features[i])]
            if ds.labels is not None:
                row.append(int(ds.labels[i]))
            w.writerow(row)


def stratified_kfold(ds: CreditDataset, k: int, seed: int) -> FoldAssignment:
    """Assign cases to ``k`` folds, stratified on the label.

    Within each class the shuffled cases are dealt round-robin, so class
    counts per fold differ by at most one. The dealing offset carries over
    between classes to keep total fold sizes balanced too.
    """
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    ds._need_labels()
    rng = np.random.default_rng(seed)
    fold = np.empty(ds.n, dtype=np.int64)
    offset = 0
    for cls in (GOOD, BAD):
        idx = np.flatnonzero(ds.labels == cls)
        if len(idx) < k:
            raise DataError(f"class {cls} has {len(idx)} cases, fewer than k={k}")
        idx = rng.permutation(idx)
        fold[idx] = (offset + np.arange(len(idx))) % k
        offset = (offset + len(idx)) % k
    return FoldAssignment(_frozen(fold), k)


def bootstrap_indices(n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise DataError("cannot bootstrap an empty dataset")
    return np.random.default_rng(seed).integers(0, n, size=n)


def bootstrap_sample(ds: CreditDataset, seed: int) -> CreditDataset:
    """Resample ``ds.n`` rows with replacement.

    Ids of the resample are ``"<source id>@<draw>"`` so they stay unique.
    """
    idx = bootstrap_indices(ds.n, seed)
    ids = np.char.add(np.char.add(ds.ids[idx], "@"), np.arange(ds.n).astype(str))
    labels = None if ds.labels is None else ds.labels[idx]
    return CreditDataset(ids, ds.features[idx], labels)


def stratified_split(labels: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split row indices into (first, second) with ``fraction`` of each class in ``first``."""
    rng = np.random.default_rng(seed)
    first, second = [], []
    labels = np.asarray(labels)
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        cut = int(math.floor(fraction * len(idx) + 0.5))
        first.append(idx[:cut])
        second.append(idx[cut:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def random_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.random.default_rng(seed).permutation(n)
    cut = int(math.floor(fraction * n + 0.5))
    return np.sort(idx[:cut]), np.sort(idx[cut:])
