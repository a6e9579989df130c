"""Item/feature/class data model, JSON and CSV loaders, synthetic generation.

A dataset is a binary item x feature matrix in which every feature belongs to
exactly one feature class. Each class doubles as a prediction task; a reserved
null task (represented as ``None`` everywhere) owns no features and has an
all-zero target vector.

All randomness flows through ``numpy.random.default_rng`` (PCG64), seeded
explicitly, so generation is reproducible across runs and platforms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import atomic_write_text, canonical_json, sha256_of_text


class DatasetError(ValueError):
    """A dataset file or configuration violates an invariant."""


@dataclass(frozen=True)
class SyntheticConfig:
    """Two-level Bernoulli generator settings.

    An item first expresses each class with probability
    ``class_expression_rate``; features of an expressed class are then positive
    independently with probability ``positive_rate``. Features of unexpressed
    classes are all negative, which keeps positives skewed the way real
    feature-norm data is.

    ``class_feature_counts`` optionally gives an explicit per-class feature
    count (overriding the uniform ``features_per_class``), for shapes whose
    feature total is not divisible by the class count.
    """

    n_items: int = 40
    n_classes: int = 8
    features_per_class: int = 25
    positive_rate: float = 0.6
    class_expression_rate: float = 0.9
    seed: int = 7
    class_feature_counts: tuple[int, ...] | None = None

    def validate(self) -> None:
        if self.n_items < 2:
            raise DatasetError(f"n_items must be >= 2, got {self.n_items}")
        if self.n_classes < 2:
            raise DatasetError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.features_per_class < 1:
            raise DatasetError(
                f"features_per_class must be >= 1, got {self.features_per_class}"
            )
        for name in ("positive_rate", "class_expression_rate"):
            rate = getattr(self, name)
            if not (0.0 < rate < 1.0):
                raise DatasetError(f"{name} must lie in (0, 1), got {rate}")
        if self.class_feature_counts is not None:
            if len(self.class_feature_counts) != self.n_classes:
                raise DatasetError(
                    "class_feature_counts length "
                    f"{len(self.class_feature_counts)} != n_classes {self.n_classes}"
                )
            if any(c < 1 for c in self.class_feature_counts):
                raise DatasetError("class_feature_counts entries must be >= 1")

    def feature_counts(self) -> tuple[int, ...]:
        if self.class_feature_counts is not None:
            return tuple(self.class_feature_counts)
        return (self.features_per_class,) * self.n_classes


@dataclass(frozen=True)
class Dataset:
    """Immutable binary item x feature matrix with a class partition.

    ``class_of_feature[f]`` gives the owning class (= task index) of feature
    ``f``; classes partition the features. ``targets`` holds 0/1 values only.
    """

    item_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    class_of_feature: np.ndarray
    task_names: tuple[str, ...]
    targets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "class_of_feature",
                           np.ascontiguousarray(self.class_of_feature, dtype=np.int64))
        object.__setattr__(self, "targets",
                           np.ascontiguousarray(self.targets, dtype=np.uint8))
        self.class_of_feature.setflags(write=False)
        self.targets.setflags(write=False)
        self.validate()

    @property
    def n_items(self) -> int:
        return len(self.item_names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_tasks(self) -> int:
        return len(self.task_names)

    def validate(self) -> None:
        if self.n_items < 2:
            raise DatasetError(f"need at least 2 items, got {self.n_items}")
        if self.n_tasks < 2:
            raise DatasetError(f"need at least 2 classes, got {self.n_tasks}")
        for kind, names in (("item", self.item_names), ("feature", self.feature_names),
                            ("class", self.task_names)):
            seen: set[str] = set()
            for name in names:
                if name in seen:
                    raise DatasetError(f"duplicate {kind} name {name!r}")
                seen.add(name)
        if self.class_of_feature.shape != (self.n_features,):
            raise DatasetError(
                f"class_of_feature has shape {self.class_of_feature.shape}, "
                f"expected ({self.n_features},)"
            )
        bad = np.flatnonzero((self.class_of_feature < 0)
                             | (self.class_of_feature >= self.n_tasks))
        if bad.size:
            f = int(bad[0])
            raise DatasetError(
                f"feature {self.feature_names[f]!r} has class index "
                f"{int(self.class_of_feature[f])}, outside [0, {self.n_tasks})"
            )
        present = np.bincount(self.class_of_feature, minlength=self.n_tasks)
        empty = np.flatnonzero(present == 0)
        if empty.size:
            raise DatasetError(f"class {self.task_names[int(empty[0])]!r} owns no features")
        if self.targets.shape != (self.n_items, self.n_features):
            raise DatasetError(
                f"targets has shape {self.targets.shape}, expected "
                f"({self.n_items}, {self.n_features})"
            )

    def fingerprint(self) -> str:
        """Content hash used to pair models with the data they were trained on."""
        cached = self.__dict__.get("_fingerprint")
        if cached is None:
            cached = sha256_of_text(canonical_json(self.to_dict()))
            object.__setattr__(self, "_fingerprint", cached)
        return cached

    def to_dict(self) -> dict:
        return {
            "items": list(self.item_names),
            "features": list(self.feature_names),
            "classes": list(self.task_names),
            "class_of_feature": self.class_of_feature.tolist(),
            "targets": self.targets.tolist(),
        }


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """Draw a dataset from the two-level Bernoulli scheme.

    Deterministic in ``config.seed``. Items that come out with no positive
    feature at all are redrawn (an all-zero item is indistinguishable from the
    null task and breaks sensitivity counts).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    counts = config.feature_counts()
    n_features = int(sum(counts))
    class_of_feature = np.repeat(np.arange(config.n_classes), counts)

    rows = np.zeros((config.n_items, n_features), dtype=np.uint8)
    for i in range(config.n_items):
        while True:
            expressed = rng.random(config.n_classes) < config.class_expression_rate
            hits = rng.random(n_features) < config.positive_rate
            row = hits & expressed[class_of_feature]
            if row.any():
                rows[i] = row
                break

    task_names = tuple(f"class{c:02d}" for c in range(config.n_classes))
    feature_names = []
    for c, k in enumerate(counts):
        feature_names.extend(f"class{c:02d}_f{j:03d}" for j in range(k))
    item_names = tuple(f"item{i:03d}" for i in range(config.n_items))
    return Dataset(item_names, tuple(feature_names), class_of_feature,
                   task_names, rows)


def task_targets(ds: Dataset, item: int, task: int | None) -> np.ndarray:
    """Target vector over all features for one (item, task) pair.

    Real task: positives restricted to features of that class. Null task
    (``None``): all zeros. The union target used by the context-independent
    head is just ``ds.targets[item]``.
    """
    if not (0 <= item < ds.n_items):
        raise IndexError(f"item index {item} out of range [0, {ds.n_items})")
    if task is None:
        return np.zeros(ds.n_features, dtype=np.float64)
    if not (0 <= task < ds.n_tasks):
        raise IndexError(f"task index {task} out of range [0, {ds.n_tasks})")
    row = ds.targets[item].astype(np.float64)
    row[ds.class_of_feature != task] = 0.0
    return row


def union_targets(ds: Dataset, item: int) -> np.ndarray:
    """All-class target row for the context-independent head."""
    if not (0 <= item < ds.n_items):
        raise IndexError(f"item index {item} out of range [0, {ds.n_items})")
    return ds.targets[item].astype(np.float64)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(ds.to_dict(), indent=1))


def load_dataset(path: str | Path) -> Dataset:
    """Load and fully validate a dataset JSON file.

    Any invariant violation raises ``DatasetError`` naming the offending
    row or field; nothing is demoted to a warning.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed JSON in {path}: {e}") from e
    for key in ("items", "features", "classes", "class_of_feature", "targets"):
        if key not in raw:
            raise DatasetError(f"{path}: missing key {key!r}")
    targets = raw["targets"]
    n_features = len(raw["features"])
    if len(targets) != len(raw["items"]):
        raise DatasetError(
            f"{path}: {len(targets)} target rows for {len(raw['items'])} items"
        )
    mat = np.zeros((len(targets), n_features), dtype=np.uint8)
    for i, row in enumerate(targets):
        if len(row) != n_features:
            raise DatasetError(
                f"{path}: target row {i} has {len(row)} entries, expected {n_features}"
            )
        for j, v in enumerate(row):
            if v not in (0, 1):
                raise DatasetError(
                    f"{path}: non-binary target value {v!r} at row {i}, column {j}"
                )
            mat[i, j] = v
    return Dataset(tuple(raw["items"]), tuple(raw["features"]),
                   np.asarray(raw["class_of_feature"]), tuple(raw["classes"]), mat)


def load_dataset_csv(path: str | Path) -> Dataset:
    """Import a wide CSV table: rows are items, columns are features.

    The header row carries ``feature|class`` names; the first column holds
    item names. Class order follows first appearance in the header.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty CSV") from None
        feature_names, class_names_per_feature = [], []
        for col, cell in enumerate(header[1:], start=1):
            if "|" not in cell:
                raise DatasetError(
                    f"{path}: header column {col} ({cell!r}) is not 'feature|class'"
                )
            feat, cls = cell.rsplit("|", 1)
            feature_names.append(feat)
            class_names_per_feature.append(cls)
        class_names: list[str] = []
        for cls in class_names_per_feature:
            if cls not in class_names:
                class_names.append(cls)
        class_of_feature = np.array([class_names.index(c)
                                     for c in class_names_per_feature])
        item_names, rows = [], []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: row {i} has {len(row)} cells, expected {len(header)}"
                )
            item_names.append(row[0])
            vals = []
            for j, cell in enumerate(row[1:], start=1):
                if cell not in ("0", "1"):
                    raise DatasetError(
                        f"{path}: non-binary target value {cell!r} at row {i}, column {j}"
                    )
                vals.append(int(cell))
            rows.append(vals)
    return Dataset(tuple(item_names), tuple(feature_names), class_of_feature,
                   tuple(class_names), np.asarray(rows, dtype=np.uint8))
