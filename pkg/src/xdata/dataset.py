"""Joint multi-target dataset assembly and label-grid operations.

Several source files sharing one numeric feature space are merged into a
single feature matrix plus a sparse label grid over the union of their target
attributes. Undefined cells are tracked by a boolean mask (`defined`); the
value array holds a class index (classification) or a real (regression) where
defined and 0.0 elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .arff import MISSING, NOMINAL, NUMERIC, STRING, ArffRelation, AttributeDecl

BINARY = "binary"
MULTICLASS = "multiclass"
REGRESSION = "regression"


class DatasetError(ValueError):
    """Raised when source files cannot be merged into one dataset."""


@dataclass(frozen=True)
class TaskSchema:
    name: str
    kind: str  # BINARY, MULTICLASS or REGRESSION
    classes: Optional[tuple[str, ...]] = None
    source_datasets: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.kind == BINARY and (self.classes is None or len(self.classes) != 2):
            raise DatasetError(f"binary task {self.name!r} must have exactly 2 classes")
        if self.kind == MULTICLASS and (self.classes is None or len(self.classes) < 3):
            raise DatasetError(f"multiclass task {self.name!r} must have >= 3 classes")
        if self.kind == REGRESSION and self.classes is not None:
            raise DatasetError(f"regression task {self.name!r} cannot have classes")

    @property
    def is_classification(self) -> bool:
        return self.kind in (BINARY, MULTICLASS)

    @property
    def num_classes(self) -> int:
        return len(self.classes) if self.classes else 0


@dataclass
class MultiTargetDataset:
    features: np.ndarray  # (N, F) float64
    labels: np.ndarray  # (N, M) float64; class index or real where defined
    defined: np.ndarray  # (N, M) bool
    tasks: list[TaskSchema]
    origin: np.ndarray  # (N,) int, 1-based source file index
    feature_names: list[str]

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def copy(self) -> "MultiTargetDataset":
        return MultiTargetDataset(
            self.features.copy(), self.labels.copy(), self.defined.copy(),
            list(self.tasks), self.origin.copy(), list(self.feature_names),
        )

    def task_index(self, name: str) -> int:
        for i, t in enumerate(self.tasks):
            if t.name == name:
                return i
        raise KeyError(name)


@dataclass
class SplitView:
    """Instances with at least one defined label (L) / at least one missing (U)."""

    labeled_indices: np.ndarray
    incomplete_indices: np.ndarray


def split(ds: MultiTargetDataset) -> SplitView:
    any_defined = ds.defined.any(axis=1)
    any_missing = ~ds.defined.all(axis=1)
    return SplitView(np.flatnonzero(any_defined), np.flatnonzero(any_missing))


# ---------------------------------------------------------------------------
# assembly


def _task_from_attr(attr: AttributeDecl, file_index: int) -> TaskSchema:
    if attr.kind == NUMERIC:
        return TaskSchema(attr.name, REGRESSION, None, frozenset({file_index}))
    if attr.kind == STRING:
        raise DatasetError(f"string attribute {attr.name!r} cannot be a target")
    kind = BINARY if len(attr.categories) == 2 else MULTICLASS
    return TaskSchema(attr.name, kind, tuple(attr.categories), frozenset({file_index}))


def assemble(
    relations: Sequence[tuple[ArffRelation, int]],
    ignore_first_attribute: bool = False,
) -> MultiTargetDataset:
    """Merge source relations into one joint dataset.

    Each relation contributes its trailing `num_targets` attributes as
    targets; all remaining (non-ignored) attributes must be numeric features
    with identical names across files. Tasks are merged by exact attribute
    name; merged declarations must agree in kind and category set (category
    order is taken from the first file declaring the task).
    """
    if not relations:
        raise DatasetError("at least one input relation required")

    feature_names: Optional[list[str]] = None
    tasks: list[TaskSchema] = []
    task_pos: dict[str, int] = {}
    per_file: list[tuple[ArffRelation, list[AttributeDecl], list[AttributeDecl]]] = []

    for d, (rel, num_targets) in enumerate(relations, start=1):
        attrs = rel.attributes[1:] if ignore_first_attribute else list(rel.attributes)
        if num_targets < 0:
            raise DatasetError(f"file {d}: num_targets must be >= 0")
        if num_targets > len(attrs):
            raise DatasetError(f"file {d}: num_targets {num_targets} exceeds attribute count")
        split_at = len(attrs) - num_targets
        feat_attrs, target_attrs = attrs[:split_at], attrs[split_at:]
        for a in feat_attrs:
            if a.kind == STRING:
                raise DatasetError(f"file {d}: string attribute {a.name!r} cannot be a feature")
            if a.kind == NOMINAL:
                raise DatasetError(f"file {d}: nominal attribute {a.name!r} cannot be a feature")
        names = [a.name for a in feat_attrs]
        if feature_names is None:
            feature_names = names
        elif names != feature_names:
            raise DatasetError(
                f"file {d}: feature attributes {names} do not match first file's {feature_names}"
            )
        for a in target_attrs:
            schema = _task_from_attr(a, d)
            if a.name not in task_pos:
                task_pos[a.name] = len(tasks)
                tasks.append(schema)
            else:
                prior = tasks[task_pos[a.name]]
                if prior.kind != schema.kind:
                    raise DatasetError(
                        f"task {a.name!r}: kind conflict ({prior.kind} vs {schema.kind})"
                    )
                if prior.classes is not None and set(prior.classes) != set(schema.classes):
                    raise DatasetError(f"task {a.name!r}: nominal category sets differ")
                tasks[task_pos[a.name]] = replace(
                    prior, source_datasets=prior.source_datasets | {d}
                )
        per_file.append((rel, feat_attrs, target_attrs))

    if not tasks:
        raise DatasetError("no target attributes in any input file: at least one task required")

    n_total = sum(len(rel.rows) for rel, _, _ in per_file)
    n_feat = len(feature_names)
    features = np.zeros((n_total, n_feat))
    labels = np.zeros((n_total, len(tasks)))
    defined = np.zeros((n_total, len(tasks)), dtype=bool)
    origin = np.zeros(n_total, dtype=int)

    row_at = 0
    for d, (rel, feat_attrs, target_attrs) in enumerate(per_file, start=1):
        offset = 1 if ignore_first_attribute else 0
        feat_cols = [offset + i for i in range(len(feat_attrs))]
        target_cols = [offset + len(feat_attrs) + i for i in range(len(target_attrs))]
        for r, row in enumerate(rel.rows):
            for j, c in enumerate(feat_cols):
                v = row[c]
                if v is MISSING:
                    raise DatasetError(
                        f"file {d}, row {r + 1}: missing value in feature "
                        f"{feat_attrs[j].name!r} (features must be fully defined)"
                    )
                features[row_at, j] = v
            for a, c in zip(target_attrs, target_cols):
                v = row[c]
                if v is MISSING:
                    continue
                m = task_pos[a.name]
                task = tasks[m]
                if task.classes is not None:
                    # remap the index through the first file's category order
                    labels[row_at, m] = task.classes.index(a.categories[v])
                else:
                    labels[row_at, m] = v
                defined[row_at, m] = True
            origin[row_at] = d
            row_at += 1

    return MultiTargetDataset(features, labels, defined, tasks, origin, feature_names)


def assemble_eval(rel: ArffRelation, train: MultiTargetDataset,
                  ignore_first_attribute: bool = False) -> MultiTargetDataset:
    """Assemble an evaluation relation against a training dataset's schemas.

    Attributes whose names match a training task are targets (any position);
    the remaining attributes must equal the training feature sequence. Tasks
    absent from the file yield all-undefined columns.
    """
    attrs = rel.attributes[1:] if ignore_first_attribute else list(rel.attributes)
    offset = 1 if ignore_first_attribute else 0
    task_names = {t.name for t in train.tasks}
    feat_cols: list[int] = []
    feat_names: list[str] = []
    target_cols: dict[str, int] = {}
    for i, a in enumerate(attrs):
        if a.name in task_names:
            target_cols[a.name] = offset + i
        else:
            feat_cols.append(offset + i)
            feat_names.append(a.name)
    if feat_names != train.feature_names:
        raise DatasetError(
            f"evaluation file features {feat_names} do not match training {train.feature_names}"
        )
    for t in train.tasks:
        if t.name not in target_cols:
            continue
        a = attrs[target_cols[t.name] - offset]
        schema = _task_from_attr(a, 0)
        if schema.kind != t.kind:
            raise DatasetError(f"evaluation task {t.name!r}: kind conflict")
        if t.classes is not None and set(schema.classes) != set(t.classes):
            raise DatasetError(f"evaluation task {t.name!r}: nominal category sets differ")

    n = len(rel.rows)
    features = np.zeros((n, len(feat_cols)))
    labels = np.zeros((n, train.n_tasks))
    defined = np.zeros((n, train.n_tasks), dtype=bool)
    for r, row in enumerate(rel.rows):
        for j, c in enumerate(feat_cols):
            v = row[c]
            if v is MISSING:
                raise DatasetError(f"evaluation row {r + 1}: missing feature value")
            features[r, j] = v
        for m, t in enumerate(train.tasks):
            if t.name not in target_cols:
                continue
            v = row[target_cols[t.name]]
            if v is MISSING:
                continue
            if t.classes is not None:
                cats = attrs[target_cols[t.name] - offset].categories
                labels[r, m] = t.classes.index(cats[v])
            else:
                labels[r, m] = v
            defined[r, m] = True
    return MultiTargetDataset(features, labels, defined, list(train.tasks),
                              np.zeros(n, dtype=int), list(train.feature_names))


def to_relation(ds: MultiTargetDataset, relation_name: str = "completed") -> ArffRelation:
    """Export the dataset (original units) as one merged ARFF relation."""
    attrs = [AttributeDecl(name, NUMERIC) for name in ds.feature_names]
    for t in ds.tasks:
        if t.classes is not None:
            attrs.append(AttributeDecl(t.name, NOMINAL, t.classes))
        else:
            attrs.append(AttributeDecl(t.name, NUMERIC))
    rows = []
    for i in range(ds.n_instances):
        row: list = [float(v) for v in ds.features[i]]
        for m, t in enumerate(ds.tasks):
            if not ds.defined[i, m]:
                row.append(MISSING)
            elif t.classes is not None:
                row.append(int(ds.labels[i, m]))
            else:
                row.append(float(ds.labels[i, m]))
        rows.append(row)
    return ArffRelation(relation_name, attrs, rows)


# ---------------------------------------------------------------------------
# label drop-out and standardization


def drop_labels(ds: MultiTargetDataset, fraction: float, seed: int) -> MultiTargetDataset:
    """Remove exactly floor(fraction * defined) labels per task, uniformly at random."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    out = ds.copy()
    rng = np.random.default_rng(seed)
    for m in range(ds.n_tasks):
        idx = np.flatnonzero(out.defined[:, m])
        k = math.floor(fraction * len(idx))
        if k == 0:
            continue
        chosen = rng.choice(idx, size=k, replace=False)
        out.defined[chosen, m] = False
        out.labels[chosen, m] = 0.0
    return out


@dataclass
class Standardizer:
    """Feature and regression-target standardization (population statistics)."""

    feature_mean: np.ndarray
    feature_std: np.ndarray  # effective divisor; 1.0 for constant columns
    constant_features: np.ndarray  # bool per feature
    target_stats: dict[int, tuple[float, float]] = field(default_factory=dict)

    def transform_features(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_mean) / self.feature_std

    def inverse_features(self, x: np.ndarray) -> np.ndarray:
        return x * self.feature_std + self.feature_mean

    def transform_target(self, m: int, v):
        mean, std = self.target_stats[m]
        return (v - mean) / std

    def inverse_target(self, m: int, v):
        if m not in self.target_stats:
            return v
        mean, std = self.target_stats[m]
        return v * std + mean

    def transform_dataset(self, ds: MultiTargetDataset) -> MultiTargetDataset:
        out = ds.copy()
        out.features = self.transform_features(ds.features)
        for m, (mean, std) in self.target_stats.items():
            mask = out.defined[:, m]
            out.labels[mask, m] = (out.labels[mask, m] - mean) / std
        return out


def standardize(ds: MultiTargetDataset) -> tuple[MultiTargetDataset, Standardizer]:
    """Zero-mean/unit-variance features (all instances) and regression targets
    (defined cells only). Near-constant columns are shifted to zero."""
    if ds.n_instances < 1:
        raise DatasetError("cannot standardize an empty dataset")
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    constant = std < 1e-12
    eff_std = np.where(constant, 1.0, std)
    target_stats: dict[int, tuple[float, float]] = {}
    for m, t in enumerate(ds.tasks):
        if t.kind != REGRESSION:
            continue
        vals = ds.labels[ds.defined[:, m], m]
        if len(vals) == 0:
            target_stats[m] = (0.0, 1.0)
            continue
        t_mean = float(vals.mean())
        t_std = float(vals.std())
        target_stats[m] = (t_mean, 1.0 if t_std < 1e-12 else t_std)
    stdzr = Standardizer(mean, eff_std, constant, target_stats)
    return stdzr.transform_dataset(ds), stdzr
