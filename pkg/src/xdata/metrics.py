"""Evaluation metrics: unweighted average recall, Pearson correlation,
test-set scoring, and pseudo-label quality against withheld ground truth."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import REGRESSION, MultiTargetDataset, Standardizer
from .model import MtShlNetwork, predict_deterministic


def uar(true_labels: Sequence[int], predicted: Sequence[int], n_classes: int) -> float:
    """Unweighted average recall over the classes present in `true_labels`."""
    t = np.asarray(true_labels, dtype=int)
    p = np.asarray(predicted, dtype=int)
    if len(t) == 0:
        raise ValueError("uar requires non-empty input")
    if len(t) != len(p):
        raise ValueError("true and predicted lengths differ")
    if t.min() < 0 or t.max() >= n_classes or p.min() < 0 or p.max() >= n_classes:
        raise ValueError("labels out of range")
    recalls = []
    for c in range(n_classes):
        total = (t == c).sum()
        if total == 0:
            continue
        recalls.append(((t == c) & (p == c)).sum() / total)
    return float(np.mean(recalls))


def per_class_recalls(true_labels, predicted, n_classes: int) -> dict[int, float]:
    t = np.asarray(true_labels, dtype=int)
    p = np.asarray(predicted, dtype=int)
    out = {}
    for c in range(n_classes):
        total = (t == c).sum()
        if total > 0:
            out[c] = float(((t == c) & (p == c)).sum() / total)
    return out


def pearson_cc(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation. Zero-variance input warns and returns NaN."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(xa) != len(ya):
        raise ValueError("vectors must have equal length")
    if len(xa) < 2:
        raise ValueError("pearson_cc requires n >= 2")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        warnings.warn("pearson_cc: zero-variance input, correlation undefined")
        return float("nan")
    return float(dx @ dy / np.sqrt(sx * sy))


@dataclass
class TaskMetrics:
    task: str
    kind: str
    n: int
    evaluable: bool = True
    uar: Optional[float] = None
    recalls: Optional[dict[str, float]] = None
    cc: Optional[float] = None


@dataclass
class MetricReport:
    tasks: dict[str, TaskMetrics] = field(default_factory=dict)

    def column_names(self) -> list[str]:
        cols = []
        for name, tm in self.tasks.items():
            cols.append(f"cc_{name}" if tm.kind == REGRESSION else f"uar_{name}")
        return cols

    def column_values(self) -> list[Optional[float]]:
        vals = []
        for tm in self.tasks.values():
            if not tm.evaluable:
                vals.append(None)
            else:
                vals.append(tm.cc if tm.kind == REGRESSION else tm.uar)
        return vals


def evaluate(net: MtShlNetwork, eval_set: MultiTargetDataset,
             standardizer: Optional[Standardizer] = None) -> MetricReport:
    """Deterministic-mode test-set metrics per task.

    Instances whose true cell is undefined are excluded per task; a task with
    no defined cells is reported as not evaluable. Regression correlations are
    computed in original target units when a standardizer is supplied.
    """
    if [t.name for t in net.tasks] != [t.name for t in eval_set.tasks]:
        raise ValueError("evaluation set task schemas do not match the network")
    preds = predict_deterministic(net, eval_set.features)
    report = MetricReport()
    for m, task in enumerate(net.tasks):
        sel = eval_set.defined[:, m]
        n = int(sel.sum())
        if n == 0:
            report.tasks[task.name] = TaskMetrics(task.name, task.kind, 0, evaluable=False)
            continue
        if task.kind == REGRESSION:
            y_true = eval_set.labels[sel, m]
            y_pred = preds[m].decoded[sel]
            if standardizer is not None:
                y_true = standardizer.inverse_target(m, y_true)
                y_pred = standardizer.inverse_target(m, y_pred)
            if n < 2:
                report.tasks[task.name] = TaskMetrics(task.name, task.kind, n, evaluable=False)
                continue
            cc = pearson_cc(y_true, y_pred)
            report.tasks[task.name] = TaskMetrics(task.name, task.kind, n,
                                                  evaluable=not np.isnan(cc), cc=cc)
        else:
            y_true = eval_set.labels[sel, m].astype(int)
            y_pred = preds[m].decoded[sel]
            k = task.num_classes
            recalls = per_class_recalls(y_true, y_pred, k)
            named = {task.classes[c]: r for c, r in recalls.items()}
            report.tasks[task.name] = TaskMetrics(
                task.name, task.kind, n, uar=uar(y_true, y_pred, k), recalls=named
            )
    return report


@dataclass
class PseudoLabelReport:
    task: str
    kind: str
    n_compared: int
    n_skipped: int  # assignments with no withheld truth (originally unlabeled rows)
    accuracy: Optional[float] = None  # classification
    accuracy_per_iteration: Optional[dict[int, float]] = None
    cc: Optional[float] = None  # regression
    mae: Optional[float] = None


def pseudo_label_accuracy(assignments, withheld_truth: MultiTargetDataset,
                          standardizer: Optional[Standardizer] = None
                          ) -> dict[str, PseudoLabelReport]:
    """Compare pseudo-label assignments to the pre-drop ground-truth grid.

    Assignments referencing cells undefined in the truth grid are skipped and
    counted separately. Regression values are mapped back to original units
    before comparison when a standardizer is supplied.
    """
    per_task: dict[int, list] = {}
    for a in assignments:
        per_task.setdefault(a.task_index, []).append(a)

    reports: dict[str, PseudoLabelReport] = {}
    for m, task in enumerate(withheld_truth.tasks):
        items = per_task.get(m, [])
        comparable = [a for a in items if withheld_truth.defined[a.instance, m]]
        skipped = len(items) - len(comparable)
        if not comparable:
            reports[task.name] = PseudoLabelReport(task.name, task.kind, 0, skipped)
            continue
        truth = np.array([withheld_truth.labels[a.instance, m] for a in comparable])
        assigned = np.array([a.value for a in comparable], dtype=float)
        if task.kind == REGRESSION:
            if standardizer is not None:
                assigned = standardizer.inverse_target(m, assigned)
            cc = pearson_cc(truth, assigned) if len(truth) >= 2 else None
            mae = float(np.abs(truth - assigned).mean())
            reports[task.name] = PseudoLabelReport(task.name, task.kind, len(comparable),
                                                   skipped, cc=cc, mae=mae)
        else:
            hits = assigned.astype(int) == truth.astype(int)
            per_iter: dict[int, list[bool]] = {}
            for a, hit in zip(comparable, hits):
                per_iter.setdefault(a.iteration, []).append(bool(hit))
            reports[task.name] = PseudoLabelReport(
                task.name, task.kind, len(comparable), skipped,
                accuracy=float(hits.mean()),
                accuracy_per_iteration={i: float(np.mean(v)) for i, v in sorted(per_iter.items())},
            )
    return reports
