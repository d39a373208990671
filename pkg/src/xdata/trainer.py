"""The cross-data label completion loop.

Repeatedly: split the grid into labeled/incomplete instance sets, train the
multi-task network on the labeled set, predict with confidences on the
incomplete set, and write the top-k most confident predictions per task into
the grid as pseudo-labels, until no cell is undefined (or a stopping rule
fires). Ground-truth cells are never overwritten and pseudo-labels are never
revised.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import REGRESSION, MultiTargetDataset, Standardizer, split
from .metrics import MetricReport, evaluate
from .model import NetworkConfig, init_network, mc_predict, train

logger = logging.getLogger(__name__)

STATUS_COMPLETED = "completed"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_STALLED = "stalled"


@dataclass
class CdlcConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    select_per_task: int = 1000
    max_iterations: Optional[int] = None
    min_confidence: dict[str, float] = field(default_factory=dict)
    retrain_from_scratch: bool = True
    eval_every_iteration: bool = True

    def validate(self) -> None:
        if self.select_per_task < 1:
            raise ValueError("select_per_task must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        self.network.validate()


@dataclass
class PseudoLabelAssignment:
    instance: int
    task_index: int
    task: str
    value: float  # class index, or regression value in standardized space
    confidence: float
    iteration: int


@dataclass
class IterationRecord:
    iteration: int
    filled: dict[str, int]
    boundary_confidence: dict[str, Optional[float]]  # confidence of the last accepted cell
    remaining: dict[str, int]  # undefined cells per task after assignment
    metrics: Optional[MetricReport] = None
    duration: float = 0.0


@dataclass
class CdlcResult:
    dataset: MultiTargetDataset  # completed grid, standardized space
    records: list[IterationRecord]
    assignments: list[PseudoLabelAssignment]
    status: str
    final_net: Optional[object] = None  # network from the last iteration


def select_top_k(candidates: list[PseudoLabelAssignment], k: int,
                 min_confidence: Optional[float] = None) -> list[PseudoLabelAssignment]:
    """Highest-confidence candidates of one task, ties to the lower instance
    index; candidates below `min_confidence` are excluded before truncation."""
    pool = candidates
    if min_confidence is not None:
        pool = [c for c in pool if c.confidence >= min_confidence]
    return sorted(pool, key=lambda c: (-c.confidence, c.instance))[:k]


def run_cdlc(ds: MultiTargetDataset, config: CdlcConfig,
             eval_set: Optional[MultiTargetDataset] = None,
             standardizer: Optional[Standardizer] = None) -> CdlcResult:
    """Run the label-completion loop on a (typically standardized) dataset.

    Each iteration trains a fresh network seeded with network.seed + iteration
    (or warm-starts the previous one), evaluates on `eval_set` if given (so
    record 0 reflects training on the original labels only), then assigns up
    to select_per_task pseudo-labels per task. Terminates when the grid is
    complete, max_iterations is reached, or an iteration assigns nothing.
    """
    config.validate()
    if eval_set is not None and [t.name for t in eval_set.tasks] != [t.name for t in ds.tasks]:
        raise ValueError("evaluation set task schemas do not match the dataset")
    work = ds.copy()
    if not work.defined.any():
        raise ValueError("dataset has no defined labels; nothing to train on")

    records: list[IterationRecord] = []
    assignments: list[PseudoLabelAssignment] = []
    status = STATUS_COMPLETED
    net = None
    iteration = 0
    while True:
        view = split(work)
        if len(view.incomplete_indices) == 0:
            break
        if config.max_iterations is not None and iteration >= config.max_iterations:
            status = STATUS_MAX_ITERATIONS
            break
        started = time.perf_counter()

        if net is None or config.retrain_from_scratch:
            net_cfg = NetworkConfig(**{**config.network.__dict__,
                                       "seed": config.network.seed + iteration})
            net = init_network(net_cfg, work.n_features, work.tasks)
        li = view.labeled_indices
        net = train(net, work.features[li], work.labels[li], work.defined[li])

        metrics = None
        if eval_set is not None and config.eval_every_iteration:
            metrics = evaluate(net, eval_set, standardizer)

        ui = view.incomplete_indices
        rng = np.random.default_rng(net.config.seed)
        preds = mc_predict(net, work.features[ui], rng)

        filled: dict[str, int] = {}
        boundary: dict[str, Optional[float]] = {}
        n_assigned = 0
        for m, task in enumerate(work.tasks):
            open_cells = ~work.defined[ui, m]
            candidates = [
                PseudoLabelAssignment(int(ui[j]), m, task.name,
                                      float(preds[m].decoded[j]),
                                      float(preds[m].confidence[j]), iteration)
                for j in np.flatnonzero(open_cells)
            ]
            selected = select_top_k(candidates, config.select_per_task,
                                    config.min_confidence.get(task.name))
            for a in selected:
                work.labels[a.instance, m] = a.value
                work.defined[a.instance, m] = True
            assignments.extend(selected)
            filled[task.name] = len(selected)
            boundary[task.name] = selected[-1].confidence if selected else None
            n_assigned += len(selected)

        remaining = {t.name: int((~work.defined[:, m]).sum())
                     for m, t in enumerate(work.tasks)}
        records.append(IterationRecord(iteration, filled, boundary, remaining, metrics,
                                       time.perf_counter() - started))
        if n_assigned == 0:
            status = STATUS_STALLED
            logger.warning("iteration %d assigned no cells; stopping", iteration)
            break
        iteration += 1

    return CdlcResult(work, records, assignments, status, final_net=net)


def apply_assignments(ds: MultiTargetDataset, assignments: list[PseudoLabelAssignment],
                      standardizer: Optional[Standardizer] = None) -> MultiTargetDataset:
    """Write pseudo-labels into an original-units dataset (for serialization)."""
    out = ds.copy()
    for a in assignments:
        value = a.value
        if out.tasks[a.task_index].kind == REGRESSION and standardizer is not None:
            value = standardizer.inverse_target(a.task_index, value)
        out.labels[a.instance, a.task_index] = value
        out.defined[a.instance, a.task_index] = True
    return out


# ---------------------------------------------------------------------------
# CSV output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_assignments_csv(path, assignments: list[PseudoLabelAssignment],
                          ds: MultiTargetDataset,
                          standardizer: Optional[Standardizer] = None) -> None:
    """Columns: iteration,instance,dataset_origin,task,label,confidence.
    Labels are category text or inverse-standardized reals."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "instance", "dataset_origin", "task", "label", "confidence"])
        for a in assignments:
            task = ds.tasks[a.task_index]
            if task.classes is not None:
                label = task.classes[int(a.value)]
            else:
                v = a.value
                if standardizer is not None:
                    v = standardizer.inverse_target(a.task_index, v)
                label = repr(float(v))
            w.writerow([a.iteration, a.instance, int(ds.origin[a.instance]),
                        a.task, label, _fmt(a.confidence)])


def write_iterations_csv(path, records: list[IterationRecord],
                         ds: MultiTargetDataset) -> None:
    names = [t.name for t in ds.tasks]
    metric_cols: list[str] = []
    for r in records:
        if r.metrics is not None:
            metric_cols = r.metrics.column_names()
            break
    header = ["iteration"]
    for n in names:
        header += [f"filled_{n}", f"boundary_conf_{n}", f"remaining_{n}"]
    header += metric_cols
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for r in records:
            row = [r.iteration]
            for n in names:
                row += [r.filled[n], _fmt(r.boundary_confidence[n]), r.remaining[n]]
            if r.metrics is not None:
                row += [_fmt(v) for v in r.metrics.column_values()]
            elif metric_cols:
                row += [""] * len(metric_cols)
            w.writerow(row)
