import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xdata.dataset import MultiTargetDataset, TaskSchema
from xdata.model import NetworkConfig
from xdata.trainer import (STATUS_COMPLETED, STATUS_MAX_ITERATIONS,
                           STATUS_STALLED, CdlcConfig, PseudoLabelAssignment,
                           run_cdlc, select_top_k)


def make_assignment(instance, conf, task=0):
    return PseudoLabelAssignment(instance, task, "t", 0.0, conf, 0)


class TestSelectTopK:
    def test_orders_by_highest_confidence(self):
        cands = [make_assignment(1, -0.05), make_assignment(2, -0.69),
                 make_assignment(3, -0.20)]
        assert [a.instance for a in select_top_k(cands, 2)] == [1, 3]

    def test_k_larger_than_pool(self):
        cands = [make_assignment(i, -0.1 * i) for i in range(3)]
        assert len(select_top_k(cands, 10)) == 3

    def test_ties_break_to_lower_instance(self):
        cands = [make_assignment(5, -0.5), make_assignment(2, -0.5),
                 make_assignment(9, -0.5)]
        assert [a.instance for a in select_top_k(cands, 2)] == [2, 5]

    def test_min_confidence_filters_before_truncation(self):
        cands = [make_assignment(1, -0.9), make_assignment(2, -0.1)]
        out = select_top_k(cands, 2, min_confidence=-0.5)
        assert [a.instance for a in out] == [2]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 10_000),
                              st.sampled_from([-0.1, -0.2, -0.3, -0.5, -1.0])),
                    min_size=1, max_size=200, unique_by=lambda t: t[0]),
           st.integers(1, 50))
    def test_matches_brute_force_sort(self, pool, k):
        cands = [make_assignment(i, c) for i, c in pool]
        expected = sorted(cands, key=lambda a: (-a.confidence, a.instance))[:k]
        assert select_top_k(cands, k) == expected


def grid_dataset(undefined_counts, n_features=4, seed=0):
    """Dataset whose tasks have the given per-task undefined cell counts."""
    rng = np.random.default_rng(seed)
    n = max(max(undefined_counts) + 50, 100)
    m = len(undefined_counts)
    tasks = []
    labels = np.zeros((n, m))
    defined = np.ones((n, m), dtype=bool)
    for t_idx, undef in enumerate(undefined_counts):
        tasks.append(TaskSchema(f"t{t_idx}", "binary", ("no", "yes")))
        labels[:, t_idx] = rng.integers(0, 2, n)
        undef_rows = rng.choice(n, size=undef, replace=False)
        defined[undef_rows, t_idx] = False
        labels[undef_rows, t_idx] = 0.0
    return MultiTargetDataset(rng.normal(size=(n, n_features)), labels, defined,
                              tasks, np.ones(n, dtype=int), [f"f{i}" for i in range(n_features)])


FAST_NET = NetworkConfig(shared_layers=(4,), epochs=2, dropout=0.1,
                         mc_passes=3, learning_rate=0.001, seed=1)


class TestRunCdlc:
    def test_iteration_count_matches_ceil_arithmetic(self):
        ds = grid_dataset([250, 180, 0], seed=3)
        cfg = CdlcConfig(network=FAST_NET, select_per_task=100)
        result = run_cdlc(ds, cfg)
        assert len(result.records) == 3
        assert result.status == STATUS_COMPLETED
        assert result.dataset.defined.all()
        fills = [r.filled["t0"] for r in result.records]
        assert fills == [100, 100, 50]
        assert [r.filled["t2"] for r in result.records] == [0, 0, 0]

    def test_already_complete_runs_zero_iterations(self):
        ds = grid_dataset([0, 0], seed=4)
        result = run_cdlc(ds, CdlcConfig(network=FAST_NET, select_per_task=10))
        assert result.records == []
        assert np.array_equal(result.dataset.labels, ds.labels)

    def test_unreachable_threshold_stalls(self):
        ds = grid_dataset([30], seed=5)
        cfg = CdlcConfig(network=FAST_NET, select_per_task=10,
                         min_confidence={"t0": 0.5})  # > 0 is unattainable
        result = run_cdlc(ds, cfg)
        assert result.status == STATUS_STALLED
        assert len(result.records) == 1
        assert sum(result.records[0].filled.values()) == 0

    def test_max_iterations_stops_early(self):
        ds = grid_dataset([300], seed=6)
        cfg = CdlcConfig(network=FAST_NET, select_per_task=50, max_iterations=2)
        result = run_cdlc(ds, cfg)
        assert result.status == STATUS_MAX_ITERATIONS
        assert len(result.records) == 2

    def test_undefined_strictly_decreasing_and_originals_untouched(self):
        ds = grid_dataset([120, 60], seed=7)
        cfg = CdlcConfig(network=FAST_NET, select_per_task=50)
        result = run_cdlc(ds, cfg)
        remaining = [sum(r.remaining.values()) for r in result.records]
        assert all(a > b for a, b in zip([180] + remaining, remaining))
        originally = ds.defined
        assert np.array_equal(result.dataset.labels[originally], ds.labels[originally])
        assert result.dataset.defined.all()

    def test_assignments_target_previously_undefined_cells_once(self):
        ds = grid_dataset([80, 40], seed=8)
        cfg = CdlcConfig(network=FAST_NET, select_per_task=30)
        result = run_cdlc(ds, cfg)
        seen = set()
        for a in result.assignments:
            cell = (a.instance, a.task_index)
            assert cell not in seen
            assert not ds.defined[a.instance, a.task_index]
            seen.add(cell)
        assert len(seen) == 120

    def test_run_determinism(self):
        ds = grid_dataset([70], seed=9)
        cfg = CdlcConfig(network=FAST_NET, select_per_task=25)
        r1 = run_cdlc(ds, cfg)
        r2 = run_cdlc(ds, cfg)
        assert r1.assignments == r2.assignments
        assert [r.filled for r in r1.records] == [r.filled for r in r2.records]

    def test_no_defined_labels_errors(self):
        ds = grid_dataset([50], seed=10)
        ds.defined[:] = False
        with pytest.raises(ValueError):
            run_cdlc(ds, CdlcConfig(network=FAST_NET, select_per_task=10))
