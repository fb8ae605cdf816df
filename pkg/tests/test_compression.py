"""Randomized compression with adaptive sampling."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.errors import ContractViolationError, InvalidArgumentError, RankBudgetExhaustedError
from src.core.flops import flop_counter
from src.core.state import CompressionState, NodeStatus
from src.models.sampling import SamplingConfig
from src.services.cluster_tree import build_balanced_tree, postorder
from src.services.compression import _Compressor, compress, generate_random
from src.services.generators import DenseSource, ranks_by_depth, synthetic_hss
from src.services.hss_core import hankel_rank_oracle, hss_max_rank, reconstruct_dense
from src.services.ulv import ulv_factor, ulv_solve


class TestRandomVectors:
    def test_deterministic(self):
        np.testing.assert_array_equal(generate_random(50, 4, seed=3), generate_random(50, 4, seed=3))

    def test_extension_keeps_earlier_columns(self):
        whole = generate_random(40, 8, seed=1)
        first = generate_random(40, 4, seed=1)
        rest = generate_random(40, 4, seed=1, offset=4)
        np.testing.assert_array_equal(np.hstack([first, rest]), whole)

    def test_row_and_column_streams_differ(self):
        assert not np.array_equal(generate_random(10, 2, seed=0, stream=0), generate_random(10, 2, seed=0, stream=1))

    def test_standard_normal_moments(self):
        n = 100_000
        R = generate_random(n, 2, seed=42)
        for column in R.T:
            assert abs(column.mean()) < 5 / np.sqrt(n)
            assert abs(column.var() - 1.0) < 5 * np.sqrt(2 / n)


class TestSamplingConfig:
    def test_gap_defaults_to_oversampling(self):
        assert SamplingConfig(oversampling=7).min_gap == 7
        assert SamplingConfig(oversampling=7, gap=3).min_gap == 3

    def test_rejects_budget_below_d0(self):
        with pytest.raises(ValueError):
            SamplingConfig(d0=64, max_d=32)


class TestSerialInvariant:
    def test_valid_restart_boundary(self):
        state = CompressionState(5)
        for node in (3, 4):
            state.mark(node, NodeStatus.COMPRESSED)
        state.mark(1, NodeStatus.PARTIALLY_COMPRESSED)
        assert state.check_serial_invariant([3, 4, 1, 2, 0]) == (True, None)

    def test_two_partial_nodes(self):
        state = CompressionState(3)
        state.mark(1, NodeStatus.PARTIALLY_COMPRESSED)
        state.mark(2, NodeStatus.PARTIALLY_COMPRESSED)
        ok, _ = state.check_serial_invariant([1, 2, 0])
        assert not ok

    def test_compressed_node_after_the_partial_one(self):
        state = CompressionState(3)
        state.mark(1, NodeStatus.PARTIALLY_COMPRESSED)
        state.mark(2, NodeStatus.COMPRESSED)
        ok, message = state.check_serial_invariant([1, 2, 0])
        assert not ok
        assert "follows" in message

    def test_all_compressed(self):
        state = CompressionState(3)
        assert not state.all_compressed()
        for node in (1, 2):
            state.mark(node, NodeStatus.COMPRESSED)
        assert not state.all_compressed()
        state.mark(0, NodeStatus.COMPRESSED)
        assert state.all_compressed()


def test_diagonal_needs_one_pass():
    A = np.diag(np.arange(1.0, 65.0))
    form, report = compress(DenseSource(A), build_balanced_tree(64, 8), 1e-10, SamplingConfig(d0=16, delta_d=8))
    assert report.restarts == []
    assert report.max_rank == 0
    assert all(attempt.accepted for attempt in report.trace)


class TestAdaptiveSampling:
    @pytest.fixture(scope="class")
    def rank20(self):
        tree = build_balanced_tree(512, 64)
        source, _ = synthetic_hss(tree, 20, seed=6)
        return tree, source

    def test_restarts_until_the_gap_is_met(self, rank20):
        tree, source = rank20
        cfg = SamplingConfig(d0=8, delta_d=8, gap=4)
        form, report = compress(source, tree, 1e-10, cfg)
        assert report.restarts == [16, 24]
        assert report.restart_count == 2
        assert report.d_final == 24
        assert form.d_used == 24
        assert report.max_rank == 20
        A = source.dense()
        assert np.linalg.norm(A - reconstruct_dense(form)) <= 1e-8 * np.linalg.norm(A)

    def test_no_restart_with_enough_samples(self, rank20):
        tree, source = rank20
        _, report = compress(source, tree, 1e-10, SamplingConfig(d0=24, delta_d=8, gap=4))
        assert report.restarts == []

    def test_trace_marks_the_failed_attempts(self, rank20):
        tree, source = rank20
        _, report = compress(source, tree, 1e-10, SamplingConfig(d0=8, delta_d=8, gap=4))
        failed = [attempt for attempt in report.trace if not attempt.accepted]
        assert [attempt.d for attempt in failed] == [8, 16]
        first_leaf = postorder(tree)[0]
        assert all(attempt.node == first_leaf for attempt in failed)
        accepted = {attempt.node for attempt in report.trace if attempt.accepted}
        assert accepted == set(postorder(tree)) - {tree.root_id}

    def test_progress_events(self, rank20):
        tree, source = rank20
        events = []
        compress(source, tree, 1e-10, SamplingConfig(d0=8, delta_d=8, gap=4), progress_callback=events.append)
        stages = [event.stage for event in events]
        assert stages.count("restarting") == 2
        assert stages.count("sampling") == 3
        assert stages[-1] == "done"

    def test_budget_exhausted(self, rank20):
        tree, source = rank20
        with pytest.raises(RankBudgetExhaustedError) as info:
            compress(source, tree, 1e-10, SamplingConfig(d0=8, delta_d=8, gap=4, max_d=16))
        assert info.value.report is not None
        assert info.value.report.restarts == [16]

    def test_schedules_find_the_same_ranks(self, rank20):
        tree, source = rank20
        slow, _ = compress(source, tree, 1e-10, SamplingConfig(d0=8, delta_d=8, gap=4))
        fast, _ = compress(source, tree, 1e-10, SamplingConfig(d0=24, delta_d=8, gap=4))
        for node in postorder(tree)[:-1]:
            assert slow.nodes[node].row_rank == fast.nodes[node].row_rank


@pytest.mark.parametrize("eps", [1e-4, 1e-8, 1e-12])
@pytest.mark.parametrize("seed", range(50))
def test_reconstruction_accuracy(eps, seed):
    n = (256, 512, 1024)[seed % 3]
    rank = 4 + (7 * seed) % 29
    tree = build_balanced_tree(n, 64)
    source, _ = synthetic_hss(tree, rank, seed=seed)
    form, _ = compress(source, tree, eps, SamplingConfig(d0=32, delta_d=16, seed=seed))
    A = source.dense()
    assert np.linalg.norm(A - reconstruct_dense(form)) <= 100 * eps * np.linalg.norm(A)


def test_randomized_ranks_match_the_oracle():
    tree = build_balanced_tree(512, 64)
    source, _ = synthetic_hss(tree, ranks_by_depth(tree, [6, 9, 11]), seed=8)
    form, _ = compress(source, tree, 1e-10, SamplingConfig(d0=32, delta_d=16))
    for node in postorder(tree)[:-1]:
        oracle = hankel_rank_oracle(source, tree, node, 1e-10)
        found = max(form.nodes[node].row_rank, form.nodes[node].col_rank)
        assert oracle <= found <= oracle + 5


@pytest.mark.parametrize("seed", range(20))
def test_recovers_the_exact_rank(seed):
    rank = 3 + seed % 10
    tree = build_balanced_tree(512, 64)
    source, truth = synthetic_hss(tree, rank, seed=seed)
    form, _ = compress(source, tree, 1e-10, SamplingConfig(d0=32, delta_d=16, seed=seed))
    assert truth.max_rank == rank
    assert hss_max_rank(form) == rank


def test_flops_scale_with_dense_products():
    tree = build_balanced_tree(512, 64)
    source, _ = synthetic_hss(tree, 8, seed=2)
    _, report = compress(source, tree, 1e-10, SamplingConfig(d0=32, delta_d=16), source_probes=0)
    ratio = report.flops / (4 * 512**2 * report.d_final)
    assert 0.5 <= ratio <= 2.0


def test_flop_counter_is_cumulative():
    before = flop_counter.total
    tree = build_balanced_tree(64, 16)
    source, _ = synthetic_hss(tree, 2, seed=0)
    _, report = compress(source, tree, 1e-10, SamplingConfig(d0=16, delta_d=8))
    assert flop_counter.total - before >= report.flops > 0


def test_sample_schedules_agree():
    tree = build_balanced_tree(1024, 128)
    source, _ = synthetic_hss(tree, ranks_by_depth(tree, [40, 60]), seed=3)
    results = []
    for step in (25, 50):
        form, report = compress(source, tree, 1e-10, SamplingConfig(d0=step, delta_d=step))
        results.append((form, report))
    (form_a, report_a), (form_b, report_b) = results
    assert abs(report_a.max_rank - report_b.max_rank) <= 3
    b = np.random.default_rng(0).standard_normal(1024)
    A = source.dense()
    for form in (form_a, form_b):
        x = ulv_solve(ulv_factor(form), b)
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-8


class TestErrors:
    def test_order_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            compress(DenseSource(np.eye(8)), build_balanced_tree(16, 4), 1e-8, SamplingConfig(d0=16))

    def test_negative_eps(self):
        with pytest.raises(InvalidArgumentError):
            compress(DenseSource(np.eye(8)), build_balanced_tree(8, 4), -1.0, SamplingConfig(d0=16))

    def test_inconsistent_source(self):
        class Lying(DenseSource):
            def multiply(self, x):
                return 2.0 * super().multiply(x)

        with pytest.raises(ContractViolationError):
            compress(Lying(np.eye(32)), build_balanced_tree(32, 8), 1e-8, SamplingConfig(d0=16))


def test_max_rank_helper_agrees_with_report(compressed_512):
    _, form, report = compressed_512
    assert hss_max_rank(form) == report.max_rank == 8


def test_local_samples_match_the_dense_restriction():
    tree = build_balanced_tree(256, 32)
    source, _ = synthetic_hss(tree, 5, seed=6)
    compressor = _Compressor(source, tree, 1e-12, SamplingConfig(d0=24, delta_d=8), None)
    compressor.run()
    A = source.dense()
    R_row, R_col = compressor.R_row, compressor.R_col
    cols = slice(0, compressor.d)
    for node in postorder(tree)[:-1]:
        info = tree.node(node)
        S_row, S_col = compressor._local_samples(node, cols)
        if tree.is_leaf(node):
            inside = slice(info.lo, info.hi)
            D = A[inside, inside]
            np.testing.assert_allclose(S_row + D @ R_row[inside], (A @ R_row)[inside], atol=1e-10)
            np.testing.assert_allclose(S_col + D.T @ R_col[inside], (A.T @ R_col)[inside], atol=1e-10)
        outside = np.r_[0 : info.lo, info.hi : tree.n]
        rows, columns = compressor._candidate_index(node)
        expected_row = A[np.ix_(rows, outside)] @ R_row[outside]
        expected_col = A[np.ix_(outside, columns)].T @ R_col[outside]
        assert np.linalg.norm(S_row - expected_row) <= 1e-9 * np.linalg.norm(A) * np.linalg.norm(R_row)
        assert np.linalg.norm(S_col - expected_col) <= 1e-9 * np.linalg.norm(A) * np.linalg.norm(R_col)
