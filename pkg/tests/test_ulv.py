"""ULV factorization, solve and iterative refinement."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from src.core.errors import InvalidArgumentError
from src.models.hss import InterpolativeDecomposition, PermutedBasis
from src.models.sampling import SamplingConfig
from src.services.cluster_tree import build_balanced_tree, postorder
from src.services.compression import compress
from src.services.dense_kernels import id_compress
from src.services.generators import DenseSource, synthetic_hss, toeplitz_qchem
from src.services.hss_core import reconstruct_dense
from src.services.ulv import iterative_refinement, ulv_bytes, ulv_factor, ulv_solve


def _compressed(A: np.ndarray, leaf_size: int, eps: float):
    source = DenseSource(A)
    form, _ = compress(source, build_balanced_tree(A.shape[0], leaf_size), eps, SamplingConfig(d0=32, delta_d=32))
    return source, form


class TestOmega:
    @pytest.fixture
    def basis(self) -> PermutedBasis:
        rng = np.random.default_rng(0)
        Y = rng.standard_normal((4, 3)) @ rng.standard_normal((3, 9))
        return PermutedBasis.from_id(id_compress(Y, 1e-12))

    def test_annihilates_the_basis(self, basis):
        m, k = basis.rows, basis.rank
        expected = np.vstack([np.zeros((m - k, k)), np.eye(k)])
        np.testing.assert_allclose(basis.omega_dense() @ basis.expand(), expected, atol=1e-12)

    def test_apply_matches_the_dense_operator(self, basis):
        b = np.random.default_rng(1).standard_normal((basis.rows, 2))
        np.testing.assert_allclose(basis.omega_apply(b), basis.omega_dense() @ b, atol=1e-12)

    def test_apply_and_transpose(self, basis):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((basis.rank, 2))
        y = rng.standard_normal((basis.rows, 2))
        np.testing.assert_allclose(basis.apply(x), basis.expand() @ x, atol=1e-12)
        np.testing.assert_allclose(basis.apply_transpose(y), basis.expand().T @ y, atol=1e-12)

    def test_rank_zero_basis_is_a_permutation(self):
        decomposition = InterpolativeDecomposition(
            X=np.zeros((0, 3)), J=np.zeros(0, dtype=np.int64), perm=np.array([2, 0, 1]), T=np.zeros((0, 3))
        )
        basis = PermutedBasis.from_id(decomposition)
        b = np.array([[10.0], [20.0], [30.0]])
        np.testing.assert_array_equal(basis.omega_apply(b), b[[2, 0, 1]])


class TestFactor:
    def test_node_factors(self, small_problem):
        _, form = small_problem
        factors = ulv_factor(form)
        for node, fac in factors.nodes.items():
            U = form.nodes[node].U
            assert fac.lq.Q.shape == (U.rows, U.rows)
            np.testing.assert_allclose(fac.lq.Q @ fac.lq.Q.T, np.eye(U.rows), atol=1e-12)
            assert fac.top == U.rows - U.rank
            assert fac.D_tilde.shape == (U.rank, U.rank)

    def test_leaf_transformation(self, small_problem):
        _, form = small_problem
        factors = ulv_factor(form)
        leaf = form.tree.leaves()[0]
        U = form.nodes[leaf].U
        W = U.omega_apply(form.nodes[leaf].D)
        fac = factors.nodes[leaf]
        top = fac.top
        np.testing.assert_allclose(fac.lq.L @ fac.lq.Q_t, W[:top], atol=1e-12)
        np.testing.assert_allclose(fac.W_b, W[top:], atol=1e-12)

    def test_root_order_is_the_sum_of_child_ranks(self, small_problem):
        _, form = small_problem
        factors = ulv_factor(form)
        left, right = form.tree.children(form.tree.root_id)
        assert factors.root.order == form.nodes[left].row_rank + form.nodes[right].row_rank

    def test_storage_is_counted(self, small_problem):
        _, form = small_problem
        assert ulv_bytes(ulv_factor(form)) > 0


class TestSolve:
    def test_identity(self):
        _, form = _compressed(np.eye(64), 16, 1e-10)
        b = np.random.default_rng(0).standard_normal(64)
        np.testing.assert_allclose(ulv_solve(ulv_factor(form), b), b, atol=1e-14)

    def test_block_diagonal(self):
        rng = np.random.default_rng(1)
        blocks = [rng.standard_normal((16, 16)) + 16 * np.eye(16) for _ in range(4)]
        A = scipy.linalg.block_diag(*blocks)
        _, form = _compressed(A, 16, 1e-10)
        b = rng.standard_normal(64)
        x = ulv_solve(ulv_factor(form), b)
        expected = np.concatenate([np.linalg.solve(block, b[16 * i : 16 * (i + 1)]) for i, block in enumerate(blocks)])
        np.testing.assert_allclose(x, expected, atol=1e-12)

    def test_three_level_form_matches_dense(self):
        tree = build_balanced_tree(64, 8)
        source, _ = synthetic_hss(tree, 3, seed=12)
        form, _ = compress(source, tree, 1e-12, SamplingConfig(d0=16, delta_d=8))
        b = np.random.default_rng(4).standard_normal((64, 2))
        x = ulv_solve(ulv_factor(form), b)
        np.testing.assert_allclose(x, np.linalg.solve(reconstruct_dense(form), b), atol=1e-10)

    def test_synthetic(self, compressed_512):
        source, form, _ = compressed_512
        A = source.dense()
        b = np.random.default_rng(5).standard_normal(512)
        x = ulv_solve(ulv_factor(form), b)
        assert np.linalg.norm(A @ x - b) / (np.linalg.norm(A) * np.linalg.norm(x)) <= 1e-8
        reference = np.linalg.solve(A, b)
        assert np.linalg.norm(x - reference) / np.linalg.norm(reference) <= 1e-7

    @pytest.mark.parametrize("seed", range(50))
    def test_agrees_with_dense_lu(self, seed):
        tree = build_balanced_tree(256, 32)
        source, _ = synthetic_hss(tree, 5, seed=seed)
        form, _ = compress(source, tree, 1e-12, SamplingConfig(d0=32, delta_d=16, seed=seed))
        b = np.random.default_rng(seed).standard_normal(256)
        factors = ulv_factor(form)
        x = ulv_solve(factors, b)
        reference = scipy.linalg.lu_solve(scipy.linalg.lu_factor(source.dense()), b)
        assert np.linalg.norm(x - reference) / np.linalg.norm(reference) <= 1e-8
        refined = iterative_refinement(source, factors, b, tol=1e-10, max_iters=2)
        assert refined.converged
        assert refined.iterations <= 2

    def test_several_right_hand_sides(self, small_problem):
        source, form = small_problem
        B = np.random.default_rng(6).standard_normal((64, 3))
        X = ulv_solve(ulv_factor(form), B)
        assert X.shape == (64, 3)
        np.testing.assert_allclose(source.dense() @ X, B, atol=1e-10)

    def test_wrong_length(self, small_problem):
        _, form = small_problem
        with pytest.raises(InvalidArgumentError):
            ulv_solve(ulv_factor(form), np.ones(10))


class TestRefinement:
    def test_near_exact_factorization(self, compressed_512):
        source, form, _ = compressed_512
        b = np.random.default_rng(7).standard_normal(512)
        result = iterative_refinement(source, ulv_factor(form), b, tol=1e-12)
        assert result.converged
        assert result.iterations <= 2
        assert result.residuals[-1] <= 1e-12

    def test_coarse_factorization_on_a_well_conditioned_matrix(self, kernel_matrix):
        source, form = _compressed(kernel_matrix(512), 64, 1e-4)
        b = np.random.default_rng(8).standard_normal(512)
        result = iterative_refinement(source, ulv_factor(form), b, tol=1e-12, max_iters=25)
        assert result.converged
        assert result.iterations <= 25
        A = source.dense()
        assert np.linalg.norm(A @ result.x - b) / np.linalg.norm(b) <= 1e-12

    def test_residuals_decrease(self, kernel_matrix):
        source, form = _compressed(kernel_matrix(256), 32, 1e-4)
        b = np.random.default_rng(9).standard_normal(256)
        result = iterative_refinement(source, ulv_factor(form), b, tol=1e-12)
        assert all(later < earlier for earlier, later in zip(result.residuals, result.residuals[1:]))

    def test_zero_right_hand_side(self, small_problem):
        source, form = small_problem
        result = iterative_refinement(source, ulv_factor(form), np.zeros(64))
        assert result.converged
        assert result.iterations == 0
        assert not result.x.any()

    def test_divergence_is_flagged(self, small_problem):
        source, form = small_problem
        negated = DenseSource(-source.dense())
        b = np.random.default_rng(10).standard_normal(64)
        result = iterative_refinement(negated, ulv_factor(form), b, divergence_window=3)
        assert not result.converged
        assert result.iterations == 3
        assert result.residuals[1:] == sorted(result.residuals[1:])
        first = ulv_solve(ulv_factor(form), b)
        np.testing.assert_allclose(result.x, first)

    def test_coarse_qchem_is_flagged(self):
        n = 1024
        source = toeplitz_qchem(n)
        form, _ = compress(source, build_balanced_tree(n, 64), 1e-2, SamplingConfig())
        b = np.random.default_rng(11).standard_normal(n)
        result = iterative_refinement(source, ulv_factor(form), b, tol=1e-10, max_iters=25)
        assert not result.converged


def test_factor_leaves_every_non_root_node(small_problem):
    _, form = small_problem
    factors = ulv_factor(form)
    assert sorted(factors.nodes) == sorted(node for node in postorder(form.tree) if node != form.tree.root_id)
