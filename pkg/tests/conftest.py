"""Shared fixtures: seeded problems and cached compressed forms."""

from __future__ import annotations

import numpy as np
import pytest

from src.models.sampling import SamplingConfig
from src.services.cluster_tree import build_balanced_tree
from src.services.compression import compress
from src.services.generators import DenseSource, synthetic_hss


def _kernel_matrix(n: int, width: float = 8.0, shift: float = 2.0) -> np.ndarray:
    """Smooth decaying kernel plus a diagonal shift: symmetric positive definite, low off-diagonal rank."""
    idx = np.arange(n)
    return 1.0 / (1.0 + np.abs(np.subtract.outer(idx, idx)) / width) + shift * np.eye(n)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_512():
    tree = build_balanced_tree(512, 64)
    source, truth = synthetic_hss(tree, 8, seed=5)
    return tree, source, truth


@pytest.fixture(scope="session")
def compressed_512(synthetic_512):
    tree, source, truth = synthetic_512
    form, report = compress(source, tree, 1e-10, SamplingConfig(d0=32, delta_d=16))
    return source, form, report


@pytest.fixture(scope="session")
def small_problem():
    tree = build_balanced_tree(64, 8)
    source, truth = synthetic_hss(tree, 3, seed=11)
    form, _ = compress(source, tree, 1e-12, SamplingConfig(d0=16, delta_d=8))
    return source, form


@pytest.fixture
def dense_source():
    def make(A: np.ndarray) -> DenseSource:
        return DenseSource(A)

    return make


@pytest.fixture(scope="session")
def kernel_512():
    """Symmetric smooth-kernel matrix and its compressed form."""
    tree = build_balanced_tree(512, 64)
    source = DenseSource(_kernel_matrix(512))
    form, report = compress(source, tree, 1e-10, SamplingConfig(d0=64, delta_d=32))
    return source, form, report


@pytest.fixture
def kernel_matrix():
    return _kernel_matrix
