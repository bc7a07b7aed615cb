import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fatmargin import _kernels
from fatmargin.errors import ConfigurationError, StructureError
from fatmargin.kernels import KernelSpec, gram_matrix, independent_columns, kernel_eval

finite = st.floats(-50, 50, allow_nan=False)


def naive_gaussian(p, q, gamma):
    return math.exp(-gamma * sum((a - b) ** 2 for a, b in zip(p, q)))


def test_kernel_eval_examples():
    assert kernel_eval(KernelSpec.linear(), [1, 2], [3, 4]) == 11.0
    assert kernel_eval(KernelSpec.gaussian(0.5), [1, 2], [1, 2]) == 1.0
    assert kernel_eval(KernelSpec.gaussian(1.0), [0, 0], [1, 1]) == pytest.approx(math.exp(-2))


def test_kernel_eval_shape_mismatch():
    with pytest.raises(StructureError):
        kernel_eval(KernelSpec.linear(), [1, 2], [1, 2, 3])


@pytest.mark.parametrize("gamma", [0.0, -1.0, None, float("nan"), float("inf")])
def test_gaussian_needs_positive_gamma(gamma):
    with pytest.raises(ConfigurationError):
        KernelSpec("gaussian", gamma)


def test_unknown_kernel():
    with pytest.raises(ConfigurationError):
        KernelSpec("poly", 1.0)


@pytest.mark.parametrize("backend", _kernels.available_backends())
def test_gram_matches_double_loop(backend):
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    G = gram_matrix(KernelSpec.gaussian(0.3), A, B, backend=backend)
    for i in range(7):
        for j in range(5):
            assert G[i, j] == pytest.approx(naive_gaussian(A[i], B[j], 0.3), rel=1e-13, abs=1e-15)
    L = gram_matrix(KernelSpec.linear(), A, B)
    assert np.allclose(L, [[sum(a * b for a, b in zip(r, c)) for c in B] for r in A])


def test_gram_dimension_mismatch():
    with pytest.raises(StructureError):
        gram_matrix(KernelSpec.linear(), np.ones((2, 3)), np.ones((2, 2)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 4)), elements=finite),
       st.floats(1e-3, 2.0))
def test_gaussian_gram_symmetric_unit_diagonal_bounded(X, gamma):
    G = gram_matrix(KernelSpec.gaussian(gamma), X)
    assert np.array_equal(G, G.T)
    assert np.all(np.diag(G) == 1.0)
    assert np.all((G >= 0) & (G <= 1))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 10), st.integers(1, 3)), elements=finite),
       st.floats(1e-2, 1.0))
def test_gaussian_gram_positive_semidefinite(X, gamma):
    G = gram_matrix(KernelSpec.gaussian(gamma), X)
    assert np.linalg.eigvalsh(G).min() >= -1e-9


def test_backends_agree_on_gram():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(40, 4))
    results = [gram_matrix(KernelSpec.gaussian(0.7), A, backend=b) for b in _kernels.available_backends()]
    for G in results[1:]:
        assert np.allclose(G, results[0], rtol=1e-14, atol=1e-15)


def test_independent_columns_drops_duplicates():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 2))
    X = np.vstack([X, X[:3]])  # rows 6..8 repeat rows 0..2
    G = gram_matrix(KernelSpec.gaussian(0.5), X)
    chosen = independent_columns(G, 1e-10)
    assert chosen.size == 6
    assert len({tuple(X[j]) for j in chosen}) == 6


def test_independent_columns_full_rank_keeps_all():
    G = np.eye(5) * 2.0
    assert independent_columns(G).tolist() == [0, 1, 2, 3, 4]


def test_independent_columns_span():
    # the columns left out are reproduced by the chosen ones up to the threshold
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 2))
    G = gram_matrix(KernelSpec.gaussian(0.05), X)
    tol = 1e-6
    S = independent_columns(G, tol)
    assert 0 < S.size < 30
    coef = np.linalg.lstsq(G[np.ix_(S, S)], G[S], rcond=None)[0]
    resid = np.diag(G) - np.einsum("ij,ij->j", G[S], coef)
    assert resid.max() <= tol * 1.0 + 1e-9
