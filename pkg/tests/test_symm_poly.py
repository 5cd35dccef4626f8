import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmcf import symm_poly as sp
from fbmcf.exceptions import DomainError, PreconditionError, UndefinedQuotientError


def brute_s(mu, k):
    return sum(np.prod(c) for c in itertools.combinations(mu, k)) if k else 1.0


finite = st.floats(-10, 10, allow_nan=False)
vectors = st.lists(finite, min_size=1, max_size=8)


# -- elementary symmetric polynomials ---------------------------------------
@pytest.mark.parametrize("mu,k,expected", [
    ((1, 1, 1), 0, 1.0),
    ((1, 1, 1), 2, 3.0),
    ((1, 2, 3), 3, 6.0),
    ((1, 2, 3), 1, 6.0),
])
def test_elementary_symmetric_examples(mu, k, expected):
    assert sp.elementary_symmetric(mu, k) == pytest.approx(expected)


@pytest.mark.parametrize("k", [-1, 4])
def test_elementary_symmetric_rejects_k(k):
    with pytest.raises(DomainError):
        sp.elementary_symmetric((1, 2, 3), k)


@given(vectors, st.data())
def test_elementary_symmetric_matches_enumeration(mu, data):
    k = data.draw(st.integers(0, len(mu)))
    expected = brute_s(mu, k)
    assert sp.elementary_symmetric(mu, k) == pytest.approx(expected, rel=1e-9, abs=1e-6)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
@given(mu=st.lists(st.floats(0.1, 5), min_size=2, max_size=6))
@settings(max_examples=30)
def test_homogeneity(c, mu):
    mu = np.array(mu)
    for k in range(len(mu) + 1):
        assert sp.elementary_symmetric(c * mu, k) == pytest.approx(
            c**k * sp.elementary_symmetric(mu, k), rel=1e-9)
    for k in range(1, len(mu) + 1):
        assert sp.quotient_q(c * mu, k) == pytest.approx(c * sp.quotient_q(mu, k), rel=1e-9)


# -- quotients --------------------------------------------------------------
@pytest.mark.parametrize("mu,k,expected", [((1, 1, 1), 1, 3.0), ((1, 1, 1), 2, 1.0)])
def test_quotient_examples(mu, k, expected):
    assert sp.quotient_q(mu, k) == pytest.approx(expected)


def test_quotient_undefined():
    with pytest.raises(UndefinedQuotientError):
        sp.quotient_q((1, -1), 2)


def test_quotient_threshold_is_relative():
    # s_1 = 1e-14 with s_2 ~ -1: below 1e-12 * max(1, |s_2|)
    with pytest.raises(UndefinedQuotientError):
        sp.quotient_q((1.0, -1.0 + 1e-14), 2)


# -- matrices ---------------------------------------------------------------
@pytest.mark.parametrize("M,k,expected", [
    (np.eye(3), 2, 3.0),
    (np.diag([1.0, 2.0, 3.0]), 2, 11.0),
    (np.zeros((3, 3)), 1, 0.0),
])
def test_symmetric_of_matrix_examples(M, k, expected):
    assert sp.symmetric_of_matrix(M, k) == pytest.approx(expected)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_minors_match_eigenvalues(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        M = sp.random_symmetric(rng, n, scale=3.0)
        lam = sp.eigenvalues(M)
        for k in range(n + 1):
            a = sp.principal_minor_sum(M, k)
            b = sp.elementary_symmetric(lam, k)
            assert a == pytest.approx(b, rel=1e-10, abs=1e-10 * max(1, abs(b)))


def test_eigenvalues_ascending():
    lam = sp.eigenvalues(np.diag([3.0, 1.0, 2.0]))
    assert list(lam) == [1.0, 2.0, 3.0]


def test_lower_triangle_is_authoritative():
    # symmetric matrices are stored triangularly; the upper entry is ignored
    M = np.array([[1.0, 2.0], [3.0, 1.0]])
    assert sp.symmetric_of_matrix(M, 2) == pytest.approx(1.0 - 9.0)


def test_dimension_limit():
    with pytest.raises(DomainError):
        sp.symmetric_of_matrix(np.eye(9), 1)


# -- gradients --------------------------------------------------------------
def test_grad_s1_is_identity():
    M = sp.random_symmetric(np.random.default_rng(0), 4)
    np.testing.assert_allclose(sp.grad_S_k(M, 1), np.eye(4), atol=1e-12)


def test_grad_s2_diag():
    np.testing.assert_allclose(sp.grad_S_k(np.diag([1.0, 2.0, 3.0]), 2), np.diag([5.0, 4.0, 3.0]),
                               atol=1e-12)


def test_grad_det_cofactor():
    rng = np.random.default_rng(1)
    M = sp.random_positive_definite(rng, 3)
    np.testing.assert_allclose(sp.grad_S_k(M, 3), np.linalg.det(M) * np.linalg.inv(M),
                               rtol=1e-9, atol=1e-9)


def _fd_grad(M, k, h=1e-5):
    n = M.shape[0]
    G = np.zeros_like(M)
    for i in range(n):
        for j in range(i, n):
            E = np.zeros_like(M)
            E[i, j] = E[j, i] = 1.0
            d = (sp.principal_minor_sum(M + h * E, k) - sp.principal_minor_sum(M - h * E, k)) / (2 * h)
            # symmetric perturbation moves both entries
            G[i, j] = G[j, i] = d if i == j else 0.5 * d
    return G


@pytest.mark.parametrize("n,k", [(2, 2), (3, 2), (4, 3), (5, 2)])
def test_grad_matches_finite_differences(n, k):
    rng = np.random.default_rng(10 * n + k)
    M = rng.uniform(-10, 10, size=(n, n))
    M = 0.5 * (M + M.T)
    G = sp.grad_S_k(M, k)
    scale = np.max(np.abs(G))
    np.testing.assert_allclose(G, _fd_grad(M, k), rtol=0, atol=1e-6 * scale)


# -- concavity of q_{k+1} ---------------------------------------------------
def test_hessian_zero_direction():
    assert sp.hessian_quadratic_q(np.eye(3), 1, np.zeros((3, 3))) == 0.0


def test_hessian_golden_value():
    # q_2 = s_2/s_1 at I along diag(1,-1,0): exact value -2/3
    B = np.diag([1.0, -1.0, 0.0])
    val = sp.hessian_quadratic_q(np.eye(3), 1, B)
    assert val == pytest.approx(-2.0 / 3.0, rel=1e-6)
    assert sp.hessian_quadratic_q(np.eye(3), 1, B, method="exact") == pytest.approx(-2.0 / 3.0)


@pytest.mark.parametrize("k", [1, 2])
def test_hessian_fd_matches_exact(k):
    rng = np.random.default_rng(k)
    for _ in range(20):
        M = sp.random_positive_definite(rng, 3)
        B = sp.random_symmetric(rng, 3)
        a = sp.hessian_quadratic_q(M, k, B)
        b = sp.hessian_quadratic_q(M, k, B, method="exact")
        assert a == pytest.approx(b, rel=1e-3, abs=1e-8)


def test_hessian_undefined_quotient():
    with pytest.raises(UndefinedQuotientError):
        sp.hessian_quadratic_q(np.diag([1.0, -1.0, 0.0]), 1, np.eye(3))


# -- pinching gap -----------------------------------------------------------
def test_pinching_gap_example():
    assert sp.pinching_gap(np.diag([1.0, -1.0]), 0.5) == pytest.approx(0.5)


def test_pinching_gap_precondition():
    with pytest.raises(PreconditionError):
        sp.pinching_gap(np.eye(3), 0.1)
    with pytest.raises(PreconditionError):
        sp.pinching_gap(np.diag([1.0, -1.0]), 0.0)


def test_pinching_gap_batch_agrees():
    rng = np.random.default_rng(3)
    Ms = sp.sample_pinching_matrices(rng, 3, 0.25, 200)
    batch = sp.pinching_gap_batch(Ms, 0.25)
    single = np.array([sp.pinching_gap(M, 0.25) for M in Ms])
    np.testing.assert_allclose(batch, single, rtol=1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.25, 1.0]))
@settings(max_examples=25)
def test_pinching_gap_positive_property(seed, eta):
    Ms = sp.sample_pinching_matrices(np.random.default_rng(seed), 3, eta, 500)
    assert np.all(sp.pinching_gap_batch(Ms, eta) > 0)
