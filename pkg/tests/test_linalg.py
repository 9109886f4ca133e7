import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsbeam.errors import RankDeficient, SingularMatrix
from irsbeam.linalg import hermitian, lu_factor, max_eigenvalue_psd, pseudo_inverse_tall, \
    solve_linear


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_hermitian_is_conjugate_transpose(rng):
    a = crandn(rng, 3, 5)
    assert np.array_equal(hermitian(a), a.conj().T)


@given(st.integers(1, 8), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_solve_residual(n, seed):
    rng = np.random.default_rng(seed)
    a = crandn(rng, n, n) + n * np.eye(n)
    b = crandn(rng, n, 2)
    x = solve_linear(a, b)
    assert np.allclose(a @ x, b, atol=1e-10)


def test_solve_identity(rng):
    b = crandn(rng, 4)
    assert np.allclose(solve_linear(np.eye(4), b), b)


@pytest.mark.parametrize("a", [
    np.zeros((3, 3)),
    np.array([[1.0, 2.0], [2.0, 4.0]]),
    np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]]),
])
def test_singular_detected(a):
    with pytest.raises(SingularMatrix):
        solve_linear(a, np.ones(a.shape[0]))


def test_non_square_rejected():
    with pytest.raises(ValueError):
        lu_factor(np.ones((2, 3)))


def test_pseudo_inverse_left_inverse(rng):
    h = crandn(rng, 6, 3)
    p = pseudo_inverse_tall(h)
    assert np.allclose(p @ h, np.eye(3), atol=1e-12)
    assert np.allclose(p, np.linalg.pinv(h), atol=1e-12)


def test_pseudo_inverse_rank_deficient(rng):
    c = crandn(rng, 5)
    h = np.stack([c, 2.0 * c], axis=1)
    with pytest.raises(RankDeficient):
        pseudo_inverse_tall(h)
    with pytest.raises(ValueError):
        pseudo_inverse_tall(crandn(rng, 2, 3))


def test_max_eigenvalue(rng):
    x = crandn(rng, 5, 3)
    a = x @ x.conj().T
    assert max_eigenvalue_psd(a) == pytest.approx(np.linalg.norm(x, 2) ** 2, rel=1e-12)
    assert max_eigenvalue_psd(np.zeros((2, 2))) == 0.0
    with pytest.raises(ValueError):
        max_eigenvalue_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))
