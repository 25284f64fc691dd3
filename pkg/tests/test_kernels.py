import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from softchain import dual as D
from softchain import kernels as K

GAMMA = 0.01


def test_gather_matches_definition(rng):
    X = rng.random((2, 5, 3, 4))
    Y = rng.integers(0, 5, size=(2, 5, 3, 4))
    out = K.gather1(X, Y)
    for i, j, k, l in np.ndindex(*Y.shape):
        assert out[i, j, k, l] == X[i, Y[i, j, k, l], k, l]
    with pytest.raises(K.KernelError):
        K.gather1(X, Y + 5)


def test_gather_example():
    X = np.array([[0.0, 1.0, 0.7, 0.9]])[:, :, None, None]
    Y = np.array([[2, 3, 0, 1]])[:, :, None, None]
    assert K.gather1(X, Y).ravel().tolist() == [0.7, 0.9, 0.0, 1.0]


def test_prod_and_empty_axis():
    X = np.array([[0.8, 0.5], [1.0, 0.25]])
    np.testing.assert_allclose(K.prod_d(X, 1), [0.4, 0.25])
    assert K.prod_d(np.ones((3, 0)), 1).tolist() == [1.0, 1.0, 1.0]


def test_softor_examples():
    assert K.softor(np.array([0.7]), 0, GAMMA) == 0.7
    assert K.softor(np.array([1.0, 1.0]), 0, GAMMA) == pytest.approx(1.0, abs=1e-15)
    assert abs(K.softor(np.array([0.3, 0.0]), 0, GAMMA) - 0.3) < 1e-3
    with pytest.raises(K.KernelError):
        K.softor(np.array([0.5]), 0, 0.0)
    with pytest.raises(K.KernelError):
        K.softor(np.ones((2, 2)), 0, GAMMA, scope="column")


def test_softor_bounds(rng):
    X = rng.random((200, 7))
    raw = K.softor_raw(X, 1, GAMMA)
    m = X.max(axis=1)
    assert (raw >= m - 1e-12).all() and (raw <= m + GAMMA * np.log(7) + 1e-12).all()
    out = K.softor(X, 1, GAMMA)
    assert out.min() >= 0 and out.max() <= 1


def test_softor_row_scope_normalizes_each_row():
    X = np.array([[1.0, 1.0], [0.2, 0.1]])
    glob = K.softor(X, 1, GAMMA, "global")
    row = K.softor(X, 1, GAMMA, "row")
    assert row[0] == pytest.approx(1.0) and glob[0] == pytest.approx(1.0)
    assert row[1] > glob[1]  # the second row is left unscaled


def test_softor_no_overflow_for_tiny_gamma():
    out = K.softor(np.array([1.0, 0.999]), 0, 1e-8)
    assert np.isfinite(out) and out == pytest.approx(1.0)


def test_softmax_saturates():
    np.testing.assert_allclose(K.softmax_d(np.array([[100.0, 0.0]]), 1), [[1.0, np.exp(-100.0)]], rtol=1e-12)


def test_stack_and_expand_shapes():
    xs = [np.zeros((2, 3))] * 4
    assert K.stack_d(xs, 0).shape == (4, 2, 3)
    assert K.stack_d(xs, 2).shape == (2, 3, 4)
    assert K.expand(np.ones((1, 3)), (5, 3)).shape == (5, 3)
    with pytest.raises(K.KernelError):
        K.expand(np.ones((2, 3)), (5, 3))
    with pytest.raises(K.KernelError):
        K.elementwise_mul(np.ones(2), np.ones(3))


def test_prob_sum():
    np.testing.assert_allclose(K.prob_sum(np.array([0.5, 0.5]), 0), 0.75)


def test_check_unit_interval():
    K.check_unit_interval(np.array([0.0, 1.0]))
    with pytest.raises(K.KernelError):
        K.check_unit_interval(np.array([1.1]))


@pytest.mark.parametrize("scope", ["global", "row"])
def test_softor_dual_matches_finite_differences(rng, scope):
    X = rng.random((3, 4)) * 1.5  # large enough to trigger normalization
    T = rng.normal(size=X.shape)
    ad = D.tangent(K.softor(D.Dual(X, T), 1, 0.1, scope))
    h = 1e-6
    fd = (K.softor(X + h * T, 1, 0.1, scope) - K.softor(X - h * T, 1, 0.1, scope)) / (2 * h)
    np.testing.assert_allclose(ad, fd, rtol=1e-6, atol=1e-8)


def test_softmax_dual_matches_finite_differences(rng):
    X = rng.normal(size=(2, 5))
    T = rng.normal(size=X.shape)
    ad = D.tangent(K.softmax_d(D.Dual(X, T), 1))
    h = 1e-6
    fd = (K.softmax_d(X + h * T, 1) - K.softmax_d(X - h * T, 1)) / (2 * h)
    np.testing.assert_allclose(ad, fd, rtol=1e-6, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(0, 1)), st.randoms(use_true_random=False))
def test_softor_permutation_invariant(x, r):
    perm = list(range(len(x)))
    r.shuffle(perm)
    assert K.softor(x, 0, GAMMA) == pytest.approx(K.softor(x[perm], 0, GAMMA), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(0, 1)))
def test_softor_vector_is_at_least_max_when_unscaled(x):
    out = K.softor(x, 0, GAMMA)
    assert 0 <= out <= 1 + 1e-12
    if K.softor_raw(x, 0, GAMMA) <= 1:
        assert out >= x.max() - 1e-12
