import numpy as np
import pytest

from edgemlp.errors import DimensionMismatch, DomainError, InvalidParameter
from edgemlp.tensor import Rng, argmax_rows, elementwise, matmul, reduce, row_broadcast


def test_matmul_identity():
    a = Rng(3).normal(0, 1, (4, 6))
    np.testing.assert_array_equal(matmul(a, np.eye(6, dtype=np.float32)), a)


def test_matmul_hand_example():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    b = np.array([[5], [6]], dtype=np.float32)
    np.testing.assert_array_equal(matmul(a, b), [[17], [39]])


def test_matmul_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_matmul_distributes_and_associates():
    rng = Rng(11)
    a, b, c = (rng.normal(0, 1, (5, 5)) for _ in range(3))
    np.testing.assert_allclose(matmul(a, b + c), matmul(a, b) + matmul(a, c), rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=1e-5, atol=1e-5)


def test_relu_and_biased_variance():
    np.testing.assert_array_equal(elementwise("relu", np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
    assert reduce(np.array([[1.0], [2.0], [3.0]]), "var")[0] == pytest.approx(2 / 3)


def test_argmax_ties_go_low():
    assert argmax_rows(np.array([[0.1, 0.7, 0.2]]))[0] == 1
    assert argmax_rows(np.array([[0.5, 0.5, 0.1]]))[0] == 0


@pytest.mark.parametrize("op", ["sum", "mean", "var", "max"])
def test_reductions_match_scalar_loops(op):
    m = Rng(5).normal(0, 1, (7, 3), dtype=np.float64)
    got = reduce(m, op, axis=0)
    for j in range(3):
        col = [float(m[i, j]) for i in range(7)]
        mean = sum(col) / 7
        expected = {
            "sum": sum(col),
            "mean": mean,
            "var": sum((v - mean) ** 2 for v in col) / 7,
            "max": max(col),
        }[op]
        assert got[j] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        elementwise("log", np.array([1.0, -1.0]))
    with pytest.raises(DomainError):
        elementwise("sqrt", np.array([-0.5]))
    with pytest.raises(DomainError):
        elementwise("exp", np.array([1000.0]))
    with pytest.raises(DomainError):
        elementwise("div", np.ones(2), np.array([1.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        elementwise("add", np.ones(2), np.ones(3))


def test_row_broadcast():
    m = np.arange(6, dtype=np.float32).reshape(2, 3)
    np.testing.assert_array_equal(row_broadcast("add", m, np.array([1, 1, 1], dtype=np.float32)), m + 1)
    with pytest.raises(DimensionMismatch):
        row_broadcast("add", m, np.ones(2))


def test_bernoulli_edges_and_mean():
    rng = Rng(1)
    assert not rng.bernoulli(0.0, 1000).any()
    assert rng.bernoulli(1.0, 1000).all()
    draws = rng.bernoulli(0.3, 10**6)
    sigma = np.sqrt(0.3 * 0.7 / 10**6)
    assert abs(draws.mean() - 0.3) < 3 * sigma
    with pytest.raises(InvalidParameter):
        rng.bernoulli(1.5, 3)


def test_uniform_mean_bound():
    a = 2.0
    samples = Rng(2).uniform(-a, a, 10**6, dtype=np.float64)
    # U(-a, a) has variance a^2 / 3, so three standard errors of the mean:
    assert abs(samples.mean()) < 3 * a / np.sqrt(3 * 10**6)
    assert samples.min() >= -a and samples.max() < a


def test_shuffle_determinism_and_streams():
    first = Rng(42).shuffle(100)
    np.testing.assert_array_equal(first, Rng(42).shuffle(100))
    assert sorted(first) == list(range(100))
    assert not np.array_equal(Rng(42, "a").shuffle(100), Rng(42, "b").shuffle(100))


def test_rng_stream_is_pinned():
    # frozen draws guard against silent generator changes across platforms/versions
    np.testing.assert_array_equal(Rng(0).shuffle(8), FROZEN_SHUFFLE)


FROZEN_SHUFFLE = [3, 6, 4, 0, 7, 5, 2, 1]
