"""Walsh-Hadamard transform vs a dense Sylvester-recursion oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchprec.fwht import fwht, fwht_inplace, is_pow2, next_pow2, pad_pow2


def dense_hadamard(d):
    h = np.array([[1.0]])
    while h.shape[0] < d:
        h = np.block([[h, h], [h, -h]])
    return h


def test_first_basis_vector():
    np.testing.assert_array_equal(fwht([1.0, 0.0, 0.0, 0.0]), np.ones(4))


def test_all_ones():
    np.testing.assert_array_equal(fwht([1.0, 1.0, 1.0, 1.0]), [4.0, 0.0, 0.0, 0.0])


@pytest.mark.parametrize("d", [1, 2, 4, 8, 16, 64, 256])
def test_matches_dense_oracle_integers(d):
    rng = np.random.default_rng(d)
    x = rng.integers(-100, 100, size=d).astype(np.float64)
    np.testing.assert_array_equal(fwht(x), dense_hadamard(d) @ x)


@pytest.mark.parametrize("d", [2, 16, 128])
def test_matches_dense_oracle_reals(d):
    rng = np.random.default_rng(d + 1)
    x = rng.standard_normal(d)
    expected = dense_hadamard(d) @ x
    got = fwht(x)
    assert np.abs(got - expected).max() <= 1e-12 * max(1.0, np.abs(expected).max())


def test_batched_rows_match_vector_calls():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((5, 32))
    batched = fwht(xs)
    for i in range(5):
        np.testing.assert_array_equal(batched[i], fwht(xs[i]))


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(min_value=0, max_value=7),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_involution_up_to_scale(k, seed):
    d = 2**k
    rng = np.random.default_rng(seed)
    x = rng.integers(-50, 50, size=d).astype(np.float64)
    np.testing.assert_array_equal(fwht(fwht(x)), d * x)
    y = rng.standard_normal(d)
    twice = fwht(fwht(y))
    assert np.abs(twice - d * y).max() <= 1e-12 * max(1.0, d * np.abs(y).max())


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(min_value=0, max_value=8),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_parseval(k, seed):
    d = 2**k
    x = np.random.default_rng(seed).standard_normal(d)
    lhs = float(np.sum(fwht(x) ** 2))
    rhs = d * float(np.sum(x**2))
    assert lhs == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    d = 64
    x, y = rng.standard_normal((2, d))
    alpha, beta = rng.standard_normal(2)
    lhs = fwht(alpha * x + beta * y)
    rhs = alpha * fwht(x) + beta * fwht(y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


class TestPadding:
    def test_pad_three(self):
        np.testing.assert_array_equal(pad_pow2([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0, 0.0])

    def test_already_pow2(self):
        x = np.arange(4.0)
        out = pad_pow2(x)
        np.testing.assert_array_equal(out, x)
        assert out is not x  # caller owns a fresh buffer

    def test_pad_five(self):
        out = pad_pow2(np.ones(5))
        assert out.shape == (8,)
        np.testing.assert_array_equal(out[5:], 0.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pad_pow2(np.array([]))


class TestValidation:
    def test_non_pow2_rejected(self):
        with pytest.raises(ValueError, match="power of two"):
            fwht(np.ones(3))

    def test_inplace_requires_float64(self):
        with pytest.raises(TypeError):
            fwht_inplace(np.ones(4, dtype=np.float32))

    def test_inplace_mutates(self):
        x = np.ones(4)
        out = fwht_inplace(x)
        assert out is x
        np.testing.assert_array_equal(x, [4.0, 0.0, 0.0, 0.0])

    def test_helpers(self):
        assert next_pow2(5) == 8
        assert next_pow2(8) == 8
        assert is_pow2(1) and is_pow2(64) and not is_pow2(24)
