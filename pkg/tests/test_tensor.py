import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from affinecrack.errors import LabelError, ShapeError
from affinecrack.tensor import grad_check, matmul, relu, relu_backward, softmax, softmax_cross_entropy

finite = st.floats(-50, 50, allow_nan=False)


def test_matmul_examples():
    x = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(matmul(np.eye(3), x), x)
    assert matmul([[1, 2], [3, 4]], [[5], [6]]).tolist() == [[17], [39]]
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_associative(rng):
    a, b, c = (rng.standard_normal((8, 8)) for _ in range(3))
    left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
    assert np.max(np.abs(left - right)) <= 1e-9 * np.max(np.abs(left))


def test_relu_examples():
    assert relu(np.array([-1.0, 0.0, 2.0])).tolist() == [0, 0, 2]
    assert relu_backward(np.array([-1.0, 2.0]), np.array([5.0, 5.0])).tolist() == [0, 5]
    with pytest.raises(ShapeError):
        relu_backward(np.ones(2), np.ones(3))


@given(arrays(np.float64, (4, 5), elements=finite))
def test_relu_idempotent(x):
    assert np.array_equal(relu(relu(x)), relu(x))


def test_uniform_logits_loss():
    res = softmax_cross_entropy(np.zeros((3, 312)), [0, 17, 311])
    assert res.loss == pytest.approx(math.log(312), abs=1e-12)
    assert math.log(312) == pytest.approx(5.7430, abs=1e-4)


def test_saturated_loss():
    logits = np.zeros((1, 312))
    logits[0, 42] = 50.0
    assert softmax_cross_entropy(logits, [42]).loss < 1e-10


def test_label_errors():
    with pytest.raises(LabelError):
        softmax_cross_entropy(np.zeros((1, 312)), [312])
    with pytest.raises(LabelError):
        softmax_cross_entropy(np.zeros((1, 312)), [-1])
    with pytest.raises(ShapeError):
        softmax_cross_entropy(np.zeros((2, 312)), [1])


def test_cross_entropy_gradient_finite_differences(rng):
    logits = rng.standard_normal((2, 312))
    labels = np.array([5, 300])
    res = softmax_cross_entropy(logits, labels)
    # eps=1e-4 balances truncation (~eps^2) against roundoff on the smallest softmax entries
    err = grad_check(
        lambda z: softmax_cross_entropy(z.reshape(2, 312), labels).loss, logits, res.dlogits, eps=1e-4
    )
    assert err < 1e-6


@given(arrays(np.float64, (3, 312), elements=finite), st.lists(st.integers(0, 311), min_size=3, max_size=3))
def test_cross_entropy_properties(logits, labels):
    res = softmax_cross_entropy(logits, labels)
    assert res.loss >= 0
    assert np.all(np.abs(res.dlogits.sum(axis=1)) < 1e-9)


quarters = st.integers(-200, 200).map(lambda k: k / 4)


# quarter-integer values keep the shifted logits exactly representable
@given(arrays(np.float64, (3, 312), elements=quarters), st.integers(-400, 400).map(lambda k: k / 4))
def test_softmax_shift_invariance(logits, c):
    p = softmax(logits)
    assert np.all(np.abs(p.sum(axis=1) - 1) < 1e-12)
    q = softmax(logits + c)
    assert np.max(np.abs(p - q)) < 1e-12
    assert np.array_equal(np.argmax(p, axis=1), np.argmax(logits, axis=1))


def test_grad_check_examples():
    assert grad_check(lambda t: float(t[0] ** 2), np.array([3.0]), np.array([6.0]), eps=1e-5) < 1e-8
    assert grad_check(lambda t: 7.0, np.array([1.0, 2.0]), np.zeros(2)) == 0.0
    assert grad_check(lambda t: float(t[0] ** 2), np.array([3.0]), np.array([5.0])) > 0.1


def test_grad_check_skip_predicate():
    # |t| has a kink at 0; steps that straddle it are excluded when asked
    f = lambda t: float(abs(t[0] - 5e-6) + t[1] ** 2)  # noqa: E731
    theta, grad = np.array([0.0, 1.0]), np.array([-1.0, 2.0])
    assert grad_check(f, theta, grad) == pytest.approx(0.5)
    straddles = lambda t: t[0] > 0  # noqa: E731
    assert grad_check(f, theta, grad, skip=straddles) < 1e-8
