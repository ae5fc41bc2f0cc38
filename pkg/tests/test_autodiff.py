"""Primitive-level checks for the differentiation engine."""

import numpy as np
import pytest

from control_studio.autodiff import (
    Value, ShapeError, GradCheckError, backward, concat, exp, grad_check,
    matmul, mse, mul, relu, repeat_rows, scale, sigmoid, sliced, softmax,
    stack_rows, sum_all, sum_axis, tanh,
)


def test_softmax_closed_form():
    out = softmax(Value(np.array([0.0, np.log(3.0)])), axis=0)
    np.testing.assert_allclose(out.data, [0.25, 0.75], atol=1e-12)


def test_softmax_normalised_and_nonnegative():
    rng = np.random.default_rng(0)
    x = Value(rng.normal(scale=30.0, size=(5, 7)))  # large scale: stability matters
    out = softmax(x, axis=1)
    assert (out.data >= 0).all()
    np.testing.assert_allclose(out.data.sum(axis=1), np.ones(5), atol=1e-9)


def test_tanh_sigmoid_at_zero():
    assert tanh(Value(np.zeros(3))).data.tolist() == [0.0, 0.0, 0.0]
    assert sigmoid(Value(np.zeros(3))).data.tolist() == [0.5, 0.5, 0.5]


def test_matmul_identity():
    x = np.array([1.5, -2.0, 0.25])
    out = matmul(Value(np.eye(3)), Value(x))
    np.testing.assert_array_equal(out.data, x)


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as exc:
        matmul(Value(np.zeros((2, 3))), Value(np.zeros((4, 2))))
    assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)


def test_backward_of_sum_is_ones():
    x = Value(np.arange(5.0))
    backward(sum_all(x))
    np.testing.assert_array_equal(x.grad, np.ones(5))


def test_backward_mse_closed_form():
    # d/dx mean((x-0)^2) = 2x/n; x=[2], n=1 -> 4
    x = Value(np.array([2.0]))
    backward(mse(x, np.array([0.0])))
    np.testing.assert_allclose(x.grad, [4.0])


def test_backward_weighted_tanh_at_zero():
    # loss = w . tanh(x) at x=0 has gradient w (tanh'(0) = 1)
    w = np.array([0.3, -1.2, 2.0])
    x = Value(np.zeros(3))
    backward(matmul(Value(w), tanh(x)))
    np.testing.assert_allclose(x.grad, w, atol=1e-15)


def test_backward_rejects_nonscalar_loss():
    with pytest.raises(ShapeError):
        backward(Value(np.zeros(3)))


def test_shared_subexpression_accumulates_additively():
    # y = x*x reused twice: loss = y + y -> dl/dx = 4x
    x = Value(np.array([3.0]))
    y = mul(x, x)
    backward(sum_all(concat([y, y])))
    np.testing.assert_allclose(x.grad, [12.0])


def _brute_force_dag(leaf_values):
    """Pure-python scalar DAG with shared nodes; returns f(leaves) -> float."""
    def f(vals):
        a, b, c = vals
        t1 = a * b
        t2 = np.tanh(t1 + c)
        t3 = t1 * t2  # t1 shared
        t4 = t2 + t3  # t2 shared
        return float(t4 * t4 + t1)
    return f


def test_dag_gradients_match_brute_force_evaluator():
    rng = np.random.default_rng(3)
    leaves = rng.normal(size=3)
    f = _brute_force_dag(leaves)

    def graph(vs):
        a, b, c = vs
        t1 = mul(a, b)
        t2 = tanh(t1 + c)
        t3 = mul(t1, t2)
        t4 = t2 + t3
        return sum_all(mul(t4, t4) + t1)

    vals = [Value(np.array(v)) for v in leaves]
    out = graph(vals)
    assert abs(float(out.data) - f(leaves)) < 1e-12
    backward(out)
    eps = 1e-6
    for i, v in enumerate(vals):
        bumped = leaves.copy()
        bumped[i] += eps
        dipped = leaves.copy()
        dipped[i] -= eps
        numeric = (f(bumped) - f(dipped)) / (2 * eps)
        assert abs(float(v.grad) - numeric) < 1e-8


def test_slice_concat_stack_repeat_grads():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 3))

    def f(vs):
        v = vs[0]
        rows = stack_rows([v[0], v[2]])
        rep = repeat_rows(v[1], 3)
        return sum_all(mul(concat([rows, rep]), concat([rows, rep])))

    assert grad_check(f, [x]) < 1e-8


def test_grad_check_linear_regression_loss():
    rng = np.random.default_rng(7)
    w = rng.normal(size=(4, 3))
    x = rng.normal(size=3)
    y = rng.normal(size=4)
    err = grad_check(lambda vs: mse(matmul(vs[0], vs[1]), y), [w, x])
    assert err < 1e-6


def test_grad_check_negative_control_detects_wrong_gradient():
    def bad_tanh(a):
        out_data = np.tanh(a.data)

        def backprop(out):
            a.grad += out.grad  # wrong: pretends tanh' == 1

        return Value(out_data, (a,), backprop)

    x = np.array([1.3, -0.4])
    err = grad_check(lambda vs: sum_all(bad_tanh(vs[0])), [x])
    assert err > 1e-2


def test_grad_check_rejects_bad_eps_and_nonfinite():
    with pytest.raises(ValueError):
        grad_check(lambda vs: sum_all(vs[0]), [np.ones(2)], eps=1.0)
    with pytest.raises(GradCheckError) as exc:
        grad_check(lambda vs: sum_all(mul(vs[0], np.inf)), [np.ones(2)])
    assert "non-finite" in str(exc.value)


def test_elementwise_and_softmax_grads():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(3, 4))
    for op in (tanh, sigmoid, relu, exp):
        assert grad_check(lambda vs, op=op: sum_all(mul(op(vs[0]), vs[0])), [x]) < 1e-7
    assert grad_check(lambda vs: sum_all(mul(softmax(vs[0], axis=1), vs[0])), [x]) < 1e-7
    assert grad_check(lambda vs: sum_all(mul(sum_axis(vs[0], 0), sum_axis(vs[0], 0))), [x]) < 1e-7


def test_scale_and_slice_backward():
    x = Value(np.arange(6.0).reshape(2, 3))
    loss = sum_all(scale(sliced(x, (slice(None), slice(0, 2))), 3.0))
    backward(loss)
    np.testing.assert_array_equal(x.grad, [[3.0, 3.0, 0.0], [3.0, 3.0, 0.0]])
