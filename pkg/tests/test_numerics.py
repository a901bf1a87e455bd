# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import math

import numpy as np
import pytest

from multibisage.numerics import (
    AttentionParams, Tensor, attention, concat, ffn_forward, grad_check,
    l2_normalize, layer_norm, matmul, mul, multihead, parameter, softmax,
    softmax_cross_entropy, total
)
from multibisage.utils import DataError


def weighted(tensor, weights):
    '''Scalar direction with generic gradients.'''
    return total(mul(tensor, Tensor(weights)))


def test_ffn_zero():
    out = ffn_forward(np.ones((2, 3)), np.zeros((3, 4)), np.zeros(4))

    assert np.array_equal(out.data, np.zeros((2, 4)))


def test_ffn_clips_negative():
    out = ffn_forward([[1.0, 2.0]], [[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])

    assert out.data.tolist() == [[1.0, 0.0]]


def test_ffn_gradient(rng):
    x = parameter(rng.standard_normal((3, 4)))
    W = parameter(rng.standard_normal((4, 5)))
    b = parameter(rng.standard_normal(5))
    direction = rng.standard_normal((3, 5))

    error = grad_check(lambda: weighted(ffn_forward(x, W, b), direction),
                       {'x': x, 'W': W, 'b': b}, h=1e-5)

    assert error <= 1e-6


def test_attention_single_row(rng):
    V = rng.standard_normal((1, 3))
    out = attention(rng.standard_normal((1, 2)), rng.standard_normal((1, 2)),
                    V)

    assert np.allclose(out.data, V, atol=0, rtol=1e-15)


def test_attention_zero_queries(rng):
    V = rng.standard_normal((4, 3))
    out = attention(np.zeros((4, 2)), rng.standard_normal((4, 2)), V)

    assert np.allclose(out.data, np.tile(V.mean(axis=0), (4, 1)), atol=1e-12)


def brute_force_attention(Q, K, V):
    m, d = Q.shape
    out = np.zeros((m, V.shape[1]))

    for i in range(m):
        logits = [sum(Q[i, c] * K[j, c] for c in range(d)) / math.sqrt(d)
                  for j in range(m)]
        top = max(logits)
        weights = [math.exp(logit - top) for logit in logits]
        norm = sum(weights)

        for j in range(m):
            out[i] += weights[j] / norm * V[j]

    return out


def test_attention_brute_force(rng):
    Q, K, V = (rng.standard_normal((4, 3)) for _ in range(3))

    assert np.allclose(attention(Q, K, V).data, brute_force_attention(Q, K, V),
                       atol=1e-12, rtol=0)


def test_attention_rows_are_convex(rng):
    V = rng.standard_normal((5, 2))
    out = attention(rng.standard_normal((5, 3)), rng.standard_normal((5, 3)),
                    V).data

    assert np.all(out <= V.max(axis=0) + 1e-12)
    assert np.all(out >= V.min(axis=0) - 1e-12)


def test_attention_shape_mismatch(rng):
    with pytest.raises(AssertionError):
        attention(rng.standard_normal((2, 3)), rng.standard_normal((2, 4)),
                  rng.standard_normal((2, 2)))


def test_masked_keys_get_no_weight(rng):
    logits = Tensor(rng.standard_normal((2, 4)))
    mask = np.array([[True, True, False, True], [True, False, False, False]])

    weights = softmax(logits, mask=mask).data

    assert weights[0, 2] == 0.0
    assert weights[1].tolist() == [1.0, 0.0, 0.0, 0.0]
    assert np.allclose(weights.sum(axis=1), 1.0)


def identity_params(width, heads):
    eye = np.eye(width)

    return AttentionParams(parameter(eye), parameter(eye), parameter(eye),
                           parameter(eye), heads)


def test_head_width():
    assert identity_params(8, 2).d_head == 4

    with pytest.raises(AssertionError):
        identity_params(8, 3)


def test_single_head_identity(rng):
    X = rng.standard_normal((2, 5, 4))

    out = multihead(X, identity_params(4, 1))

    assert np.allclose(out.data, attention(X, X, X).data, atol=1e-12)


def test_multihead_masks_padding(rng):
    X = rng.standard_normal((1, 4, 4))
    mask = np.array([[True, True, False, False]])
    p = AttentionParams(*(parameter(rng.standard_normal((4, 4)))
                          for _ in range(4)), heads=2)

    changed = X.copy()
    changed[0, 2:] = rng.standard_normal((2, 4))

    first = multihead(X, p, mask=mask).data[0, :2]
    second = multihead(changed, p, mask=mask).data[0, :2]

    assert np.allclose(first, second, atol=1e-12)


def test_multihead_gradient(rng):
    X = parameter(rng.standard_normal((2, 3, 4)))
    p = AttentionParams(*(parameter(rng.standard_normal((4, 4)) * 0.5)
                          for _ in range(3)),
                        parameter(rng.standard_normal((4, 6)) * 0.5),
                        heads=2)
    mask = np.array([[True, True, True], [True, True, False]])
    direction = rng.standard_normal((2, 3, 6))

    params = {'X': X, 'wq': p.wq, 'wk': p.wk, 'wv': p.wv, 'wo': p.wo}
    error = grad_check(lambda: weighted(multihead(X, p, mask=mask), direction),
                       params, floor=1e-6)

    assert error <= 1e-4


def test_l2_normalize():
    assert np.allclose(l2_normalize(Tensor([3.0, 4.0])).data, [0.6, 0.8],
                       atol=1e-15)


def test_l2_normalize_fixed_point(rng):
    unit = rng.standard_normal(6)
    unit /= np.linalg.norm(unit)

    assert np.allclose(l2_normalize(Tensor(unit)).data, unit, atol=1e-15)


def test_l2_normalize_degenerate():
    with pytest.raises(DataError, match='degenerate embedding'):
        l2_normalize(Tensor(np.zeros((2, 3))))


def test_l2_normalize_gradient(rng):
    x = parameter(rng.standard_normal((3, 4)))
    direction = rng.standard_normal((3, 4))

    assert grad_check(lambda: weighted(l2_normalize(x), direction),
                      {'x': x}) <= 1e-6


def test_layer_norm_gradient(rng):
    x = parameter(rng.standard_normal((2, 5)))
    direction = rng.standard_normal((2, 5))

    assert grad_check(lambda: weighted(layer_norm(x), direction),
                      {'x': x}) <= 1e-6


def test_softmax_cross_entropy(rng):
    logits = parameter(rng.standard_normal((3, 5)))
    targets = [0, 4, 2]

    value = softmax_cross_entropy(logits, targets).item()
    data = logits.data
    expected = np.mean([np.log(np.exp(data[i]).sum()) - data[i, t]
                        for i, t in enumerate(targets)])

    assert value == pytest.approx(expected, abs=1e-12)
    assert grad_check(lambda: softmax_cross_entropy(logits, targets),
                      {'logits': logits}) <= 1e-6


def test_concat_and_matmul_gradients(rng):
    a = parameter(rng.standard_normal((2, 3)))
    b = parameter(rng.standard_normal((2, 1)))
    W = parameter(rng.standard_normal((4, 2)))
    direction = rng.standard_normal((2, 2))

    def f():
        return weighted(matmul(concat([a, b], axis=1), W), direction)

    assert grad_check(f, {'a': a, 'b': b, 'W': W}) <= 1e-6


def test_shared_inputs_accumulate():
    x = parameter([3.0])
    y = total(mul(x, x) + x)
    y.backward()

    assert x.grad.tolist() == [7.0]


def test_quadratic():
    w = parameter([1.0, 2.0])

    def f():
        return total(mul(w, w))

    f().backward()
    assert w.grad.tolist() == [2.0, 4.0]

    assert grad_check(f, {'w': w}) <= 1e-9


def test_corrupted_gradient_is_caught():
    w = parameter([1.0, 2.0])

    error = grad_check(lambda: total(mul(w, w)), {'w': w},
                       analytic={'w': np.array([2.0, 8.0])})

    assert error > 0.3


def test_grad_check_step_range():
    w = parameter([1.0])

    with pytest.raises(AssertionError):
        grad_check(lambda: total(w), {'w': w}, h=1e-2)


def test_grad_check_rejects_non_finite():
    w = parameter([np.inf])

    with pytest.raises(DataError, match='non-finite'):
        grad_check(lambda: total(w), {'w': w})
