# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Dense tensor math with reverse-mode gradients.

`Tensor` wraps a float64 numpy array. Every operation below records how to
push gradients back to its inputs; `Tensor.backward()` replays that tape in
reverse topological order. All operations accept leading batch dimensions.
'''

import math

from dataclasses import dataclass

import numpy as np

from .utils import DataError

EPS_NORM = 1e-12


class Tensor(object):
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, parents=(), backward=None,
                 name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = parents
        self._backward = backward

    def __repr__(self):
        return 'Tensor(%s%s)' % (
            'name=%r, ' % self.name if self.name else '',
            'shape=%s' % (self.shape, ))

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate(self, grad):
        if not self.requires_grad:
            return

        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def backward(self, grad=None):
        if grad is None:
            assert self.data.size == 1, 'backward() needs a scalar output'
            grad = np.ones_like(self.data)

        order = []
        seen = set()
        stack = [(self, False)]

        while stack:
            node, expanded = stack.pop()

            if expanded:
                order.append(node)
                continue

            if id(node) in seen:
                continue

            seen.add(id(node))
            stack.append((node, True))

            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.accumulate(grad)

        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def parameter(data, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True,
                  name=name)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value

    return Tensor(value)


def _result(data, parents, backward):
    requires_grad = any(parent.requires_grad for parent in parents)

    return Tensor(data, requires_grad=requires_grad, parents=parents,
                  backward=backward if requires_grad else None)


def unbroadcast(grad, shape):
    '''Sum `grad` down to `shape` after numpy broadcasting.'''
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)

    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)

    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        a.accumulate(unbroadcast(grad, a.shape))
        b.accumulate(unbroadcast(grad, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def neg(a):
    def backward(grad):
        a.accumulate(-grad)

    return _result(-a.data, (a, ), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        a.accumulate(unbroadcast(grad * b.data, a.shape))
        b.accumulate(unbroadcast(grad * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


def scale(a, factor):
    def backward(grad):
        a.accumulate(grad * factor)

    return _result(a.data * factor, (a, ), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    assert a.ndim >= 2 and b.ndim >= 2, 'matmul needs matrices'
    assert a.shape[-1] == b.shape[-2], \
        'shape mismatch %s @ %s' % (a.shape, b.shape)

    def backward(grad):
        a.accumulate(unbroadcast(grad @ np.swapaxes(b.data, -1, -2),
                                 a.shape))
        b.accumulate(unbroadcast(np.swapaxes(a.data, -1, -2) @ grad,
                                 b.shape))

    return _result(a.data @ b.data, (a, b), backward)


def relu(a):
    active = a.data > 0

    def backward(grad):
        a.accumulate(grad * active)

    return _result(np.where(active, a.data, 0.0), (a, ), backward)


def reshape(a, shape):
    def backward(grad):
        a.accumulate(grad.reshape(a.shape))

    return _result(a.data.reshape(shape), (a, ), backward)


def transpose(a, axes):
    inverse = np.argsort(axes)

    def backward(grad):
        a.accumulate(np.transpose(grad, inverse))

    return _result(np.transpose(a.data, axes), (a, ), backward)


def swap_last(a):
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]

    return transpose(a, axes)


def _is_advanced(key):
    parts = key if isinstance(key, tuple) else (key, )

    return any(isinstance(part, (list, np.ndarray)) for part in parts)


def getitem(a, key):
    advanced = _is_advanced(key)

    def backward(grad):
        full = np.zeros_like(a.data)

        if advanced:
            np.add.at(full, key, grad)
        else:
            full[key] += grad

        a.accumulate(full)

    return _result(a.data[key], (a, ), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(tensor) for tensor in tensors]
    sizes = [tensor.shape[axis] for tensor in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(grad):
        for tensor, part in zip(tensors, np.split(grad, bounds, axis=axis)):
            tensor.accumulate(part)

    data = np.concatenate([tensor.data for tensor in tensors], axis=axis)

    return _result(data, tuple(tensors), backward)


def broadcast_to(a, shape):
    def backward(grad):
        a.accumulate(unbroadcast(grad, a.shape))

    return _result(np.broadcast_to(a.data, shape).copy(), (a, ), backward)


def total(a, axis=None, keepdims=False):
    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)

        a.accumulate(np.broadcast_to(grad, a.shape))

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a, ), backward)


def mean(a, axis=None):
    count = a.data.size if axis is None else a.shape[axis]

    return scale(total(a, axis=axis), 1.0 / count)


def dot_rows(a, b):
    '''Row-wise dot products of two `(..., d)` tensors.'''
    return total(mul(a, b), axis=-1)


def softmax(a, mask=None, axis=-1):
    '''Softmax with max subtraction; `mask` (broadcastable, True = keep)
    removes entries, whose weight becomes exactly zero.'''
    logits = a.data

    if mask is not None:
        logits = np.where(mask, logits, -np.inf)

    shifted = logits - logits.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    weights /= weights.sum(axis=axis, keepdims=True)

    def backward(grad):
        inner = (grad * weights).sum(axis=axis, keepdims=True)
        a.accumulate(weights * (grad - inner))

    return _result(weights, (a, ), backward)


def softmax_cross_entropy(logits, targets):
    '''Mean over rows of `-log softmax(logits)[row, targets[row]]`.'''
    data = logits.data
    rows = np.arange(data.shape[0])
    targets = np.asarray(targets, dtype=np.int64)

    shifted = data - data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm

    loss = -log_probs[rows, targets].mean()

    def backward(grad):
        delta = np.exp(log_probs)
        delta[rows, targets] -= 1.0
        logits.accumulate(grad * delta / data.shape[0])

    return _result(np.asarray(loss), (logits, ), backward)


def layer_norm(a, eps=1e-5):
    '''Normalize the last axis to zero mean and unit variance.'''
    centered = a.data - a.data.mean(axis=-1, keepdims=True)
    deviation = np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    normalized = centered / deviation

    def backward(grad):
        inner = (grad * normalized).mean(axis=-1, keepdims=True)
        a.accumulate((grad - grad.mean(axis=-1, keepdims=True)
                      - normalized * inner) / deviation)

    return _result(normalized, (a, ), backward)


def dropout(a, rate, rng):
    '''Inverted dropout; identity when `rate` is 0 or `rng` is None.'''
    if not rate or rng is None:
        return a

    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)

    return mul(a, Tensor(keep))


def l2_normalize(a, axis=-1):
    norm = np.sqrt((a.data ** 2).sum(axis=axis, keepdims=True))

    if np.any(norm <= EPS_NORM):
        raise DataError('degenerate embedding')

    unit = a.data / norm

    def backward(grad):
        inner = (grad * unit).sum(axis=axis, keepdims=True)
        a.accumulate((grad - unit * inner) / norm)

    return _result(unit, (a, ), backward)


def ffn_forward(x, W, b):
    '''ReLU(xW + b).'''
    return relu(add(matmul(as_tensor(x), as_tensor(W)), as_tensor(b)))


def attention(Q, K, V, mask=None):
    '''softmax(QK^T / sqrt(d_k)) V; `mask` flags valid keys `(..., m)`.'''
    Q, K, V = as_tensor(Q), as_tensor(K), as_tensor(V)

    assert Q.shape[-1] == K.shape[-1], 'query/key widths differ'
    assert K.shape[-2] == V.shape[-2], 'key/value row counts differ'

    logits = scale(matmul(Q, swap_last(K)), 1.0 / math.sqrt(Q.shape[-1]))

    if mask is not None:
        mask = np.expand_dims(np.asarray(mask, dtype=bool), -2)

    return matmul(softmax(logits, mask=mask), V)


@dataclass
class AttentionParams:
    '''Multi-head attention weights.

    `wq`, `wk` and `wv` are `d_in x d_in` and hold the per-head
    `d_in x d_head` projections side by side (head j owns columns
    `j*d_head:(j+1)*d_head`); `wo` is `d_in x d_out`.
    '''
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    heads: int

    def __post_init__(self):
        d_in = self.wq.shape[0]

        assert d_in % self.heads == 0, \
            'width %d is not divisible by %d heads' % (d_in, self.heads)

    @property
    def d_head(self):
        return self.wq.shape[0] // self.heads

    def head(self, j):
        columns = slice(j * self.d_head, (j + 1) * self.d_head)

        return self.wq[:, columns], self.wk[:, columns], self.wv[:, columns]


def split_heads(x, heads):
    '''`(..., m, H*d)` to `(..., H, m, d)`.'''
    lead = x.shape[:-2]
    m, width = x.shape[-2:]
    x = reshape(x, lead + (m, heads, width // heads))

    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]

    return transpose(x, axes)


def merge_heads(x):
    '''`(..., H, m, d)` to `(..., m, H*d)`.'''
    lead = x.shape[:-3]
    heads, m, width = x.shape[-3:]

    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    x = transpose(x, axes)

    return reshape(x, lead + (m, heads * width))


def multihead(X, p, mask=None):
    '''Concat(head_1..head_H) W^O, head_j = attention(XW_j^Q, XW_j^K,
    XW_j^V).'''
    X = as_tensor(X)

    assert X.shape[-1] == p.wq.shape[0], \
        'input width %d does not match attention width %d' \
        % (X.shape[-1], p.wq.shape[0])
    assert X.shape[-1] % p.heads == 0, \
        'width %d is not divisible by %d heads' % (X.shape[-1], p.heads)

    Q = split_heads(matmul(X, p.wq), p.heads)
    K = split_heads(matmul(X, p.wk), p.heads)
    V = split_heads(matmul(X, p.wv), p.heads)

    if mask is not None:
        # one mask for every head
        mask = np.expand_dims(np.asarray(mask, dtype=bool), -2)

    heads = attention(Q, K, V, mask=mask)

    return matmul(merge_heads(heads), p.wo)


def zero_grad(params):
    for tensor in params.values():
        tensor.zero_grad()


def grad_check(f, params, h=1e-5, floor=1e-8, analytic=None):
    '''Worst relative error between analytic and central-difference
    gradients of the scalar `f()` with respect to every entry of `params`.

    `analytic` overrides the gradients computed by `backward()`.
    '''
    assert 1e-7 <= h <= 1e-3, 'h must be within [1e-7, 1e-3]'

    zero_grad(params)
    value = f()

    if not np.all(np.isfinite(value.data)):
        raise DataError('non-finite function value')

    if analytic is None:
        value.backward()
        analytic = {
            name: tensor.grad if tensor.grad is not None
            else np.zeros_like(tensor.data)
            for name, tensor in params.items()
        }

    worst = 0.0

    for name, tensor in params.items():
        data = tensor.data
        expected = np.asarray(analytic[name])

        if not np.all(np.isfinite(expected)):
            raise DataError('non-finite gradient for `%s`' % name)

        for index in np.ndindex(*data.shape):
            saved = data[index]

            data[index] = saved + h
            plus = float(f().data)
            data[index] = saved - h
            minus = float(f().data)
            data[index] = saved

            if not (math.isfinite(plus) and math.isfinite(minus)):
                raise DataError('non-finite function value')

            numeric = (plus - minus) / (2.0 * h)
            exact = float(expected[index])

            error = abs(exact - numeric) / max(abs(exact), abs(numeric),
                                               floor)
            worst = max(worst, error)

    zero_grad(params)

    return worst
