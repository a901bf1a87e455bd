# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import math

import numpy as np
import pytest

from conftest import toy_config, toy_context

from multibisage.loss import (
    Batch, Sketches, combined_loss, corrected_logits, mixed_negative_loss,
    sampled_softmax_loss, update_sketches
)
from multibisage.model import VARIANTS, init_params
from multibisage.numerics import grad_check, parameter
from multibisage.sketch import CountMinSketch


def unit_rows(rng, count, width):
    rows = rng.standard_normal((count, width))

    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def test_single_pair_in_batch():
    rng = np.random.default_rng(0)
    loss = sampled_softmax_loss(unit_rows(rng, 1, 4), unit_rows(rng, 1, 4),
                                [0.3])

    assert loss.item() == 0.0


def test_equal_dots_give_log_batch():
    rows = np.tile([[1.0, 0.0, 0.0]], (4, 1))
    loss = sampled_softmax_loss(rows, rows, np.full(4, 0.25))

    assert loss.item() == pytest.approx(math.log(4), abs=1e-12)


def test_in_batch_matches_full_softmax():
    rng = np.random.default_rng(1)
    catalog = unit_rows(rng, 50, 8)
    queries = unit_rows(rng, 50, 8)

    loss = sampled_softmax_loss(queries, catalog, np.full(50, 1 / 50),
                                logit_scale=3.0)

    logits = 3.0 * queries @ catalog.T
    expected = -np.mean([logits[i, i] - np.log(np.exp(logits[i]).sum())
                         for i in range(50)])

    assert loss.item() == pytest.approx(expected, abs=1e-6)


def test_correction_shift_invariance(rng):
    xq, xe = unit_rows(rng, 5, 4), unit_rows(rng, 5, 4)
    qp = rng.uniform(0.1, 0.9, size=5)

    first = sampled_softmax_loss(xq, xe, qp, logit_scale=2.0).item()
    second = sampled_softmax_loss(xq, xe, qp * 0.25, logit_scale=2.0).item()

    assert first == pytest.approx(second, abs=1e-12)


def test_corrected_logits(rng):
    xq, xe = unit_rows(rng, 3, 4), unit_rows(rng, 2, 4)
    q = np.array([0.5, 0.25])

    logits = corrected_logits(xq, xe, q, 2.0)

    assert logits.shape == (3, 2)
    assert logits[1, 1] == pytest.approx(2.0 * xq[1] @ xe[1] - math.log(0.25))


def test_probabilities_must_be_positive(rng):
    xq = unit_rows(rng, 2, 3)

    with pytest.raises(AssertionError):
        sampled_softmax_loss(xq, xq, [0.5, 0.0])

    with pytest.raises(AssertionError):
        mixed_negative_loss(xq, xq, xq, [0.5, 0.5], [-0.1, 0.5])


def test_mixed_without_negatives():
    rng = np.random.default_rng(2)
    xq = unit_rows(rng, 3, 4)

    loss = mixed_negative_loss(xq, unit_rows(rng, 3, 4), np.zeros((0, 4)),
                               np.full(3, 0.5), np.zeros(0))

    assert loss.item() == 0.0


def test_mixed_hand_example():
    xq = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    xm = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])

    loss = mixed_negative_loss(xq, xq, xm, [0.5, 0.5], [0.5, 0.5])

    assert loss.item() == pytest.approx(
        -math.log(math.e / (math.e + 2.0)), abs=1e-12)


def test_mixed_popularity_direction(rng):
    xq, xe, xm = (unit_rows(rng, 3, 4) for _ in range(3))
    base = mixed_negative_loss(xq, xe, xm, [0.1] * 3, [0.1] * 3).item()

    popular_positive = mixed_negative_loss(xq, xe, xm, [0.5, 0.1, 0.1],
                                           [0.1] * 3).item()
    popular_negative = mixed_negative_loss(xq, xe, xm, [0.1] * 3,
                                           [0.5, 0.1, 0.1]).item()

    assert popular_positive > base
    assert popular_negative < base


def test_loss_gradients(rng):
    xq = parameter(unit_rows(rng, 3, 4))
    xe = parameter(unit_rows(rng, 3, 4))
    xm = parameter(unit_rows(rng, 2, 4))
    qp = rng.uniform(0.05, 1.0, size=3)
    qn = rng.uniform(0.05, 1.0, size=2)
    params = {'xq': xq, 'xe': xe, 'xm': xm}

    assert grad_check(lambda: mixed_negative_loss(xq, xe, xm, qp, qn, 2.0),
                      params) <= 1e-6
    assert grad_check(lambda: sampled_softmax_loss(xq, xe, qp, 2.0),
                      {'xq': xq, 'xe': xe}) <= 1e-6


def toy_batch(cfg, size, negatives, seed=0):
    return Batch(toy_context(cfg, batch=size, seed=seed),
                 toy_context(cfg, batch=size, seed=seed + 100),
                 toy_context(cfg, batch=negatives, seed=seed + 200,
                             full=True))


def fresh_sketches():
    return Sketches(CountMinSketch(seed=0), CountMinSketch(seed=1))


def test_batch_validation(cfg):
    with pytest.raises(AssertionError):
        toy_batch(cfg, 3, 2)


def test_update_sketches(cfg):
    batch = toy_batch(cfg, 3, 3)
    sketches = fresh_sketches()

    update_sketches(batch, sketches)

    assert sketches.positives.total == 3
    assert sketches.negatives.total == 3


def test_combined_degenerate_batch(cfg):
    batch = toy_batch(cfg, 1, 0)
    sketches = fresh_sketches()
    update_sketches(batch, sketches)

    total, parts = combined_loss(batch, init_params(cfg), cfg, sketches)

    assert total.item() == 0.0
    assert parts == {'in_batch': 0.0, 'mixed': 0.0}


def test_combined_is_sum(cfg):
    batch = toy_batch(cfg, 3, 3)
    sketches = fresh_sketches()
    update_sketches(batch, sketches)

    total, parts = combined_loss(batch, init_params(cfg), cfg, sketches)

    assert total.item() == pytest.approx(parts['in_batch'] + parts['mixed'],
                                         abs=1e-12)


@pytest.mark.parametrize('seed', range(10))
def test_gradient_step_descends(seed):
    cfg = toy_config(logit_scale=5.0)
    params = init_params(cfg, seed)
    batch = toy_batch(cfg, 4, 4, seed=seed)
    sketches = fresh_sketches()
    update_sketches(batch, sketches)

    before, _ = combined_loss(batch, params, cfg, sketches)
    before.backward()

    for tensor in params.values():
        if tensor.grad is not None:
            tensor.data = tensor.data - 1e-3 * tensor.grad

    after, _ = combined_loss(batch, params, cfg, sketches)

    assert after.item() < before.item()


@pytest.mark.parametrize('variant', VARIANTS)
def test_combined_gradient(variant):
    cfg = toy_config(variant=variant, logit_scale=2.0)
    params = init_params(cfg, 4)
    batch = toy_batch(cfg, 2, 2, seed=9)
    sketches = fresh_sketches()
    update_sketches(batch, sketches)

    def f():
        return combined_loss(batch, params, cfg, sketches)[0]

    assert grad_check(f, params, floor=1e-8) <= 1e-4
