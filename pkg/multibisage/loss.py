# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Training objectives.

Both losses are softmax cross-entropies over logQ-corrected logits
`scale * <x_q, x_e> - log Q(e)`:

- in-batch: each query against every positive of the batch, corrected with
  the positive-stream frequencies `Q_p`;
- mixed negatives: each query against its own positive and a shared set of
  uniformly sampled negatives, corrected with the negative-stream
  frequencies `Q_n`. The positive's own term is part of the denominator.

The training objective is their sum.
'''

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .model import PinContext, variant_forward
from .numerics import (
    Tensor, add, as_tensor, concat, dot_rows, matmul, reshape, scale,
    softmax_cross_entropy, swap_last
)
from .sketch import DEFAULT_FLOOR

Sketches = namedtuple('Sketches', ['positives', 'negatives'])


@dataclass
class Batch:
    queries: PinContext
    positives: PinContext
    negatives: PinContext

    def __post_init__(self):
        size = self.queries.batch_size

        assert size >= 1, 'a batch needs at least one pair'
        assert self.positives.batch_size == size, \
            'positives must align with queries'
        assert self.negatives.batch_size in (0, size), \
            'expected %d negatives, got %d' \
            % (size, self.negatives.batch_size)

    @property
    def query_ids(self):
        return self.queries.pins

    @property
    def positive_ids(self):
        return self.positives.pins

    @property
    def negative_ids(self):
        return self.negatives.pins


def _log_probabilities(q):
    q = np.asarray(q, dtype=np.float64)

    assert np.all(q > 0), 'probabilities must be positive'
    assert np.all(q <= 1), 'probabilities must be at most 1'

    return np.log(q)


def corrected_logits(xq, xe, q, logit_scale):
    '''`(|B|, |C|)` matrix of `scale * <xq_i, xe_j> - log q_j` (no tape).'''
    xq = np.asarray(getattr(xq, 'data', xq))
    xe = np.asarray(getattr(xe, 'data', xe))

    return logit_scale * xq @ xe.T - _log_probabilities(q)[None, :]


def sampled_softmax_loss(xq, xe, qp, logit_scale=1.0):
    '''In-batch sampled softmax with logQ correction.'''
    xq, xe = as_tensor(xq), as_tensor(xe)

    assert xq.shape == xe.shape, 'queries and positives must align'

    correction = Tensor(-_log_probabilities(qp)[None, :])
    logits = add(scale(matmul(xq, swap_last(xe)), logit_scale), correction)

    return softmax_cross_entropy(logits, np.arange(xq.shape[0]))


def mixed_negative_loss(xq, xe, xm, qn_pos, qn_neg, logit_scale=1.0):
    '''Each query against its positive and all sampled negatives.'''
    xq, xe, xm = as_tensor(xq), as_tensor(xe), as_tensor(xm)

    assert xq.shape == xe.shape, 'queries and positives must align'

    size = xq.shape[0]

    positive = add(scale(dot_rows(xq, xe), logit_scale),
                   Tensor(-_log_probabilities(qn_pos)))
    positive = reshape(positive, (size, 1))

    negative = add(scale(matmul(xq, swap_last(xm)), logit_scale),
                   Tensor(-_log_probabilities(qn_neg)
                          .reshape(1, -1)))

    logits = concat([positive, negative], axis=1)

    return softmax_cross_entropy(logits, np.zeros(size, dtype=np.int64))


def update_sketches(batch, sketches):
    '''Count this batch's positives and negatives; must run before the
    batch's loss.'''
    sketches.positives.increment_many(batch.positive_ids)
    sketches.negatives.increment_many(batch.negative_ids)


def stack_contexts(contexts):
    return PinContext(*[
        np.concatenate([getattr(ctx, name) for ctx in contexts], axis=0)
        for name in ('pins', 'visual', 'textual', 'nbr_visual',
                     'nbr_textual', 'mask')
    ])


def combined_loss(batch, params, cfg, sketches, rng=None,
                  floor=DEFAULT_FLOOR):
    '''In-batch plus mixed-negative loss.

    Returns `(total, parts)` where `total` is a scalar `Tensor` (call
    `backward()` on it) and `parts` maps `in_batch`/`mixed` to floats.
    '''
    size = batch.queries.batch_size
    count = batch.negatives.batch_size

    everything = stack_contexts([batch.queries, batch.positives,
                                 batch.negatives])
    embeddings = variant_forward(everything, params, cfg, rng=rng)

    xq = embeddings[:size]
    xe = embeddings[size:2 * size]
    xm = embeddings[2 * size:2 * size + count]

    qp = sketches.positives.probabilities(batch.positive_ids, floor)
    qn_pos = sketches.negatives.probabilities(batch.positive_ids, floor)
    qn_neg = sketches.negatives.probabilities(batch.negative_ids, floor)

    in_batch = sampled_softmax_loss(xq, xe, qp, cfg.logit_scale)
    mixed = mixed_negative_loss(xq, xe, xm, qn_pos, qn_neg, cfg.logit_scale)

    total = add(in_batch, mixed)

    return total, {
        'in_batch': float(in_batch.data),
        'mixed': float(mixed.data)
    }
