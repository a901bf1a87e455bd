# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import numpy as np

from ..model import ffn_stack, glorot, init_ffn
from ..numerics import add, concat, l2_normalize, matmul, parameter
from .multibisage import Variant as MultiBiSageVariant


class Variant(MultiBiSageVariant):
    '''Per-graph encoders as MultiBiSage; the cross-graph encoder is
    replaced by ReLU(concat(x_{p,i}) W1 + b1) W2 + b2.'''

    def init_aggregator(self, params, rng):
        cfg = self.config

        init_ffn(params, rng, 'agg.ffn', [cfg.k * cfg.d, cfg.d])
        params['agg.out.W'] = parameter(glorot(rng, cfg.d, cfg.d))
        params['agg.out.b'] = parameter(np.zeros(cfg.d))

    def forward(self, ctx, params, rng=None):
        xs = self.graph_embeddings(ctx, params, rng)

        hidden = ffn_stack(concat(xs, axis=1), params, 'agg.ffn', self.config,
                           rng)
        out = add(matmul(hidden, params['agg.out.W']), params['agg.out.b'])

        return l2_normalize(out)

    def aggregator_length(self):
        return 0
