# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from ..model import Names, aggregate, init_ffn, pin_tokens
from .multibisage import Variant as MultiBiSageVariant


class Variant(MultiBiSageVariant):
    '''Per-graph encoders see only neighbor tokens; the pin's own tokens are
    appended to the cross-graph sequence.'''

    def names(self, i):
        prefix = 'g%d' % i

        return Names(None, prefix, prefix + '.token', prefix + '.encoder')

    def init_aggregator(self, params, rng):
        cfg = self.config

        init_ffn(params, rng, 'agg.pin_visual', cfg.visual_widths(cfg.d))
        init_ffn(params, rng, 'agg.pin_textual', cfg.textual_widths(cfg.d))

        super(Variant, self).init_aggregator(params, rng)

    def forward(self, ctx, params, rng=None):
        xs = self.graph_embeddings(ctx, params, rng)
        extra = pin_tokens(ctx, params, 'agg', self.config, rng)

        return aggregate(xs, params, self.config, extra=extra)

    def token_count(self):
        return 1 + 2 * self.config.n

    def aggregator_length(self):
        return 1 + self.config.k + 2
