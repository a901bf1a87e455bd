# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from ..model import (
    aggregate, encode_graph_context, graph_names, init_encoder, init_pathway,
    init_token
)
from .base import BaseVariant


class Variant(BaseVariant):
    '''One attention encoder per graph, a second one across graphs.'''

    def names(self, i):
        return graph_names(i)

    def init_params(self, params, rng):
        cfg = self.config

        for i in range(cfg.k):
            init_pathway(params, rng, self.names(i), cfg, cfg.d)

        self.init_aggregator(params, rng)

    def init_aggregator(self, params, rng):
        init_token(params, rng, 'agg.token', self.config.d)
        init_encoder(params, rng, 'agg.encoder', self.config.d,
                     self.config.d, self.config)

    def graph_embeddings(self, ctx, params, rng=None):
        return [
            encode_graph_context(ctx, i, params, self.config,
                                 names=self.names(i), rng=rng)
            for i in range(self.config.k)
        ]

    def forward(self, ctx, params, rng=None):
        return aggregate(self.graph_embeddings(ctx, params, rng), params,
                         self.config)

    def token_count(self):
        return 1 + 2 * (1 + self.config.n)

    def aggregator_length(self):
        return 1 + self.config.k
