# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from ..model import ffn_stack, init_ffn
from ..numerics import concat
from .merged import MergedNeighborsVariant, masked


class Variant(MergedNeighborsVariant):
    '''Neighbor tokens of all graphs concatenated rank by rank and mixed by
    an FFN, one per modality.'''

    def init_params(self, params, rng):
        super(Variant, self).init_params(params, rng)

        cfg = self.config
        for modality in ('visual', 'textual'):
            init_ffn(params, rng, 'enc.combine_' + modality,
                     [cfg.k * cfg.d_h, cfg.d_h])

    def combine(self, tokens, masks, params, modality, rng=None):
        merged = concat(masked(tokens, masks), axis=-1)

        return ffn_stack(merged, params, 'enc.combine_' + modality,
                         self.config, rng)
