# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Variants that merge the k neighbor token matrices rank by rank before a
single encoder.'''

import numpy as np

from ..model import (
    Names, encode, global_token, init_ffn, init_pathway, neighbor_tokens,
    pin_tokens
)
from ..numerics import Tensor, concat, l2_normalize, mul
from .base import BaseVariant

NAMES = Names('enc', None, 'enc.token', 'enc.encoder')


class MergedNeighborsVariant(BaseVariant):
    def init_params(self, params, rng):
        cfg = self.config

        init_pathway(params, rng, NAMES, cfg, cfg.d)

        for i in range(cfg.k):
            init_ffn(params, rng, 'g%d.nbr_visual' % i,
                     cfg.visual_widths(cfg.d_h))
            init_ffn(params, rng, 'g%d.nbr_textual' % i,
                     cfg.textual_widths(cfg.d_h))

    def combine(self, tokens, masks, params, modality, rng=None):
        '''Merge per-graph `(B, n, d_h)` tokens; `masks` are `(B, n, 1)`
        float arrays, 1 for real neighbors.'''
        raise NotImplementedError

    def forward(self, ctx, params, rng=None):
        cfg = self.config
        batch = ctx.batch_size

        visual, textual, masks = [], [], []
        for i in range(cfg.k):
            v, t = neighbor_tokens(ctx, i, params, 'g%d' % i, cfg, rng)

            visual.append(v)
            textual.append(t)
            masks.append(ctx.mask[:, i, :, None].astype(np.float64))

        tokens = [global_token(params, NAMES.token, batch)]
        tokens.extend(pin_tokens(ctx, params, NAMES.pin, cfg, rng))
        tokens.append(self.combine(visual, masks, params, 'visual', rng))
        tokens.append(self.combine(textual, masks, params, 'textual', rng))

        valid = ctx.mask.any(axis=1)
        mask = np.concatenate([np.ones((batch, 3), dtype=bool), valid,
                               valid], axis=1)

        return l2_normalize(encode(concat(tokens, axis=1), mask, params,
                                   NAMES.encoder, cfg))

    def token_count(self):
        return 1 + 2 * (1 + self.config.n)


def masked(tokens, masks):
    return [mul(token, Tensor(mask)) for token, mask in zip(tokens, masks)]
