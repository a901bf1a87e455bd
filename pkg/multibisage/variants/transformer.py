# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import numpy as np

from ..model import (
    Names, encode, ffn_stack, global_token, init_pathway, pin_tokens
)
from ..numerics import as_tensor, concat, l2_normalize
from .base import BaseVariant

NAMES = Names('enc', 'enc', 'enc.token', 'enc.encoder')


class Variant(BaseVariant):
    '''A single encoder over one long sequence holding the neighbor tokens
    of every graph.'''

    def init_params(self, params, rng):
        init_pathway(params, rng, NAMES, self.config, self.config.d)

    def sequence(self, ctx, params, rng=None):
        cfg = self.config
        batch = ctx.batch_size
        count = ctx.k * ctx.n

        nbr_visual = ctx.nbr_visual.reshape(batch, count, cfg.d_v)
        nbr_textual = ctx.nbr_textual.reshape(batch, count, cfg.d_t)
        mask = ctx.mask.reshape(batch, count)

        tokens = [global_token(params, NAMES.token, batch)]
        tokens.extend(pin_tokens(ctx, params, NAMES.pin, cfg, rng))
        tokens.append(ffn_stack(as_tensor(nbr_visual), params,
                                'enc.nbr_visual', cfg, rng))
        tokens.append(ffn_stack(as_tensor(nbr_textual), params,
                                'enc.nbr_textual', cfg, rng))

        mask = np.concatenate([np.ones((batch, 3), dtype=bool), mask, mask],
                              axis=1)

        return concat(tokens, axis=1), mask

    def forward(self, ctx, params, rng=None):
        seq, mask = self.sequence(ctx, params, rng)

        return l2_normalize(encode(seq, mask, params, NAMES.encoder,
                                   self.config))

    def token_count(self):
        return 1 + 2 + 2 * self.config.k * self.config.n
