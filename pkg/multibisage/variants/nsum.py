# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from ..numerics import add
from .merged import MergedNeighborsVariant, masked


class Variant(MergedNeighborsVariant):
    '''Element-wise sum of the neighbor tokens of all graphs.'''

    def combine(self, tokens, masks, params, modality, rng=None):
        tokens = masked(tokens, masks)

        merged = tokens[0]
        for token in tokens[1:]:
            merged = add(merged, token)

        return merged
