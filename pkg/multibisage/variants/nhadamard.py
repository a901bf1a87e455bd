# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from ..numerics import Tensor, add, mul
from .merged import MergedNeighborsVariant, masked


class Variant(MergedNeighborsVariant):
    '''Hadamard product of the neighbor tokens of all graphs; a graph with
    no neighbor at some rank contributes ones there.'''

    def combine(self, tokens, masks, params, modality, rng=None):
        factors = [add(token, Tensor(1.0 - mask))
                   for token, mask in zip(masked(tokens, masks), masks)]

        merged = factors[0]
        for factor in factors[1:]:
            merged = mul(merged, factor)

        return merged
