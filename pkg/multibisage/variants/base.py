# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

class BaseVariant(object):
    def __init__(self, config):
        self.config = config

    def init_params(self, params, rng):
        raise NotImplementedError

    def forward(self, ctx, params, rng=None):
        raise NotImplementedError

    def token_count(self):
        '''Length of each first-level token sequence.'''
        raise NotImplementedError

    def aggregator_length(self):
        '''Length of the second-level sequence, 0 when there is none.'''
        return 0
