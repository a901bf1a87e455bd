# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Count-min sketch over 64-bit pin ids.

Estimates never undercount: each row only ever adds to the cell an item
hashes to, and the estimate is the minimum over rows.
'''

import struct

import mmh3
import numpy as np

DEFAULT_WIDTH = 2048
DEFAULT_DEPTH = 4
DEFAULT_FLOOR = 1e-9


def row_seeds(depth, seed=0):
    '''Derive one 32-bit murmur seed per row from `seed`.'''
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))

    return [int(value) for value in
            rng.integers(0, 1 << 32, size=depth, dtype=np.uint64)]


class CountMinSketch(object):
    def __init__(self, width=DEFAULT_WIDTH, depth=DEFAULT_DEPTH, seed=0,
                 seeds=None):
        assert width >= 1, 'width must be at least 1'
        assert depth >= 1, 'depth must be at least 1'

        self.width = int(width)
        self.depth = int(depth)
        self.seeds = list(seeds) if seeds is not None \
            else row_seeds(depth, seed)

        assert len(self.seeds) == self.depth, 'one seed per row is required'

        self.counters = np.zeros((self.depth, self.width), dtype=np.int64)
        self.total = 0

    def cells(self, item):
        key = struct.pack('<Q', int(item) & 0xFFFFFFFFFFFFFFFF)

        return [mmh3.hash64(key, seed=seed, signed=False)[0] % self.width
                for seed in self.seeds]

    def increment(self, item):
        for row, cell in enumerate(self.cells(item)):
            self.counters[row, cell] += 1

        self.total += 1

    def increment_many(self, items):
        for item in items:
            self.increment(item)

    def estimate(self, item):
        return int(min(self.counters[row, cell]
                       for row, cell in enumerate(self.cells(item))))

    def probability(self, item, floor=DEFAULT_FLOOR):
        assert floor > 0, 'floor must be positive'

        return max(self.estimate(item) / max(self.total, 1), floor)

    def probabilities(self, items, floor=DEFAULT_FLOOR):
        return np.array([self.probability(item, floor) for item in items],
                        dtype=np.float64)

    def compatible(self, other):
        return self.width == other.width and self.depth == other.depth \
            and self.seeds == other.seeds

    def merge(self, other):
        '''Sketch of the concatenation of both streams.'''
        assert self.compatible(other), 'can only merge compatible sketches'

        merged = CountMinSketch(self.width, self.depth, seeds=self.seeds)
        merged.counters = self.counters + other.counters
        merged.total = self.total + other.total

        return merged

    def to_arrays(self):
        return {
            'counters': self.counters.copy(),
            'total': np.array([self.total], dtype=np.int64),
            'seeds': np.array(self.seeds, dtype=np.int64)
        }

    @classmethod
    def from_arrays(cls, arrays):
        counters = np.asarray(arrays['counters'], dtype=np.int64)
        depth, width = counters.shape

        sketch = cls(width, depth,
                     seeds=[int(seed) for seed in arrays['seeds']])
        sketch.counters = counters.copy()
        sketch.total = int(np.asarray(arrays['total']).ravel()[0])

        return sketch

    def __eq__(self, other):
        return isinstance(other, CountMinSketch) and self.compatible(other) \
            and self.total == other.total \
            and np.array_equal(self.counters, other.counters)


# Function aliases.

def cms_increment(sketch, item):
    sketch.increment(item)


def cms_estimate(sketch, item):
    return sketch.estimate(item)


def cms_probability(sketch, item, floor=DEFAULT_FLOOR):
    return sketch.probability(item, floor)
