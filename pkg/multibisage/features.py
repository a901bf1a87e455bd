# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Per-pin visual and textual feature vectors.

On disk (`BSFT`): magic, u32 count, u32 d_v, u32 d_t, then per pin a u64 id
followed by d_v + d_t float32 values, all little endian.
'''

import struct

import numpy as np

from .fs import ensure_parent
from .utils import DataError

MAGIC = b'BSFT'
HEADER = struct.Struct('<4sIII')


class FeatureStore(object):
    def __init__(self, ids, visual, textual):
        self.ids = np.asarray(ids, dtype=np.uint64)
        self.visual = np.asarray(visual, dtype=np.float64)
        self.textual = np.asarray(textual, dtype=np.float64)

        assert self.visual.ndim == 2 and self.textual.ndim == 2, \
            'features must be matrices'
        assert len(self.ids) == len(self.visual) == len(self.textual), \
            'ids and feature rows must align'

        self._rows = {int(pin): row for row, pin in enumerate(self.ids)}

        if len(self._rows) != len(self.ids):
            raise DataError('duplicate pin ids in feature store')

    def __len__(self):
        return len(self.ids)

    def __contains__(self, pin):
        return int(pin) in self._rows

    @property
    def d_v(self):
        return self.visual.shape[1]

    @property
    def d_t(self):
        return self.textual.shape[1]

    def position(self, pin):
        try:
            return self._rows[int(pin)]
        except KeyError:
            raise DataError('unknown pin `%s`' % pin)

    def positions(self, pins):
        return np.array([self.position(pin) for pin in pins],
                        dtype=np.int64)

    def lookup(self, pins):
        rows = self.positions(pins)

        return self.visual[rows], self.textual[rows]

    def subset(self, pins):
        rows = self.positions(pins)

        return FeatureStore(self.ids[rows], self.visual[rows],
                            self.textual[rows])


def save_features(store, path):
    ensure_parent(path)

    records = np.zeros(len(store), dtype=np.dtype([
        ('id', '<u8'),
        ('values', '<f4', (store.d_v + store.d_t,))
    ]))
    records['id'] = store.ids
    records['values'] = np.hstack([store.visual, store.textual])

    with open(path, 'wb') as file:
        file.write(HEADER.pack(MAGIC, len(store), store.d_v, store.d_t))
        file.write(records.tobytes())

    return path


def load_features(path):
    try:
        with open(path, 'rb') as file:
            data = file.read()
    except IOError as e:
        raise DataError('cannot read features `%s`: %s' % (path, e))

    if len(data) < HEADER.size:
        raise DataError('truncated feature file `%s`' % path)

    magic, count, d_v, d_t = HEADER.unpack_from(data)

    if magic != MAGIC:
        raise DataError('not a feature file `%s`' % path)

    dtype = np.dtype([('id', '<u8'), ('values', '<f4', (d_v + d_t,))])

    if len(data) != HEADER.size + count * dtype.itemsize:
        raise DataError('truncated feature file `%s`' % path)

    records = np.frombuffer(data, dtype=dtype, count=count,
                            offset=HEADER.size)
    values = records['values'].astype(np.float64).reshape(count, d_v + d_t)

    return FeatureStore(records['id'].copy(), values[:, :d_v],
                        values[:, d_v:])
