# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Recall@k against a random distractor pool.

The engaged pin of each pair is ranked among the pool by dot product with the
query embedding. Ties go against the engaged pin: its rank is one plus the
number of distractors scoring at least as high. Pins appearing in any pair,
as query or engaged pin, are never distractors.
'''

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fs import write_tsv
from .model import embed_pins
from .utils import DataError, from_dict, silent, stream

CHUNK = 256
POOL = 4


@dataclass(frozen=True)
class EvalConfig:
    k: int = 10
    pool_size: int = 10000
    seed: int = 0

    def __post_init__(self):
        assert self.k >= 1, 'k must be at least 1'
        assert self.pool_size >= self.k, 'pool_size must be at least k'

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, 'eval')


class Embeddings(object):
    '''Unit vectors of a set of pins, usable as `embed(pin)`.'''

    def __init__(self, ids, vectors):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.rows = {int(pin): row for row, pin in enumerate(ids)}

    def __call__(self, pin):
        return self.vectors[self.row(pin)]

    def row(self, pin):
        try:
            return self.rows[int(pin)]
        except KeyError:
            raise DataError('no embedding for pin `%s`' % pin)

    def matrix(self, pins):
        return self.vectors[[self.row(pin) for pin in pins]] \
            if len(pins) else np.zeros((0, self.vectors.shape[1]))


def _matrix(embed, pins):
    if isinstance(embed, Embeddings):
        return embed.matrix(pins)

    return np.array([embed(pin) for pin in pins], dtype=np.float64)


def sample_pool(catalog, size, seed, exclude=()):
    '''Up to `size` distinct pins of `catalog`, none of them in `exclude`.'''
    exclude = {int(pin) for pin in exclude}
    candidates = np.array(sorted({int(pin) for pin in catalog} - exclude),
                          dtype=np.uint64)

    size = min(size, len(candidates))
    chosen = stream(seed, POOL).choice(len(candidates), size=size,
                                       replace=False)

    return candidates[np.sort(chosen)]


def _ranks(queries, engaged, engaged_ids, pool, pool_ids):
    # Engaged scores come out of the same product as distractor scores.
    candidates = np.vstack([pool, engaged])
    scores = queries @ candidates.T

    size = len(queries)
    own = scores[np.arange(size), len(pool) + np.arange(size)]

    better = scores[:, :len(pool)] >= own[:, None]
    better &= pool_ids[None, :] != engaged_ids[:, None]

    return 1 + better.sum(axis=1)


def rank_all(pairs, embed, pool, threads=1):
    '''1-based pessimistic rank of each engaged pin.'''
    if not len(pairs):
        raise DataError('no pairs to evaluate')

    pairs = np.asarray(pairs, dtype=np.uint64).reshape(-1, 2)
    pool_ids = np.unique(np.asarray(pool, dtype=np.uint64))

    width = _matrix(embed, pairs[:1, 0]).shape[1]
    pool_matrix = _matrix(embed, pool_ids).reshape(len(pool_ids), width)

    def chunk(start):
        rows = pairs[start:start + CHUNK]

        return _ranks(_matrix(embed, rows[:, 0]), _matrix(embed, rows[:, 1]),
                      rows[:, 1], pool_matrix, pool_ids)

    starts = range(0, len(pairs), CHUNK)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_executor:
            results = list(pool_executor.map(chunk, starts))
    else:
        results = [chunk(start) for start in starts]

    return np.concatenate(results).astype(np.int64)


def rank_of(query, engaged, pool, embed):
    return int(rank_all([(query, engaged)], embed, pool)[0])


def recall_at_k(pairs, embed, pool, cfg, threads=1):
    ranks = rank_all(pairs, embed, pool, threads)

    return int(np.sum(ranks <= cfg.k)) / len(ranks)


def report(ranks, k, pool_size):
    ranks = np.asarray(ranks)

    return OrderedDict([
        ('recall@%d' % k, int(np.sum(ranks <= k)) / len(ranks)),
        ('mean_rank', float(np.mean(ranks))),
        ('median_rank', float(np.median(ranks))),
        ('pairs', len(ranks)),
        ('pool_size', pool_size)
    ])


def write_report(path, metrics):
    return write_tsv(path, metrics.items(), header=('metric', 'value'))


def dump_ranks(path, pairs, ranks, k):
    rows = [(query, engaged, rank, int(rank <= k))
            for (query, engaged), rank in zip(pairs, ranks)]

    return write_tsv(path, rows,
                     header=('query_id', 'engaged_id', 'rank', 'hit'))


def embed_catalog(pins, params, model_cfg, feats, tables, graph_ids):
    pins = sorted({int(pin) for pin in pins})

    return Embeddings(pins, embed_pins(pins, params, model_cfg, feats,
                                       tables, graph_ids))


def evaluate_model(pairs, params, model_cfg, feats, tables, graph_ids, cfg,
                   threads=1, log=silent):
    '''Embed the pool and the pairs with `params` and rank every pair.

    Returns `(metrics, ranks, pool)`.
    '''
    if not len(pairs):
        raise DataError('no pairs to evaluate')

    pool = sample_pool(feats.ids, cfg.pool_size, cfg.seed,
                       exclude=[pin for pair in pairs for pin in pair])

    if len(pool) < cfg.pool_size:
        log('pool holds %d pins, %d requested' % (len(pool), cfg.pool_size))

    needed = list(pool) + [pin for pair in pairs for pin in pair]
    embed = embed_catalog(needed, params, model_cfg, feats, tables,
                          graph_ids)

    ranks = rank_all(pairs, embed, pool, threads)

    return report(ranks, cfg.k, len(pool)), ranks, pool
