# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Planted-cluster corpora.

Pins and the context nodes of every graph are spread uniformly over `C`
latent clusters. A pin links to a context node with probability
`inter_edge_noise + intra_edge_prob * informativeness` when both share a
cluster and `inter_edge_noise` otherwise. Features are noisy copies of a
per-cluster unit direction. Engagement pairs mostly stay within a cluster
and prefer pins that share a context node with the query, in a graph picked
in proportion to its informativeness.
'''

from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .features import FeatureStore, save_features
from .fs import save_pairs
from .graphstore import from_edges, save_edges
from .utils import DataError, from_dict, silent, stream

# Stream keys.
CLUSTERS, EDGES, FEATURES, PAIRS, SPLIT = 1, 2, 3, 4, 5

TRAIN_FRACTION = 0.9

Corpus = namedtuple('Corpus', [
    'graphs', 'features', 'train', 'test', 'pin_clusters', 'ctx_clusters'
])


@dataclass(frozen=True)
class SynthConfig:
    num_pins: int = 5000
    num_ctx: int = 500
    num_graphs: int = 3
    clusters: int = 20
    intra_edge_prob: float = 0.3
    inter_edge_noise: float = 0.002
    feature_noise: float = 1.0
    pair_count: int = 20000
    pair_noise: float = 0.1
    d_v: int = 32
    d_t: int = 16
    seed: int = 0
    graph_informativeness: List[float] = field(
        default_factory=lambda: [1.0, 0.7, 0.4])

    def __post_init__(self):
        object.__setattr__(self, 'graph_informativeness',
                           [float(value)
                            for value in self.graph_informativeness])

        assert self.num_pins >= 2, 'num_pins must be at least 2'
        assert self.num_ctx >= 1, 'num_ctx must be at least 1'
        assert self.num_graphs >= 1, 'num_graphs must be at least 1'
        assert 1 <= self.clusters <= self.num_pins, \
            'clusters must be within [1, num_pins]'
        assert self.pair_count >= 1, 'pair_count must be at least 1'
        assert self.feature_noise >= 0, 'feature_noise must be non-negative'
        assert self.d_v >= 1 and self.d_t >= 1, \
            'feature widths must be at least 1'
        assert len(self.graph_informativeness) == self.num_graphs, \
            'expected %d informativeness values, got %d' \
            % (self.num_graphs, len(self.graph_informativeness))

        for name in ('intra_edge_prob', 'inter_edge_noise', 'pair_noise'):
            value = getattr(self, name)
            assert 0.0 <= value <= 1.0, '%s must be within [0, 1]' % name

        for value in self.graph_informativeness:
            assert 0.0 <= value <= 1.0, \
                'graph_informativeness must be within [0, 1]'

        assert self.inter_edge_noise + self.intra_edge_prob <= 1.0, \
            'edge probabilities must not exceed 1'

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, 'synth')


def edge_probabilities(pin_clusters, ctx_clusters, cfg, informativeness):
    same = pin_clusters[:, None] == ctx_clusters[None, :]

    return np.where(same,
                    cfg.inter_edge_noise
                    + cfg.intra_edge_prob * informativeness,
                    cfg.inter_edge_noise)


def gen_graph(i, pin_clusters, ctx_clusters, cfg):
    rng = stream(cfg.seed, EDGES, i)
    probabilities = edge_probabilities(pin_clusters, ctx_clusters, cfg,
                                       cfg.graph_informativeness[i])

    pins, ctxs = np.nonzero(rng.random(probabilities.shape) < probabilities)

    try:
        return from_edges(zip(pins.tolist(), ctxs.tolist()), i)
    except DataError:
        raise DataError('synthetic graph %d is empty' % i)


def cluster_directions(rng, clusters, width):
    directions = rng.standard_normal((clusters, width))

    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def gen_features(pin_clusters, cfg):
    rng = stream(cfg.seed, FEATURES)
    count = len(pin_clusters)

    visual = cluster_directions(rng, cfg.clusters, cfg.d_v)[pin_clusters]
    textual = cluster_directions(rng, cfg.clusters, cfg.d_t)[pin_clusters]

    visual = visual + cfg.feature_noise * rng.standard_normal(visual.shape)
    textual = textual + cfg.feature_noise \
        * rng.standard_normal(textual.shape)

    return FeatureStore(np.arange(count, dtype=np.uint64), visual, textual)


class CoNeighbors(object):
    '''Pins sharing a context node with a given pin, per graph.'''

    def __init__(self, graphs):
        self.graphs = graphs
        self.by_ctx = [g.biadjacency.tocsc() for g in graphs]

    def of(self, i, pin):
        g = self.graphs[i]

        if not g.has_pin(pin):
            return np.zeros(0, dtype=np.uint64)

        row = g.pin_position(pin)
        ctxs = g.biadjacency.indices[g.biadjacency.indptr[row]:
                                     g.biadjacency.indptr[row + 1]]
        columns = self.by_ctx[i]

        rows = np.unique(np.concatenate(
            [columns.indices[columns.indptr[c]:columns.indptr[c + 1]]
             for c in ctxs])) if len(ctxs) else np.zeros(0, dtype=np.int64)

        return g.pin_ids[rows[rows != row]]


def gen_pairs(graphs, pin_clusters, cfg):
    '''Distinct `(query, engaged)` pairs, self-pairs excluded.'''
    rng = stream(cfg.seed, PAIRS)
    members = [np.nonzero(pin_clusters == c)[0]
               for c in range(cfg.clusters)]
    co = CoNeighbors(graphs)

    weights = np.asarray(cfg.graph_informativeness)
    weights = weights / weights.sum() if weights.sum() > 0 else None

    pairs = OrderedDict()

    for _ in range(cfg.pair_count):
        query = int(rng.integers(cfg.num_pins))
        cluster = pin_clusters[query]

        if cfg.clusters > 1 and rng.random() < cfg.pair_noise:
            others = np.nonzero(pin_clusters != cluster)[0]
            engaged = int(others[rng.integers(len(others))])
        else:
            candidates = np.zeros(0, dtype=np.uint64)

            if weights is not None:
                i = int(rng.choice(len(graphs), p=weights))
                candidates = co.of(i, query)
                candidates = candidates[pin_clusters[
                    candidates.astype(np.int64)] == cluster]

            if not len(candidates):
                candidates = members[cluster][members[cluster] != query]

            if not len(candidates):
                continue

            engaged = int(candidates[rng.integers(len(candidates))])

        if engaged != query:
            pairs[(query, engaged)] = True

    return list(pairs)


def split_pairs(pairs, seed):
    order = stream(seed, SPLIT).permutation(len(pairs))
    cut = int(round(TRAIN_FRACTION * len(pairs)))

    train = [pairs[i] for i in order[:cut]]
    test = [pairs[i] for i in order[cut:]]

    return train, test


def gen_corpus(cfg, log=silent):
    rng = stream(cfg.seed, CLUSTERS)

    pin_clusters = rng.integers(cfg.clusters, size=cfg.num_pins)
    ctx_clusters = [rng.integers(cfg.clusters, size=cfg.num_ctx)
                    for _ in range(cfg.num_graphs)]

    graphs = []
    for i in range(cfg.num_graphs):
        g = gen_graph(i, pin_clusters, ctx_clusters[i], cfg)
        log('graph %d: %d pins, %d context nodes, %d edges'
            % (i, g.num_pins, g.num_ctx, g.edge_count))
        graphs.append(g)

    features = gen_features(pin_clusters, cfg)
    train, test = split_pairs(gen_pairs(graphs, pin_clusters, cfg),
                              cfg.seed)

    if not train or not test:
        raise DataError('synthetic corpus has too few pairs to split')

    log('%d train pairs, %d test pairs' % (len(train), len(test)))

    return Corpus(graphs, features, train, test, pin_clusters, ctx_clusters)


def corpus_paths(out_dir, num_graphs):
    paths = OrderedDict(
        ('graph_%d' % i, '%s/graphs/graph_%d.tsv' % (out_dir, i))
        for i in range(num_graphs))
    paths['features'] = out_dir + '/features.bsft'
    paths['train_pairs'] = out_dir + '/pairs/train.tsv'
    paths['test_pairs'] = out_dir + '/pairs/test.tsv'

    return paths


def write_corpus(corpus, out_dir):
    '''Write the corpus under `out_dir`; returns `{artifact: path}`.'''
    paths = corpus_paths(out_dir, len(corpus.graphs))

    for i, g in enumerate(corpus.graphs):
        save_edges(g, paths['graph_%d' % i])

    save_features(corpus.features, paths['features'])
    save_pairs(paths['train_pairs'], corpus.train)
    save_pairs(paths['test_pairs'], corpus.test)

    return paths
