# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Bipartite graphs between pins and context nodes (boards, users, queries).

Graphs are immutable. Node ids are unsigned 64-bit integers and the two sides
have separate id spaces; internally pins are numbered `0..P-1` and context
nodes `P..P+C-1` in order of first appearance, and a single CSR structure
(`indptr`, `indices`) holds the adjacency of both sides with each neighbor
list sorted by node id.
'''

import math

from dataclasses import dataclass

import numpy as np

from scipy import sparse

from .fs import read_tsv, parse_uint64, write_tsv
from .utils import DataError, from_dict, stream

FORMULAS = ('min_degree', 'degree')


@dataclass(frozen=True)
class PruneConfig:
    min_degree: int = 10
    max_degree: int = 10000
    prune_factor: float = 0.86
    seed: int = 0
    formula: str = 'min_degree'

    def __post_init__(self):
        assert self.min_degree >= 1, 'min_degree must be at least 1'
        assert self.max_degree >= self.min_degree, \
            'max_degree must be greater than or equal to min_degree'
        assert 0.0 <= self.prune_factor <= 1.0, \
            'prune_factor must be within [0, 1]'
        assert self.formula in FORMULAS, \
            'unknown prune formula `%s`' % self.formula

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, 'prune')

    def target(self, degree):
        '''Degree a node is cut down to when it exceeds `min_degree`.'''
        if self.formula == 'degree':
            value = degree * self.prune_factor
        else:
            value = self.min_degree * self.prune_factor

        # round() absorbs representation error, e.g. 100 * 0.29
        return int(math.floor(round(min(value, self.max_degree), 9)))


class BipartiteGraph(object):
    def __init__(self, graph_id, pin_ids, ctx_ids, pin_index, ctx_index):
        '''Build from parallel arrays of internal pin and context indices.

        Duplicate edges are collapsed.
        '''
        self.graph_id = int(graph_id)
        self.pin_ids = _frozen(np.asarray(pin_ids, dtype=np.uint64))
        self.ctx_ids = _frozen(np.asarray(ctx_ids, dtype=np.uint64))

        num_pins = len(self.pin_ids)
        num_ctx = len(self.ctx_ids)

        biadjacency = sparse.coo_matrix(
            (np.ones(len(pin_index), dtype=np.int64),
             (np.asarray(pin_index, dtype=np.int64),
              np.asarray(ctx_index, dtype=np.int64))),
            shape=(num_pins, num_ctx)).tocsr()
        biadjacency.sum_duplicates()
        biadjacency.data[:] = 1

        self.biadjacency = biadjacency
        self.edge_count = int(biadjacency.nnz)

        self.indptr, self.indices = _unified_csr(
            biadjacency, self.pin_ids, self.ctx_ids)

        self._pins = {int(node): i for i, node in enumerate(self.pin_ids)}
        self._ctx = {int(node): i for i, node in enumerate(self.ctx_ids)}

    @property
    def num_pins(self):
        return len(self.pin_ids)

    @property
    def num_ctx(self):
        return len(self.ctx_ids)

    @property
    def num_nodes(self):
        return self.num_pins + self.num_ctx

    def has_pin(self, pin):
        return int(pin) in self._pins

    def pin_position(self, pin):
        try:
            return self._pins[int(pin)]
        except KeyError:
            raise DataError('unknown pin `%s` in graph %d'
                            % (pin, self.graph_id))

    def ctx_position(self, ctx):
        try:
            return self.num_pins + self._ctx[int(ctx)]
        except KeyError:
            raise DataError('unknown context node `%s` in graph %d'
                            % (ctx, self.graph_id))

    def node_id(self, node):
        '''Return `(side, id)` for an internal node index.'''
        if node < self.num_pins:
            return 'pin', int(self.pin_ids[node])

        return 'ctx', int(self.ctx_ids[node - self.num_pins])

    def degree(self, node):
        return int(self.indptr[node + 1] - self.indptr[node])

    def neighbors(self, node):
        return self.indices[self.indptr[node]:self.indptr[node + 1]]

    def degrees(self):
        return np.diff(self.indptr)

    def pin_degree(self, pin):
        return self.degree(self.pin_position(pin))

    def ctx_degree(self, ctx):
        return self.degree(self.ctx_position(ctx))

    def pin_neighbors(self, pin):
        '''Context ids adjacent to `pin`, ascending.'''
        nodes = self.neighbors(self.pin_position(pin)) - self.num_pins

        return [int(node) for node in self.ctx_ids[nodes]]

    def ctx_neighbors(self, ctx):
        '''Pin ids adjacent to `ctx`, ascending.'''
        nodes = self.neighbors(self.ctx_position(ctx))

        return [int(node) for node in self.pin_ids[nodes]]

    def edges(self):
        '''Yield `(pin_id, ctx_id)`, pins in order of first appearance.'''
        for pin in range(self.num_pins):
            for ctx in self.neighbors(pin):
                yield (int(self.pin_ids[pin]),
                       int(self.ctx_ids[ctx - self.num_pins]))

    def edge_set(self):
        return set(self.edges())

    def stats(self):
        degrees = self.degrees()
        pins = degrees[:self.num_pins]
        ctx = degrees[self.num_pins:]

        return {
            'graph_id': self.graph_id,
            'pins': self.num_pins,
            'ctx_nodes': self.num_ctx,
            'edges': self.edge_count,
            'pin_degree_mean': float(pins.mean()) if len(pins) else 0.0,
            'pin_degree_max': int(pins.max()) if len(pins) else 0,
            'ctx_degree_mean': float(ctx.mean()) if len(ctx) else 0.0,
            'ctx_degree_max': int(ctx.max()) if len(ctx) else 0
        }


def _frozen(array):
    array.flags.writeable = False

    return array


def _unified_csr(biadjacency, pin_ids, ctx_ids):
    num_pins = biadjacency.shape[0]

    coo = biadjacency.tocoo()
    rows = np.concatenate([coo.row, coo.col + num_pins])
    cols = np.concatenate([coo.col + num_pins, coo.row])

    ids = np.concatenate([pin_ids, ctx_ids])
    order = np.lexsort((ids[cols], rows))

    counts = np.bincount(rows, minlength=len(ids))
    indptr = np.zeros(len(ids) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])

    return _frozen(indptr), _frozen(cols[order].astype(np.int64))


def from_edges(pairs, graph_id, pin_ids=None, ctx_ids=None):
    '''Build a graph from `(pin_id, ctx_id)` pairs.

    Node order is first appearance, unless `pin_ids`/`ctx_ids` fix it (nodes
    listed there are kept even without edges).
    '''
    pins = {}
    ctxs = {}

    for node in pin_ids if pin_ids is not None else ():
        pins.setdefault(int(node), len(pins))
    for node in ctx_ids if ctx_ids is not None else ():
        ctxs.setdefault(int(node), len(ctxs))

    pin_index = []
    ctx_index = []
    for pin, ctx in pairs:
        pin_index.append(pins.setdefault(int(pin), len(pins)))
        ctx_index.append(ctxs.setdefault(int(ctx), len(ctxs)))

    if not pin_index:
        raise DataError('empty graph')

    return BipartiteGraph(graph_id, list(pins), list(ctxs), pin_index,
                          ctx_index)


def load_edges(path, graph_id):
    pairs = []

    for line_number, fields in read_tsv(path, 2):
        pairs.append((parse_uint64(fields[0], path, line_number),
                      parse_uint64(fields[1], path, line_number)))

    if not pairs:
        raise DataError('empty graph `%s`' % path)

    return from_edges(pairs, graph_id)


def save_edges(g, path):
    return write_tsv(path, g.edges())


def prune_with_trace(g, cfg):
    '''Degree-based pruning; also returns `{(side, id): degree}` recorded right
    after each node that was pruned directly.

    Pins are visited first, then context nodes, each side by ascending id.
    Visiting a node whose current degree exceeds `min_degree` removes
    uniformly chosen incident edges until the degree is `cfg.target(...)`.
    '''
    num_pins = g.num_pins

    adjacency = [set(g.neighbors(node).tolist())
                 for node in range(g.num_nodes)]

    ids = np.concatenate([g.pin_ids, g.ctx_ids])
    order = np.concatenate([
        np.argsort(g.pin_ids, kind='stable'),
        num_pins + np.argsort(g.ctx_ids, kind='stable')
    ])

    rng = stream(cfg.seed, g.graph_id)
    trace = {}

    for node in order:
        node = int(node)
        degree = len(adjacency[node])

        if degree <= cfg.min_degree:
            continue

        target = cfg.target(degree)

        if degree > target:
            current = sorted(adjacency[node], key=lambda other: ids[other])
            dropped = rng.choice(degree, size=degree - target, replace=False)

            for position in dropped:
                other = current[position]

                adjacency[node].discard(other)
                adjacency[other].discard(node)

        trace[g.node_id(node)] = len(adjacency[node])

    pin_index = []
    ctx_index = []
    for pin in range(num_pins):
        for ctx in sorted(adjacency[pin]):
            pin_index.append(pin)
            ctx_index.append(ctx - num_pins)

    pruned = BipartiteGraph(g.graph_id, g.pin_ids, g.ctx_ids, pin_index,
                            ctx_index)

    return pruned, trace


def degree_prune(g, cfg):
    return prune_with_trace(g, cfg)[0]
