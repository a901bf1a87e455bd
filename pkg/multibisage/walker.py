# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Restart random walks over a bipartite graph.

For each start pin, `nw` walk segments are run. A segment starts at the pin
and repeats: hop to a uniformly chosen neighbor, count the node if it is a
pin other than the start, then stop with probability `alpha`. The most
visited pins become the start pin's neighborhood.
'''

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from scipy import sparse

from .fs import read_tsv, parse_uint64, write_tsv
from .utils import DataError, from_dict, stream


@dataclass(frozen=True)
class WalkConfig:
    nw: int = 2000
    alpha: float = 0.5
    top_k: int = 10
    seed: int = 0

    def __post_init__(self):
        assert self.nw >= 1, 'nw must be at least 1'
        assert 0.0 < self.alpha <= 1.0, 'alpha must be within (0, 1]'
        assert self.top_k >= 1, 'top_k must be at least 1'

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, 'walk')


class NeighborTable(object):
    '''Top visited neighbors per `(pin, graph_id)`.

    Each entry is a list of `(neighbor_id, visits)` sorted by visits
    descending, then id ascending.
    '''

    def __init__(self, entries=None):
        self.entries = OrderedDict()

        for (pin, graph_id), neighbors in (entries or {}).items():
            self.set(pin, graph_id, neighbors)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        # empty neighborhoods are not stored on disk
        return isinstance(other, NeighborTable) \
            and self.filled() == other.filled()

    def filled(self):
        return [(key, neighbors) for key, neighbors in self.entries.items()
                if neighbors]

    def set(self, pin, graph_id, neighbors):
        self.entries[(int(pin), int(graph_id))] = [
            (int(node), int(visits)) for node, visits in neighbors
        ]

    def get(self, pin, graph_id):
        return self.entries.get((int(pin), int(graph_id)), [])

    def neighbor_ids(self, pin, graph_id):
        return [node for node, visits in self.get(pin, graph_id)]

    def graph_ids(self):
        return sorted({graph_id for pin, graph_id in self.entries})

    def pins(self, graph_id=None):
        seen = OrderedDict()

        for pin, other in self.entries:
            if graph_id is None or other == graph_id:
                seen[pin] = True

        return list(seen)

    def merge(self, other):
        merged = NeighborTable()
        merged.entries.update(self.entries)
        merged.entries.update(other.entries)

        return merged

    def restrict(self, graph_ids):
        graph_ids = set(graph_ids)
        restricted = NeighborTable()

        for key, neighbors in self.entries.items():
            if key[1] in graph_ids:
                restricted.entries[key] = neighbors

        return restricted

    def index_matrix(self, feats, graph_id, n, pins):
        '''Feature-store rows of the first `n` neighbors of each pin; -1
        pads short neighborhoods.'''
        matrix = np.full((len(pins), n), -1, dtype=np.int64)

        for row, pin in enumerate(pins):
            neighbors = self.neighbor_ids(pin, graph_id)[:n]

            if neighbors:
                matrix[row, :len(neighbors)] = feats.positions(neighbors)

        return matrix


def walk_pin(g, pin, cfg):
    '''Run `cfg.nw` segments from `pin`; returns `(neighbor_id, visits)`.'''
    start = g.pin_position(pin)

    if g.degree(start) == 0:
        return []

    rng = stream(cfg.seed, pin, g.graph_id)

    degrees = g.degrees()
    indptr = g.indptr
    indices = g.indices
    num_pins = g.num_pins

    current = np.full(cfg.nw, start, dtype=np.int64)
    visited = []

    while current.size:
        offsets = (rng.random(current.size) * degrees[current]) \
            .astype(np.int64)
        current = indices[indptr[current] + offsets]

        counted = (current < num_pins) & (current != start)
        visited.append(current[counted])

        current = current[rng.random(current.size) >= cfg.alpha]

    nodes, visits = np.unique(np.concatenate(visited), return_counts=True)

    ids = g.pin_ids[nodes]
    order = np.lexsort((ids, -visits))[:cfg.top_k]

    return [(int(ids[i]), int(visits[i])) for i in order]


def run_walks(g, starts, cfg, threads=1):
    '''Walk from every pin in `starts`; the result does not depend on
    `threads`.'''
    starts = [int(pin) for pin in starts]

    for pin in starts:
        g.pin_position(pin)

    def walk(pin):
        return walk_pin(g, pin, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(walk, starts))
    else:
        results = [walk(pin) for pin in starts]

    table = NeighborTable()
    for pin, neighbors in zip(starts, results):
        table.set(pin, g.graph_id, neighbors)

    return table


def transition_matrix(g):
    '''Uniform one-hop transition operator over all nodes (pins first).'''
    adjacency = sparse.bmat([
        [None, g.biadjacency],
        [g.biadjacency.T, None]
    ], format='csr').astype(np.float64)

    degrees = np.asarray(adjacency.sum(axis=1)).ravel()
    inverse = np.divide(1.0, degrees, out=np.zeros_like(degrees),
                        where=degrees > 0)

    return sparse.diags(inverse) @ adjacency


def exact_visit_distribution(g, p, alpha, tol=1e-12):
    '''Expected visits per segment of every pin (other than `p`), summing
    the walk series until the remaining tail mass is below `tol`.'''
    assert tol > 0, 'tol must be positive'
    assert 0.0 < alpha <= 1.0, 'alpha must be within (0, 1]'

    start = g.pin_position(p)

    if g.degree(start) == 0:
        return {}

    operator = transition_matrix(g).T.tocsr()

    state = np.zeros(g.num_nodes)
    state[start] = 1.0
    expected = np.zeros(g.num_nodes)

    survival = 1.0
    while True:
        state = operator @ state
        expected += survival * state

        survival *= 1.0 - alpha

        if survival / alpha < tol:
            break

    result = {}
    for node in range(g.num_pins):
        if node != start and expected[node] > 0.0:
            result[int(g.pin_ids[node])] = float(expected[node])

    return result


def save_table(table, path):
    rows = []

    for (pin, graph_id), neighbors in table.entries.items():
        for rank, (node, visits) in enumerate(neighbors, 1):
            rows.append((pin, graph_id, rank, node, visits))

    return write_tsv(path, rows)


def load_table(path):
    table = NeighborTable()

    for line_number, fields in read_tsv(path, 5):
        pin = parse_uint64(fields[0], path, line_number)
        graph_id = parse_uint64(fields[1], path, line_number)
        rank = parse_uint64(fields[2], path, line_number)
        node = parse_uint64(fields[3], path, line_number)
        visits = parse_uint64(fields[4], path, line_number)

        neighbors = table.entries.setdefault((pin, graph_id), [])

        if rank != len(neighbors) + 1:
            raise DataError('%s:%d: rank %d out of sequence'
                            % (path, line_number, rank))

        neighbors.append((node, visits))

    return table
