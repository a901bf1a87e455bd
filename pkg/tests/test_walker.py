# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import numpy as np
import pytest

from conftest import random_features, random_graph

from multibisage.graphstore import from_edges
from multibisage.utils import DataError
from multibisage.walker import (
    NeighborTable, WalkConfig, exact_visit_distribution, load_table,
    run_walks, save_table, walk_pin
)


def test_config_validation():
    with pytest.raises(AssertionError):
        WalkConfig(alpha=0.0)

    with pytest.raises(AssertionError):
        WalkConfig(nw=0)


def test_oracle_path(path_graph):
    assert exact_visit_distribution(path_graph, 1, 0.5) == \
        pytest.approx({2: 1.0 / 3.0}, abs=1e-12)


def test_oracle_alpha_one(path_graph, cycle_graph):
    assert exact_visit_distribution(path_graph, 1, 1.0).get(2, 0.0) == 0.0
    assert exact_visit_distribution(cycle_graph, 1, 1.0).get(2, 0.0) == 0.0


def test_oracle_cycle_symmetry(cycle_graph):
    # both two-hop paths reach p2 with the same weight as in the path graph
    expected = exact_visit_distribution(cycle_graph, 1, 0.5)
    reverse = exact_visit_distribution(cycle_graph, 2, 0.5)

    assert set(expected) == {2}
    assert expected[2] == pytest.approx(reverse[1], abs=1e-12)
    assert expected[2] == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_oracle_isolated_pin():
    g = from_edges([(1, 10)], 0, pin_ids=[1, 2])

    assert exact_visit_distribution(g, 2, 0.5) == {}


def test_empirical_mean_path(path_graph):
    cfg = WalkConfig(nw=300000, alpha=0.5, top_k=10, seed=4)
    (node, visits), = walk_pin(path_graph, 1, cfg)

    assert node == 2
    assert abs(visits / cfg.nw - 1.0 / 3.0) <= 0.01


def test_isolated_pin_has_no_neighbors():
    g = from_edges([(1, 10)], 0, pin_ids=[1, 2])

    assert walk_pin(g, 2, WalkConfig(nw=10)) == []


def test_unknown_start():
    g = from_edges([(1, 10)], 0)

    with pytest.raises(DataError):
        run_walks(g, [3], WalkConfig(nw=10))


def test_outputs_are_pins_sorted(rng):
    g = random_graph(rng, 30, 10, 90)
    pins = set(g.pin_ids.tolist())
    cfg = WalkConfig(nw=500, alpha=0.3, top_k=5, seed=1)

    table = run_walks(g, g.pin_ids, cfg)

    for (pin, graph_id), neighbors in table.entries.items():
        assert len(neighbors) <= 5
        assert pin not in [node for node, _ in neighbors]

        for node, visits in neighbors:
            assert node in pins
            assert visits > 0

        keys = [(-visits, node) for node, visits in neighbors]
        assert keys == sorted(keys)


def test_top_k_is_stable(rng):
    g = random_graph(rng, 30, 10, 90)
    small = run_walks(g, g.pin_ids, WalkConfig(nw=300, top_k=3, seed=2))
    large = run_walks(g, g.pin_ids, WalkConfig(nw=300, top_k=8, seed=2))

    for key, neighbors in small.entries.items():
        assert large.entries[key][:len(neighbors)] == neighbors


def test_thread_count_does_not_matter(rng):
    g = random_graph(rng, 40, 15, 150)
    cfg = WalkConfig(nw=400, alpha=0.5, top_k=10, seed=7)

    assert run_walks(g, g.pin_ids, cfg, threads=1) == \
        run_walks(g, g.pin_ids, cfg, threads=8)


def test_streams_depend_on_graph_id(rng):
    edges = list(random_graph(rng, 30, 10, 90).edges())
    first = from_edges(edges, 0)
    second = from_edges(edges, 1)
    cfg = WalkConfig(nw=200, alpha=0.5, top_k=10, seed=7)

    pin = int(first.pin_ids[0])

    assert walk_pin(first, pin, cfg) == walk_pin(first, pin, cfg)
    assert walk_pin(first, pin, cfg) != walk_pin(second, pin, cfg)


def total_variation(graph, pin, alpha, nw, seed):
    '''Distance between visits per segment and their expectation.'''
    cfg = WalkConfig(nw=nw, alpha=alpha, top_k=graph.num_pins, seed=seed)
    empirical = dict(walk_pin(graph, pin, cfg))
    exact = exact_visit_distribution(graph, pin, alpha)

    nodes = set(empirical) | set(exact)

    return 0.5 * sum(abs(empirical.get(node, 0) / nw - exact.get(node, 0.0))
                     for node in nodes)


@pytest.mark.slow
def test_empirical_matches_oracle():
    rng = np.random.default_rng(99)

    for trial in range(5):
        g = random_graph(rng, 40, 30, 120, graph_id=trial)

        for alpha in (0.5, 0.9):
            pin = int(g.pin_ids[int(np.argmax(g.degrees()[:g.num_pins]))])

            assert total_variation(g, pin, alpha, 200000, trial) <= 0.01


def test_table_round_trip(tmp_path, rng):
    g = random_graph(rng, 20, 8, 60, graph_id=2)
    table = run_walks(g, g.pin_ids, WalkConfig(nw=100, seed=1))

    assert load_table(save_table(table, str(tmp_path / 'n.tsv'))) == table


def test_table_rank_sequence(tmp_path):
    path = tmp_path / 'n.tsv'
    path.write_text('1\t0\t2\t5\t3\n')

    with pytest.raises(DataError, match='out of sequence'):
        load_table(str(path))


def test_table_helpers():
    table = NeighborTable({
        (1, 0): [(2, 5), (3, 1)],
        (1, 1): [(3, 4)],
        (2, 0): [(1, 2)]
    })

    assert table.graph_ids() == [0, 1]
    assert table.pins() == [1, 2]
    assert table.pins(1) == [1]
    assert table.neighbor_ids(1, 0) == [2, 3]
    assert table.get(9, 0) == []
    assert table.restrict([1]).graph_ids() == [1]

    merged = NeighborTable({(1, 0): [(2, 5)]}).merge(
        NeighborTable({(1, 1): [(3, 4)]}))
    assert merged.graph_ids() == [0, 1]


def test_index_matrix():
    feats = random_features([1, 2, 3])
    table = NeighborTable({(1, 0): [(3, 5), (2, 1)], (2, 0): [(1, 2)]})

    matrix = table.index_matrix(feats, 0, 3, [1, 2, 3])

    assert matrix.tolist() == [[2, 1, -1], [0, -1, -1], [-1, -1, -1]]
