# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import numpy as np
import pytest

from multibisage.features import FeatureStore
from multibisage.graphstore import from_edges
from multibisage.model import ModelConfig, PinContext


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long running acceptance checks')


def toy_config(**overrides):
    options = dict(k=2, n=2, d_v=6, d_t=4, d_h=8, d=8, heads=2)
    options.update(overrides)

    return ModelConfig(**options)


def toy_context(cfg, batch=3, seed=0, full=False):
    '''Random contexts; unless `full`, the last pin misses neighbors.'''
    rng = np.random.default_rng(seed)

    mask = np.ones((batch, cfg.k, cfg.n), dtype=bool)
    if not full and cfg.n:
        mask[-1, :, cfg.n - 1:] = False
        mask[-1, 0, :] = False

    nbr_visual = rng.standard_normal((batch, cfg.k, cfg.n, cfg.d_v))
    nbr_textual = rng.standard_normal((batch, cfg.k, cfg.n, cfg.d_t))

    return PinContext(
        np.arange(batch, dtype=np.uint64),
        rng.standard_normal((batch, cfg.d_v)),
        rng.standard_normal((batch, cfg.d_t)),
        nbr_visual * mask[..., None],
        nbr_textual * mask[..., None],
        mask)


def random_graph(rng, pins, ctxs, edges, graph_id=0):
    pairs = [(int(rng.integers(pins)), 1000 + int(rng.integers(ctxs)))
             for _ in range(edges)]

    return from_edges(pairs, graph_id)


def random_features(ids, d_v=6, d_t=4, seed=0):
    rng = np.random.default_rng(seed)

    return FeatureStore(np.asarray(ids, dtype=np.uint64),
                        rng.standard_normal((len(ids), d_v)),
                        rng.standard_normal((len(ids), d_t)))


@pytest.fixture
def cfg():
    return toy_config()


@pytest.fixture
def path_graph():
    '''p1 - b1 - p2'''
    return from_edges([(1, 10), (2, 10)], 0)


@pytest.fixture
def cycle_graph():
    '''p1 - b1 - p2 - b2 - p1'''
    return from_edges([(1, 10), (2, 10), (2, 11), (1, 11)], 0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
