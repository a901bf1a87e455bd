# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Experiment configuration.

One document holds everything an experiment needs:

    seed: 0
    threads: 4
    graphs: [0, 1, 2]
    prune_graphs: [0]
    synth: {num_pins: 5000, ...}
    prune: {min_degree: 10, max_degree: 10000, prune_factor: 0.86}
    walk: {nw: 2000, alpha: 0.5, top_k: 10}
    model: {n: 10, d_h: 32, d: 32, heads: 2, ...}
    train: {steps: 2000, batch_size: 128, ...}
    eval: {k: 10, pool_size: 5000}

It is merged on top of a preset from `assets/` and `--set section.key=value`
overrides are applied last. A section's `seed` defaults to the top-level one,
and `model.k` always follows the number of graphs.
'''

import os
import copy
import dataclasses

from dataclasses import dataclass
from typing import List

import yaml

from .evaluate import EvalConfig
from .fs import asset_path, load_configuration
from .graphstore import PruneConfig
from .model import ModelConfig
from .synthgen import SynthConfig
from .trainer import TrainConfig
from .utils import canonical_json, sha256_hex
from .walker import WalkConfig

PRESETS = ('desk', 'production')
SECTIONS = (
    ('synth', SynthConfig),
    ('prune', PruneConfig),
    ('walk', WalkConfig),
    ('model', ModelConfig),
    ('train', TrainConfig),
    ('eval', EvalConfig),
)
TOP_LEVEL = ('seed', 'threads', 'graphs', 'prune_graphs')
SEEDED = ('synth', 'prune', 'walk', 'train', 'eval')


@dataclass(frozen=True)
class Config:
    synth: SynthConfig
    prune: PruneConfig
    walk: WalkConfig
    model: ModelConfig
    train: TrainConfig
    eval: EvalConfig
    seed: int = 0
    threads: int = 1
    graphs: List[int] = dataclasses.field(default_factory=lambda: [0])
    prune_graphs: List[int] = dataclasses.field(default_factory=list)
    document: dict = dataclasses.field(default_factory=dict)

    def with_graphs(self, graphs):
        '''Same experiment restricted to `graphs`.'''
        document = copy.deepcopy(self.document)
        document['graphs'] = list(graphs)
        document.get('model', {}).pop('k', None)

        return from_document(document)

    def with_seed(self, seed):
        document = copy.deepcopy(self.document)
        reseed(document, seed)

        return from_document(document)


def reseed(document, seed):
    document['seed'] = int(seed)

    for name in SEEDED:
        document.setdefault(name, {}).pop('seed', None)


def deep_merge(base, other):
    merged = copy.deepcopy(base)

    for key, value in (other or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)

    return merged


def parse_override(value):
    '''`section.key=value` (value read as YAML) into a nested dict.'''
    assert '=' in value, 'invalid override `%s`, expected key=value' % value

    path, raw = value.split('=', 1)
    keys = [key.strip() for key in path.split('.')]

    assert all(keys), 'invalid override key `%s`' % path

    try:
        parsed = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise AssertionError('invalid override value `%s`' % raw)

    for key in reversed(keys):
        parsed = {key: parsed}

    return parsed


def load_preset(preset):
    assert preset in PRESETS, 'unknown preset `%s`' % preset

    return load_configuration(asset_path(preset + '.json'))


def from_document(document):
    '''Validate a merged document into a `Config`.'''
    unknown = sorted(set(document) - set(TOP_LEVEL)
                     - {name for name, _ in SECTIONS})
    assert not unknown, 'unknown configuration key(s): %s' \
        % ', '.join(unknown)

    seed = int(document.get('seed', 0))
    threads = int(document.get('threads') or os.cpu_count() or 1)
    graphs = [int(i) for i in document.get('graphs', [0])]
    prune_graphs = [int(i) for i in document.get('prune_graphs', [])]

    assert threads >= 1, 'threads must be at least 1'
    assert graphs, 'at least one graph is required'
    assert len(set(graphs)) == len(graphs), 'graphs must be distinct'

    sections = {}
    for name, cls in SECTIONS:
        data = document.get(name) or {}

        assert isinstance(data, dict), 'section `%s` must be a mapping' % name
        data = dict(data)

        if name in SEEDED:
            data.setdefault('seed', seed)

        if name == 'model':
            assert data.setdefault('k', len(graphs)) == len(graphs), \
                'model.k must equal the number of graphs (%d)' % len(graphs)

        sections[name] = cls.from_dict(data)

    return Config(seed=seed, threads=threads, graphs=graphs,
                  prune_graphs=prune_graphs, document=document, **sections)


def load_config(path=None, preset='desk', overrides=(), seed=None,
                threads=None):
    '''Preset, then the document at `path`, then `overrides`.

    `seed` replaces the top-level seed and every section seed.
    '''
    document = load_preset(preset)

    if path:
        document = deep_merge(document, load_configuration(path))

    for override in overrides:
        document = deep_merge(document, parse_override(override))

    if seed is not None:
        reseed(document, seed)

    if threads is not None:
        document['threads'] = int(threads)

    return from_document(document)


def resolved(cfg):
    '''Fully expanded document of `cfg` (every option spelled out).'''
    data = {
        'seed': cfg.seed,
        'threads': cfg.threads,
        'graphs': list(cfg.graphs),
        'prune_graphs': list(cfg.prune_graphs)
    }

    for name, _ in SECTIONS:
        data[name] = dataclasses.asdict(getattr(cfg, name))

    return data


def config_hash(cfg):
    '''Stable digest of the experiment; `threads` does not take part.'''
    data = resolved(cfg)
    data.pop('threads')

    return sha256_hex(canonical_json(data))
