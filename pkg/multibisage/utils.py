# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import json
import hashlib

import click
import numpy as np


NUMBERS = {
    float: float,
    'float': float,
    int: int,
    'int': int,
}


class DataError(Exception):
    '''Raised when input data (files, ids, tensors) is unusable.'''


def echo(message=''):
    if type(message) in (dict, list, tuple):
        message = json.dumps(message, indent=2, sort_keys=True)

    click.echo(message)


def silent(message=''):
    pass


def stream(seed, *keys):
    '''Random generator derived from `seed` and integer `keys`.

    Streams only depend on their keys, so work split across threads draws the
    same numbers whatever the schedule.
    '''
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy += [int(key) & 0xFFFFFFFFFFFFFFFF for key in keys]

    return np.random.default_rng(np.random.SeedSequence(entropy))


def nth(generator, i):
    for current_iteration, data in enumerate(generator, 0):
        if current_iteration == i:
            return data


def parse_ids(value):
    '''Parse a comma separated list of non-negative integers.'''
    match = [part.strip() for part in value.split(',') if part.strip()]

    assert match, 'empty id list `%s`' % value

    for part in match:
        assert part.isdigit(), 'invalid id `%s`' % part

    return [int(part) for part in match]


def parse_prune(value):
    '''Parse `a,b,p` into a dict suitable for `PruneConfig.from_dict`.'''
    parts = value.split(',')

    assert len(parts) == 3, 'invalid prune values `%s`' % value

    try:
        return {
            'min_degree': int(parts[0]),
            'max_degree': int(parts[1]),
            'prune_factor': float(parts[2])
        }
    except ValueError:
        raise AssertionError('invalid prune values `%s`' % value)


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(',', ':'))


def sha256_hex(text):
    if not isinstance(text, bytes):
        text = text.encode('utf-8')

    return hashlib.sha256(text).hexdigest()


def from_dict(cls, data, section):
    '''Instantiate the dataclass `cls`, rejecting unknown keys.'''
    data = dict(data or {})
    known = cls.__dataclass_fields__

    unknown = sorted(set(data) - set(known))
    assert not unknown, 'unknown %s option(s): %s' \
        % (section, ', '.join(unknown))

    for name, value in data.items():
        kind = NUMBERS.get(known[name].type)

        # YAML 1.1 loads exponents without a dot (`1e-8`) as strings.
        if kind and isinstance(value, str):
            try:
                data[name] = kind(value)
            except ValueError:
                raise AssertionError('invalid %s option `%s`: %r'
                                     % (section, name, value))

    return cls(**data)
