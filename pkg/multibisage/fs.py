# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import os
import json
import yaml

from .utils import DataError, nth

CONFIG_NAMES = ('config.json', 'config.yml')
MANIFEST = 'manifest.json'


def load_configuration(filename, version=0):
    '''Load a JSON or YAML document.

    `.json` files go through the JSON parser: YAML 1.1 reads `1e-08` as a
    string.
    '''
    with open(filename, 'rb') as file:
        data = file.read()

    try:
        if filename.endswith('.json'):
            data = json.loads(data.decode('utf-8'))
        else:
            data = nth(yaml.safe_load_all(data), version)
    except (ValueError, yaml.YAMLError) as e:
        raise AssertionError('invalid configuration `%s`: %s' % (filename, e))

    assert data is None or isinstance(data, dict), \
        'configuration `%s` must be a mapping' % filename

    return data or {}


def save_configuration(filename, data):
    with open(filename, 'w') as file:
        json.dump(data, file, indent=2, sort_keys=True)
        file.write('\n')


def find_in_path(root, *candidates):
    if os.path.isfile(root):
        root = os.path.dirname(os.path.abspath(root))

    for candidate in candidates:
        if os.path.isfile(root + '/' + candidate):
            return root, candidate

    parent = os.path.dirname(root)
    if not root or parent == root:
        return None, None

    return find_in_path(parent, *candidates)


def find_configuration(path):
    root, filename = find_in_path(path, *CONFIG_NAMES)

    if not root:
        return None

    return root + '/' + filename


def ensure_dir(path):
    if path and not os.path.isdir(path):
        os.makedirs(path)

    return path


def ensure_parent(filename):
    ensure_dir(os.path.dirname(filename))

    return filename


def read_tsv(filename, columns):
    '''Yield `(line_number, fields)` for each non-blank line.

    Lines with a different number of fields raise `DataError`.
    '''
    if not os.path.isfile(filename):
        raise DataError('file not found `%s`' % filename)

    with open(filename, encoding='utf-8') as file:
        for line_number, line in enumerate(file, 1):
            line = line.rstrip('\r\n')

            if not line.strip():
                continue

            fields = line.split('\t')

            if len(fields) != columns:
                raise DataError('%s:%d: expected %d fields, got %d'
                                % (filename, line_number, columns,
                                   len(fields)))

            yield line_number, fields


def write_tsv(filename, rows, header=None, append=False):
    ensure_parent(filename)

    append = append and os.path.isfile(filename)
    mode = 'a' if append else 'w'

    with open(filename, mode, encoding='utf-8', newline='\n') as file:
        if header and not append:
            file.write('\t'.join(header) + '\n')

        for row in rows:
            file.write('\t'.join(str(field) for field in row) + '\n')

    return filename


def parse_uint64(value, filename, line_number):
    if not value.isdigit():
        raise DataError('%s:%d: invalid id `%s`'
                        % (filename, line_number, value))

    value = int(value)

    if value >= 1 << 64:
        raise DataError('%s:%d: id out of range `%s`'
                        % (filename, line_number, value))

    return value


def load_pairs(filename):
    pairs = []

    for line_number, fields in read_tsv(filename, 2):
        pairs.append((parse_uint64(fields[0], filename, line_number),
                      parse_uint64(fields[1], filename, line_number)))

    return pairs


def save_pairs(filename, pairs):
    return write_tsv(filename, pairs)


def write_manifest(out_dir, version, config_hash, seed, artifacts):
    '''Record what an output directory holds; merges with an existing one.'''
    filename = out_dir + '/' + MANIFEST

    manifest = {}
    if os.path.isfile(filename):
        with open(filename) as file:
            manifest = json.load(file)

    manifest['version'] = version
    manifest['config_hash'] = config_hash
    manifest['seed'] = seed

    paths = manifest.setdefault('artifacts', {})
    for name, path in artifacts.items():
        paths[name] = os.path.relpath(path, out_dir)

    save_configuration(filename, manifest)

    return filename


def asset_path(filename):
    root = os.path.dirname(__file__)
    root = os.path.abspath(root + '/..')

    return root + '/assets/' + filename
