# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import numpy as np
import pytest

from conftest import random_features

from multibisage.features import FeatureStore, load_features, save_features
from multibisage.utils import DataError


def test_lookup_and_widths():
    feats = random_features([5, 3, 9], d_v=6, d_t=4)
    visual, textual = feats.lookup([9, 5])

    assert feats.d_v == 6
    assert feats.d_t == 4
    assert len(feats) == 3
    assert 3 in feats and 4 not in feats
    assert np.array_equal(visual, feats.visual[[2, 0]])
    assert np.array_equal(textual, feats.textual[[2, 0]])


def test_unknown_pin():
    feats = random_features([1, 2])

    with pytest.raises(DataError, match='unknown pin'):
        feats.lookup([3])


def test_duplicate_ids():
    with pytest.raises(DataError, match='duplicate'):
        FeatureStore([1, 1], np.zeros((2, 2)), np.zeros((2, 1)))


def test_misaligned_rows():
    with pytest.raises(AssertionError):
        FeatureStore([1, 2], np.zeros((2, 2)), np.zeros((3, 1)))


def test_subset():
    feats = random_features([1, 2, 3])
    subset = feats.subset([3, 1])

    assert subset.ids.tolist() == [3, 1]
    assert np.array_equal(subset.visual, feats.visual[[2, 0]])


def test_file_keeps_values_at_float32(tmp_path):
    feats = random_features([7, (1 << 64) - 1, 0], d_v=5, d_t=3, seed=4)
    loaded = load_features(save_features(feats, str(tmp_path / 'f.bsft')))

    assert loaded.ids.tolist() == feats.ids.tolist()
    assert np.allclose(loaded.visual, feats.visual, atol=1e-6)
    assert np.allclose(loaded.textual, feats.textual, atol=1e-6)


def test_truncated_file(tmp_path):
    path = save_features(random_features([1, 2]), str(tmp_path / 'f.bsft'))

    with open(path, 'rb') as file:
        data = file.read()

    with open(path, 'wb') as file:
        file.write(data[:-3])

    with pytest.raises(DataError, match='truncated'):
        load_features(path)


def test_wrong_magic(tmp_path):
    path = tmp_path / 'f.bsft'
    path.write_bytes(b'NOPE' + bytes(12))

    with pytest.raises(DataError, match='not a feature file'):
        load_features(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match='cannot read'):
        load_features(str(tmp_path / 'missing.bsft'))
