# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

from collections import OrderedDict

import numpy as np
import pytest

from conftest import random_features, random_graph, toy_config

from multibisage.model import init_params
from multibisage.numerics import parameter
from multibisage.synthgen import SynthConfig, gen_corpus
from multibisage.trainer import (
    TrainConfig, TrainState, adam_step, batch_indices, clip_gradients, fit,
    load_checkpoint, lr_at, save_checkpoint
)
from multibisage.utils import DataError
from multibisage.walker import WalkConfig, run_walks

PINS = 40


@pytest.fixture
def corpus():
    rng = np.random.default_rng(21)
    feats = random_features(list(range(PINS)))

    tables = None
    for graph_id in (0, 1):
        g = random_graph(rng, PINS, 12, 150, graph_id=graph_id)
        table = run_walks(g, g.pin_ids, WalkConfig(nw=200, top_k=4, seed=3))
        tables = table if tables is None else tables.merge(table)

    pairs = set()
    while len(pairs) < 60:
        query, engaged = (int(value) for value in rng.integers(PINS, size=2))
        if query != engaged:
            pairs.add((query, engaged))

    return sorted(pairs), tables, feats


def small_train(**overrides):
    options = dict(peak_lr=0.01, batch_size=8, steps=6, seed=5)
    options.update(overrides)

    return TrainConfig(**options)


def run(corpus, model_cfg, train_cfg, **kwargs):
    pairs, tables, feats = corpus

    return fit(pairs, tables, feats, model_cfg, train_cfg, [0, 1], **kwargs)


def test_schedule_examples():
    cfg = TrainConfig(peak_lr=0.002, steps=2000, warmup_steps=100,
                      floor_lr=0.0001)

    assert lr_at(0, cfg) == pytest.approx(0.002 / 100)
    assert lr_at(100, cfg) == pytest.approx(0.002)
    assert lr_at(2000, cfg) == pytest.approx(0.0001)
    assert lr_at(1050, cfg) == pytest.approx((0.002 + 0.0001) / 2)


def test_schedule_is_continuous():
    cfg = TrainConfig(steps=2000, warmup_steps=100)

    assert lr_at(99, cfg) == pytest.approx(lr_at(100, cfg))

    values = [lr_at(step, cfg) for step in range(100, 2001)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_schedule_without_decay_steps():
    assert lr_at(0, TrainConfig(steps=0)) == pytest.approx(0.002)
    assert lr_at(1, TrainConfig(steps=1)) == pytest.approx(0.0)


def test_default_warmup():
    assert TrainConfig(steps=2000).warmup_steps == 100
    assert TrainConfig(steps=10).warmup_steps == 1
    assert TrainConfig(steps=1).warmup_steps == 0


def test_config_validation():
    with pytest.raises(AssertionError):
        TrainConfig(steps=10, warmup_steps=10)

    with pytest.raises(AssertionError):
        TrainConfig(peak_lr=0.001, floor_lr=0.01)

    with pytest.raises(AssertionError, match='unknown train option'):
        TrainConfig.from_dict({'learning_rate': 1})


def test_config_reads_numeric_strings():
    cfg = TrainConfig.from_dict({'eps': '1e-08', 'steps': '20'})

    assert cfg.eps == 1e-8
    assert cfg.steps == 20

    with pytest.raises(AssertionError, match='invalid train option'):
        TrainConfig.from_dict({'peak_lr': 'fast'})


def scalar_state(value):
    return TrainState(OrderedDict(w=parameter(np.array(value, dtype=float))))


def test_adam_zero_gradient():
    state = scalar_state([1.0, -2.0])
    adam_step(state, {'w': np.zeros(2)}, 0.1, TrainConfig())

    assert state.params['w'].data.tolist() == [1.0, -2.0]
    assert state.step == 1


def test_adam_first_step():
    state = scalar_state([1.0])
    adam_step(state, {'w': np.array([1.0])}, 0.1, TrainConfig())

    assert state.params['w'].data[0] == pytest.approx(0.9, abs=1e-6)


def test_adam_converges_on_quadratic():
    state = scalar_state([5.0, -5.0])
    cfg = TrainConfig()

    for _ in range(100):
        w = state.params['w'].data
        adam_step(state, {'w': 2.0 * w}, 0.25, cfg)

    assert np.linalg.norm(state.params['w'].data) < 0.5


def test_adam_rejects_non_finite():
    state = scalar_state([1.0])

    with pytest.raises(DataError, match='non-finite gradient'):
        adam_step(state, {'w': np.array([np.nan])}, 0.1, TrainConfig())

    assert state.params['w'].data.tolist() == [1.0]


def test_clip_gradients():
    grads = OrderedDict(a=np.array([3.0]), b=np.array([4.0]))

    clipped, norm = clip_gradients(grads, 1.0)

    assert norm == 5.0
    assert clipped['a'][0] == pytest.approx(0.6)
    assert clip_gradients(grads, 10.0)[0] is grads


def test_batches_cover_each_epoch():
    indices = np.concatenate([batch_indices(10, 5, 1, step)
                              for step in range(2)])

    assert sorted(indices.tolist()) == list(range(10))
    assert np.array_equal(batch_indices(10, 5, 1, 3),
                          batch_indices(10, 5, 1, 3))


def test_zero_steps_keep_initial_params(corpus):
    model_cfg = toy_config(n=4)
    state, metrics, _ = run(corpus, model_cfg, small_train(steps=0))

    reference = init_params(model_cfg, 5)

    assert metrics == []
    assert all(np.array_equal(state.params[name].data,
                              reference[name].data) for name in reference)


def test_fit_is_deterministic(corpus):
    model_cfg = toy_config(n=4, dropout=0.1)

    _, first, _ = run(corpus, model_cfg, small_train())
    _, second, _ = run(corpus, model_cfg, small_train())

    assert first == second
    assert [row[0] for row in first] == list(range(6))


def test_sketch_totals(corpus):
    state, _, _ = run(corpus, toy_config(n=4), small_train())

    assert state.sketches.positives.total == 6 * 8
    assert state.sketches.negatives.total == 6 * 8


def test_evaluate_schedule(corpus):
    seen = []

    def evaluate(params):
        seen.append(len(params))
        return 0.5

    _, _, recalls = run(corpus, toy_config(n=4), small_train(eval_every=4),
                        evaluate=evaluate)

    assert recalls == [(4, 0.5), (6, 0.5)]


def test_fit_rejects_bad_pairs(corpus):
    _, tables, feats = corpus

    with pytest.raises(DataError, match='empty dataset'):
        fit([], tables, feats, toy_config(), small_train(), [0, 1])

    with pytest.raises(DataError, match='unknown pin'):
        fit([(1, 999)], tables, feats, toy_config(), small_train(), [0, 1])


def test_checkpoint_resave_is_identical(corpus, tmp_path):
    state, _, _ = run(corpus, toy_config(n=4), small_train(steps=2))

    first = save_checkpoint(state, str(tmp_path / 'a.bsck'))
    second = save_checkpoint(load_checkpoint(first),
                             str(tmp_path / 'b.bsck'))

    with open(first, 'rb') as a, open(second, 'rb') as b:
        assert a.read() == b.read()


def test_checkpoint_keeps_state(corpus, tmp_path):
    state, _, _ = run(corpus, toy_config(n=4), small_train(steps=2))
    loaded = load_checkpoint(save_checkpoint(state,
                                             str(tmp_path / 'a.bsck')))

    assert loaded.step == 2
    assert loaded.seed == 5
    assert loaded.sketches == state.sketches
    assert set(loaded.params) == set(state.params)

    for name, tensor in state.params.items():
        assert np.allclose(loaded.params[name].data, tensor.data, rtol=1e-6,
                           atol=1e-7)


def test_truncated_checkpoint(corpus, tmp_path):
    state, _, _ = run(corpus, toy_config(n=4), small_train(steps=1))
    path = save_checkpoint(state, str(tmp_path / 'a.bsck'))

    with open(path, 'rb') as file:
        data = file.read()

    for size in (2, 10, len(data) // 2, len(data) - 1):
        with open(path, 'wb') as file:
            file.write(data[:size])

        with pytest.raises(DataError):
            load_checkpoint(path)


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / 'a.bsck'
    path.write_bytes(b'nope')

    with pytest.raises(DataError, match='not a checkpoint'):
        load_checkpoint(str(path))


def test_resume_matches_uninterrupted(corpus, tmp_path):
    model_cfg = toy_config(n=4)
    train_cfg = small_train(steps=6)

    _, uninterrupted, _ = run(corpus, model_cfg, train_cfg)

    state, head, _ = run(corpus, model_cfg, train_cfg, stop=3)
    path = save_checkpoint(state, str(tmp_path / 'a.bsck'))
    _, tail, _ = run(corpus, model_cfg, train_cfg,
                     state=load_checkpoint(path))

    assert head == uninterrupted[:3]
    assert [row[0] for row in tail] == [3, 4, 5]

    for resumed, reference in zip(tail, uninterrupted[3:]):
        assert resumed[4] == pytest.approx(reference[4], rel=1e-5)



def test_resume_rejects_another_model(corpus, tmp_path):
    state, _, _ = run(corpus, toy_config(n=4), small_train(), stop=1)
    path = save_checkpoint(state, str(tmp_path / 'a.bsck'))

    with pytest.raises(DataError, match='do not match'):
        run(corpus, toy_config(n=4, variant='nsum'), small_train(),
            state=load_checkpoint(path))

    with pytest.raises(DataError, match='has shape'):
        run(corpus, toy_config(n=4, d=16), small_train(),
            state=load_checkpoint(path))


def test_moments_must_match_params():
    params = OrderedDict(w=parameter(np.zeros(3)))

    with pytest.raises(DataError, match='moment shape'):
        TrainState(params, moments={'w': np.zeros(2)})

@pytest.mark.slow
def test_training_halves_the_loss():
    synth = SynthConfig(num_pins=600, num_ctx=120, num_graphs=2, clusters=30,
                        pair_count=3000, d_v=16, d_t=8, feature_noise=0.3,
                        graph_informativeness=[1.0, 0.5], seed=2)
    corpus = gen_corpus(synth)

    tables = None
    for g in corpus.graphs:
        table = run_walks(g, g.pin_ids, WalkConfig(nw=200, top_k=5, seed=1))
        tables = table if tables is None else tables.merge(table)

    model_cfg = toy_config(n=5, d_v=16, d_t=8, logit_scale=10.0)
    _, metrics, _ = fit(corpus.train, tables, corpus.features, model_cfg,
                        TrainConfig(batch_size=64, steps=400, peak_lr=0.01),
                        [0, 1])

    first = np.mean([row[4] for row in metrics[:5]])
    last = np.mean([row[4] for row in metrics[-20:]])

    assert last < 0.5 * first
