# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Mini-batch training of a pin tower.

Every step assembles a batch, counts its positives and negatives into the
frequency sketches, evaluates the combined loss and applies one Adam update at
the scheduled learning rate. Batches only depend on `(seed, step)`: pairs are
shuffled once per epoch with a stream keyed by the epoch, negatives come from a
stream keyed by the step. Resuming from a checkpoint therefore only needs the
step counter.
'''

import math
import struct

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fs import ensure_parent
from .loss import Batch, Sketches, combined_loss, update_sketches
from .model import build_contexts, init_params
from .numerics import parameter, zero_grad
from .sketch import DEFAULT_DEPTH, DEFAULT_WIDTH, CountMinSketch
from .utils import DataError, from_dict, silent, stream

MAGIC = b'BSCK'
VERSION = 1

# Stream keys, so that shuffles, negatives and dropout never share draws.
SHUFFLE, NEGATIVES, DROPOUT = 1, 2, 3


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 0.002
    batch_size: int = 128
    steps: int = 2000
    warmup_steps: Optional[int] = None
    floor_lr: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    eval_every: int = 0
    clip_norm: float = 10.0
    eval_pool_size: int = 1000
    eval_pairs_limit: int = 500
    sketch_width: int = DEFAULT_WIDTH
    sketch_depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.warmup_steps is None:
            object.__setattr__(self, 'warmup_steps',
                               max(1, self.steps // 20)
                               if self.steps > 1 else 0)

        assert self.steps >= 0, 'steps must be non-negative'
        assert self.batch_size >= 1, 'batch_size must be at least 1'
        assert self.warmup_steps >= 0, 'warmup_steps must be non-negative'
        assert self.steps == 0 or self.warmup_steps < self.steps, \
            'warmup_steps must be lower than steps'
        assert self.peak_lr > self.floor_lr >= 0, \
            'expected peak_lr > floor_lr >= 0'
        assert 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, \
            'Adam betas must be within [0, 1)'
        assert self.eps > 0, 'eps must be positive'
        assert self.eval_every >= 0, 'eval_every must be non-negative'
        assert self.clip_norm >= 0, 'clip_norm must be non-negative'

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, 'train')


@dataclass
class TrainState:
    params: OrderedDict
    moments: dict = field(default_factory=dict)
    velocities: dict = field(default_factory=dict)
    step: int = 0
    sketches: Sketches = None
    seed: int = 0

    def __post_init__(self):
        for name, tensor in self.params.items():
            self.moments.setdefault(name, np.zeros_like(tensor.data))
            self.velocities.setdefault(name, np.zeros_like(tensor.data))

            if self.moments[name].shape != tensor.data.shape \
                    or self.velocities[name].shape != tensor.data.shape:
                raise DataError('moment shape mismatch for `%s`' % name)


def new_state(model_cfg, train_cfg):
    sketches = Sketches(
        CountMinSketch(train_cfg.sketch_width, train_cfg.sketch_depth,
                       seed=train_cfg.seed),
        CountMinSketch(train_cfg.sketch_width, train_cfg.sketch_depth,
                       seed=train_cfg.seed + 1))

    return TrainState(init_params(model_cfg, train_cfg.seed),
                      sketches=sketches, seed=train_cfg.seed)


def check_state(state, model_cfg):
    '''Raise `DataError` unless `state` holds the parameters of `model_cfg`.'''
    expected = init_params(model_cfg, 0)

    if sorted(expected) != sorted(state.params):
        raise DataError('checkpoint parameters do not match the %s model'
                        % model_cfg.variant)

    for name, tensor in expected.items():
        if state.params[name].data.shape != tensor.data.shape:
            raise DataError('checkpoint parameter `%s` has shape %s, '
                            'expected %s' % (name,
                                             state.params[name].data.shape,
                                             tensor.data.shape))


def lr_at(step, cfg):
    '''Linear warmup to `peak_lr`, then cosine annealing to `floor_lr`.'''
    assert 0 <= step <= cfg.steps, 'step %d out of range' % step

    if step < cfg.warmup_steps:
        return cfg.peak_lr * (step + 1) / cfg.warmup_steps

    span = max(1, cfg.steps - cfg.warmup_steps)
    progress = (step - cfg.warmup_steps) / span

    return cfg.floor_lr + 0.5 * (cfg.peak_lr - cfg.floor_lr) \
        * (1.0 + math.cos(math.pi * progress))


def adam_step(state, grads, lr, cfg):
    '''One bias-corrected Adam update of `state.params` from `grads`.'''
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise DataError('non-finite gradient in `%s` at step %d'
                            % (name, state.step))

    t = state.step + 1

    for name, grad in grads.items():
        tensor = state.params[name]

        m = state.moments[name] = \
            cfg.beta1 * state.moments[name] + (1 - cfg.beta1) * grad
        v = state.velocities[name] = \
            cfg.beta2 * state.velocities[name] + (1 - cfg.beta2) * grad ** 2

        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)

        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

    state.step = t

    return state


def clip_gradients(grads, max_norm):
    '''Scale `grads` so that their global norm is at most `max_norm`.'''
    norm = math.sqrt(sum(float(np.sum(grad ** 2))
                         for grad in grads.values()))

    if max_norm and norm > max_norm:
        factor = max_norm / norm

        return OrderedDict((name, grad * factor)
                           for name, grad in grads.items()), norm

    return grads, norm


def batch_indices(count, batch_size, seed, step):
    '''Positions into the pair list used at `step`.'''
    permutations = {}
    indices = np.empty(batch_size, dtype=np.int64)

    for i, position in enumerate(range(step * batch_size,
                                       (step + 1) * batch_size)):
        epoch, offset = divmod(position, count)

        if epoch not in permutations:
            permutations[epoch] = \
                stream(seed, SHUFFLE, epoch).permutation(count)

        indices[i] = permutations[epoch][offset]

    return indices


def make_batch(pairs, catalog, feats, tables, graph_ids, model_cfg,
               train_cfg, step):
    chosen = pairs[batch_indices(len(pairs), train_cfg.batch_size,
                                 train_cfg.seed, step)]
    negatives = catalog[stream(train_cfg.seed, NEGATIVES, step)
                        .integers(0, len(catalog),
                                  size=train_cfg.batch_size)]

    def contexts(pins):
        return build_contexts(pins, feats, tables, graph_ids, model_cfg.n)

    return Batch(contexts(chosen[:, 0]), contexts(chosen[:, 1]),
                 contexts(negatives))


def check_pairs(pairs, feats):
    if not len(pairs):
        raise DataError('empty dataset')

    for query, engaged in pairs:
        if query not in feats or engaged not in feats:
            raise DataError('unknown pin in pair (%s, %s)'
                            % (query, engaged))

    return np.asarray(pairs, dtype=np.uint64).reshape(-1, 2)


def fit(pairs, tables, feats, model_cfg, train_cfg, graph_ids, state=None,
        evaluate=None, stop=None, log=silent):
    '''Train until `train_cfg.steps` (or `stop`), starting from `state` if
    given.

    `evaluate(params)` (optional) is called every `eval_every` steps and after
    the last one; it returns a recall. Returns `(state, metrics, recalls)`:
    `(step, lr, loss_in_batch, loss_mixed, loss_total)` rows and
    `(step, recall)` rows for the steps run by this call.
    '''
    pairs = check_pairs(pairs, feats)
    catalog = np.asarray(feats.ids, dtype=np.uint64)

    assert len(graph_ids) == model_cfg.k, \
        'model expects %d graphs, got %d' % (model_cfg.k, len(graph_ids))

    if state is None:
        state = new_state(model_cfg, train_cfg)
    else:
        check_state(state, model_cfg)

    metrics = []
    recalls = []

    stop = train_cfg.steps if stop is None else min(stop, train_cfg.steps)

    while state.step < stop:
        step = state.step
        lr = lr_at(step, train_cfg)

        batch = make_batch(pairs, catalog, feats, tables, graph_ids,
                           model_cfg, train_cfg, step)
        update_sketches(batch, state.sketches)

        rng = stream(train_cfg.seed, DROPOUT, step) \
            if model_cfg.dropout > 0 else None

        zero_grad(state.params)
        loss, parts = combined_loss(batch, state.params, model_cfg,
                                    state.sketches, rng=rng)
        loss.backward()

        grads = OrderedDict(
            (name, tensor.grad if tensor.grad is not None
             else np.zeros_like(tensor.data))
            for name, tensor in state.params.items())
        grads, norm = clip_gradients(grads, train_cfg.clip_norm)

        adam_step(state, grads, lr, train_cfg)

        for name, tensor in state.params.items():
            if not np.all(np.isfinite(tensor.data)):
                raise DataError('non-finite parameter `%s` at step %d'
                                % (name, step))

        total = float(loss.data)
        metrics.append((step, lr, parts['in_batch'], parts['mixed'], total))
        log('step %d lr %.6g loss %.6f (%.6f + %.6f) grad norm %.4g'
            % (step, lr, total, parts['in_batch'], parts['mixed'], norm))

        if evaluate and (state.step == train_cfg.steps or (
                train_cfg.eval_every
                and state.step % train_cfg.eval_every == 0)):
            recall = evaluate(state.params)
            recalls.append((state.step, recall))
            log('step %d recall %.4f' % (state.step, recall))

    return state, metrics, recalls


# Checkpoints: `BSCK`, u32 entry count, then entries sorted by name, each a
# u16 name length, the utf-8 name, u32 rank, rank u32 dims and float32
# values, all little endian. Integers are split in two 24-bit halves
# (`.lo`, `.hi`) so they survive float32 exactly.

HALF = 1 << 24


def _split(name, values):
    values = np.asarray(values, dtype=np.int64)

    assert np.all(values >= 0) and np.all(values < HALF * HALF), \
        'integer out of checkpoint range in `%s`' % name

    return {name + '.lo': values % HALF, name + '.hi': values // HALF}


def _join(entries, name):
    try:
        lo, hi = entries[name + '.lo'], entries[name + '.hi']
    except KeyError:
        raise DataError('checkpoint is missing `%s`' % name)

    return hi.astype(np.int64) * HALF + lo.astype(np.int64)


def state_entries(state):
    entries = {'version': np.array([VERSION])}

    for name, tensor in state.params.items():
        entries['param.' + name] = tensor.data
        entries['adam.m.' + name] = state.moments[name]
        entries['adam.v.' + name] = state.velocities[name]

    entries.update(_split('step', [state.step]))
    entries.update(_split('seed', [state.seed]))

    for stream_name, sketch in zip(Sketches._fields, state.sketches):
        for name, values in sketch.to_arrays().items():
            entries.update(_split('sketch.%s.%s' % (stream_name, name),
                                  values))

    return entries


def save_checkpoint(state, path):
    entries = state_entries(state)
    chunks = [MAGIC, struct.pack('<I', len(entries))]

    for name in sorted(entries):
        values = np.asarray(entries[name], dtype='<f4')
        encoded = name.encode('utf-8')

        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<I', values.ndim))
        chunks.append(struct.pack('<%dI' % values.ndim, *values.shape))
        chunks.append(values.tobytes())

    ensure_parent(path)

    with open(path, 'wb') as file:
        file.write(b''.join(chunks))

    return path


def read_entries(path):
    try:
        with open(path, 'rb') as file:
            data = file.read()
    except IOError as e:
        raise DataError('cannot read checkpoint `%s`: %s' % (path, e))

    def take(fmt, offset):
        size = struct.calcsize(fmt)

        if offset + size > len(data):
            raise DataError('truncated checkpoint `%s`' % path)

        return struct.unpack_from(fmt, data, offset), offset + size

    if data[:4] != MAGIC:
        raise DataError('not a checkpoint `%s`' % path)

    (count,), offset = take('<I', 4)
    entries = {}

    for _ in range(count):
        (length,), offset = take('<H', offset)
        (name,), offset = take('<%ds' % length, offset)
        (rank,), offset = take('<I', offset)
        shape, offset = take('<%dI' % rank, offset)

        size = int(np.prod(shape, dtype=np.int64))

        if offset + 4 * size > len(data):
            raise DataError('truncated checkpoint `%s`' % path)

        values = np.frombuffer(data, dtype='<f4', count=size, offset=offset)
        offset += 4 * size

        entries[name.decode('utf-8')] = values.reshape(shape).copy()

    if offset != len(data):
        raise DataError('trailing bytes in checkpoint `%s`' % path)

    version = entries.get('version')
    if version is None or version.tolist() != [VERSION]:
        raise DataError('unsupported checkpoint version in `%s`' % path)

    return entries


def load_checkpoint(path):
    entries = read_entries(path)

    params = OrderedDict()
    moments = {}
    velocities = {}

    for name in sorted(entries):
        if not name.startswith('param.'):
            continue

        key = name[len('param.'):]

        try:
            moments[key] = entries['adam.m.' + key].astype(np.float64)
            velocities[key] = entries['adam.v.' + key].astype(np.float64)
        except KeyError:
            raise DataError('checkpoint is missing moments of `%s`' % key)

        params[key] = parameter(entries[name].astype(np.float64), name=key)

    sketches = []
    for stream_name in Sketches._fields:
        prefix = 'sketch.%s.' % stream_name
        sketches.append(CountMinSketch.from_arrays({
            name: _join(entries, prefix + name)
            for name in ('counters', 'total', 'seeds')
        }))

    return TrainState(params, moments, velocities,
                      step=int(_join(entries, 'step')[0]),
                      sketches=Sketches(*sketches),
                      seed=int(_join(entries, 'seed')[0]))
