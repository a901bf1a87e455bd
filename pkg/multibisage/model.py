# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Pin embedding towers.

A tower maps a pin (its visual and textual features) and its per-graph
neighborhoods to a unit-norm `d`-dimensional embedding. The default tower
(`multibisage`) encodes each graph's token sequence

    [x_g_i; FFN(v_p); FFN(t_p); FFN(neighbor visual rows); FFN(neighbor
    textual rows)]

with a graph-specific multi-head attention layer, keeps the global token's
output, and runs a second attention layer over the per-graph results. Other
wirings live in `multibisage.variants` and share the helpers below.
'''

import math

from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .numerics import (
    AttentionParams, add, as_tensor, broadcast_to, concat, dropout,
    l2_normalize, layer_norm, matmul, multihead, parameter, relu, reshape
)
from .utils import from_dict
from .variants import get_variant

VARIANTS = (
    'multibisage', 'transformer', 'shared_transformer', 'nffn', 'nsum',
    'nhadamard', 'pinfeat_to_last', 'aggregate_by_ffn'
)
ENCODER_MODES = ('attention_only', 'full_block')


@dataclass(frozen=True)
class ModelConfig:
    k: int = 3
    n: int = 10
    d_v: int = 32
    d_t: int = 16
    d_h: int = 32
    d: int = 32
    heads: int = 2
    variant: str = 'multibisage'
    encoder_mode: str = 'attention_only'
    dropout: float = 0.0
    logit_scale: float = 1.0
    visual_layers: List[int] = field(default_factory=list)

    def __post_init__(self):
        assert self.k >= 1, 'k must be at least 1'
        assert self.n >= 0, 'n must be non-negative'
        assert self.d_h % self.heads == 0, \
            'd_h=%d is not divisible by %d heads' % (self.d_h, self.heads)
        assert self.d % self.heads == 0, \
            'd=%d is not divisible by %d heads' % (self.d, self.heads)
        assert self.variant in VARIANTS, 'unknown variant `%s`' % self.variant
        assert self.encoder_mode in ENCODER_MODES, \
            'unknown encoder mode `%s`' % self.encoder_mode
        assert 0.0 <= self.dropout < 1.0, 'dropout must be within [0, 1)'
        assert self.logit_scale > 0, 'logit_scale must be positive'

        object.__setattr__(self, 'visual_layers',
                           [int(width) for width in self.visual_layers])

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, 'model')

    def visual_widths(self, out):
        return [self.d_v] + self.visual_layers + [out]

    def textual_widths(self, out):
        return [self.d_t, out]


@dataclass
class PinContext:
    '''A batch of pins with their neighborhoods.

    `nbr_visual` is `(B, k, n, d_v)`, `nbr_textual` `(B, k, n, d_t)`; rows
    where `mask` `(B, k, n)` is False are zero-filled padding.
    '''
    pins: np.ndarray
    visual: np.ndarray
    textual: np.ndarray
    nbr_visual: np.ndarray
    nbr_textual: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        batch = len(self.pins)

        assert self.visual.shape[0] == self.textual.shape[0] == batch, \
            'pin features must have one row per pin'
        assert self.nbr_visual.shape[:3] == self.mask.shape, \
            'neighbor visual features do not match the mask'
        assert self.nbr_textual.shape[:3] == self.mask.shape, \
            'neighbor textual features do not match the mask'
        assert self.mask.shape[0] == batch, 'mask must have one row per pin'

    @property
    def batch_size(self):
        return len(self.pins)

    @property
    def k(self):
        return self.mask.shape[1]

    @property
    def n(self):
        return self.mask.shape[2]

    def take(self, rows):
        return PinContext(self.pins[rows], self.visual[rows],
                          self.textual[rows], self.nbr_visual[rows],
                          self.nbr_textual[rows], self.mask[rows])

    def check(self, cfg):
        assert self.k == cfg.k, \
            'context has %d graphs, model expects %d' % (self.k, cfg.k)
        assert self.n == cfg.n, \
            'context has %d neighbors, model expects %d' % (self.n, cfg.n)
        assert self.visual.shape[1] == cfg.d_v, 'visual width mismatch'
        assert self.textual.shape[1] == cfg.d_t, 'textual width mismatch'


def build_contexts(pins, feats, tables, graph_ids, n):
    '''Assemble the batched context of `pins` from the feature store and the
    neighbor tables of `graph_ids`.'''
    pins = np.asarray([int(pin) for pin in pins], dtype=np.uint64)
    visual, textual = feats.lookup(pins)

    rows = np.stack([tables.index_matrix(feats, graph_id, n, pins)
                     for graph_id in graph_ids], axis=1) \
        if graph_ids else np.zeros((len(pins), 0, n), dtype=np.int64)
    mask = rows >= 0
    safe = np.where(mask, rows, 0)

    nbr_visual = feats.visual[safe] * mask[..., None]
    nbr_textual = feats.textual[safe] * mask[..., None]

    return PinContext(pins, visual, textual, nbr_visual, nbr_textual, mask)


# Parameter names of one token pathway: FFN prefixes for pin and neighbor
# tokens (None drops them), the global token and the encoder.
Names = namedtuple('Names', ['pin', 'neighbor', 'token', 'encoder'])


def graph_names(i, encoder=None):
    prefix = 'g%d' % i

    return Names(prefix, prefix, prefix + '.token',
                 encoder or prefix + '.encoder')


def glorot(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))

    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_ffn(params, rng, prefix, widths):
    for j, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        params['%s.%d.W' % (prefix, j)] = parameter(
            glorot(rng, fan_in, fan_out))
        params['%s.%d.b' % (prefix, j)] = parameter(np.zeros(fan_out))


def init_token(params, rng, name, width):
    params[name] = parameter(rng.normal(0.0, 0.02, size=width))


def init_encoder(params, rng, prefix, d_in, d_out, cfg):
    assert d_in % cfg.heads == 0, \
        'width %d is not divisible by %d heads' % (d_in, cfg.heads)

    for name in ('wq', 'wk', 'wv'):
        params['%s.%s' % (prefix, name)] = parameter(
            glorot(rng, d_in, d_in))

    if cfg.encoder_mode == 'full_block':
        params[prefix + '.wo'] = parameter(glorot(rng, d_in, d_in))
        params[prefix + '.proj'] = parameter(glorot(rng, d_in, d_out))
    else:
        params[prefix + '.wo'] = parameter(glorot(rng, d_in, d_out))


def init_pathway(params, rng, names, cfg, d_out):
    '''Pin/neighbor FFNs, global token and encoder of one graph sequence.'''
    if names.pin and names.pin + '.pin_visual.0.W' not in params:
        init_ffn(params, rng, names.pin + '.pin_visual',
                 cfg.visual_widths(cfg.d_h))
        init_ffn(params, rng, names.pin + '.pin_textual',
                 cfg.textual_widths(cfg.d_h))

    if names.neighbor and names.neighbor + '.nbr_visual.0.W' not in params:
        init_ffn(params, rng, names.neighbor + '.nbr_visual',
                 cfg.visual_widths(cfg.d_h))
        init_ffn(params, rng, names.neighbor + '.nbr_textual',
                 cfg.textual_widths(cfg.d_h))

    if names.token not in params:
        init_token(params, rng, names.token, cfg.d_h)

    if names.encoder + '.wq' not in params:
        init_encoder(params, rng, names.encoder, cfg.d_h, d_out, cfg)


def ffn_stack(x, params, prefix, cfg, rng=None):
    '''ReLU layers `prefix.0`, `prefix.1`, ...; dropout on each output.'''
    j = 0
    while '%s.%d.W' % (prefix, j) in params:
        x = relu(add(matmul(x, params['%s.%d.W' % (prefix, j)]),
                     params['%s.%d.b' % (prefix, j)]))
        x = dropout(x, cfg.dropout, rng)
        j += 1

    assert j, 'no FFN parameters under `%s`' % prefix

    return x


def global_token(params, name, batch):
    token = params[name]
    width = token.shape[-1]

    return broadcast_to(reshape(token, (1, 1, width)), (batch, 1, width))


def as_rows(x):
    '''`(B, w)` to a one-token sequence `(B, 1, w)`.'''
    return reshape(x, (x.shape[0], 1, x.shape[1]))


def pin_tokens(ctx, params, prefix, cfg, rng=None):
    visual = ffn_stack(as_tensor(ctx.visual), params, prefix + '.pin_visual',
                       cfg, rng)
    textual = ffn_stack(as_tensor(ctx.textual), params,
                        prefix + '.pin_textual', cfg, rng)

    return as_rows(visual), as_rows(textual)


def neighbor_tokens(ctx, i, params, prefix, cfg, rng=None):
    visual = ffn_stack(as_tensor(ctx.nbr_visual[:, i]), params,
                       prefix + '.nbr_visual', cfg, rng)
    textual = ffn_stack(as_tensor(ctx.nbr_textual[:, i]), params,
                        prefix + '.nbr_textual', cfg, rng)

    return visual, textual


def attention_params(params, prefix, cfg):
    return AttentionParams(params[prefix + '.wq'], params[prefix + '.wk'],
                           params[prefix + '.wv'], params[prefix + '.wo'],
                           cfg.heads)


def encode(seq, mask, params, prefix, cfg):
    '''Run the encoder `prefix` over `seq` `(B, m, w)` and return the global
    token's output `(B, d_out)`.'''
    p = attention_params(params, prefix, cfg)

    if cfg.encoder_mode == 'full_block':
        hidden = add(seq, multihead(layer_norm(seq), p, mask=mask))

        return matmul(hidden[:, 0, :], params[prefix + '.proj'])

    return multihead(seq, p, mask=mask)[:, 0, :]


def graph_sequence(ctx, i, params, cfg, names=None, rng=None):
    '''Token sequence of graph `i` and its validity mask.'''
    names = names or graph_names(i)
    batch = ctx.batch_size

    tokens = [global_token(params, names.token, batch)]
    mask = [np.ones((batch, 1), dtype=bool)]

    if names.pin:
        tokens.extend(pin_tokens(ctx, params, names.pin, cfg, rng))
        mask.append(np.ones((batch, 2), dtype=bool))

    if names.neighbor:
        visual, textual = neighbor_tokens(ctx, i, params, names.neighbor,
                                          cfg, rng)
        tokens.extend([visual, textual])
        mask.extend([ctx.mask[:, i], ctx.mask[:, i]])

    return concat(tokens, axis=1), np.concatenate(mask, axis=1)


def encode_graph_context(ctx, i, params, cfg, names=None, rng=None):
    '''Per-graph pin embedding x_{p,i} `(B, d)`.'''
    ctx.check(cfg)

    seq, mask = graph_sequence(ctx, i, params, cfg, names=names, rng=rng)

    return encode(seq, mask, params, (names or graph_names(i)).encoder, cfg)


def aggregator_sequence(xs, params, cfg, extra=()):
    batch = xs[0].shape[0] if xs else extra[0].shape[0]
    tokens = [global_token(params, 'agg.token', batch)]
    tokens += [as_rows(x) for x in xs]
    tokens += list(extra)

    return concat(tokens, axis=1)


def aggregate(xs, params, cfg, extra=()):
    '''Second-level encoder over [x_g; x_{p,1}; ...; x_{p,k}], L2
    normalized.'''
    assert len(xs) == cfg.k, 'expected %d graph embeddings, got %d' \
        % (cfg.k, len(xs))

    seq = aggregator_sequence(xs, params, cfg, extra)

    return l2_normalize(encode(seq, None, params, 'agg.encoder', cfg))


def init_params(cfg, seed=0):
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    params = OrderedDict()

    get_variant(cfg).init_params(params, rng)

    for name, tensor in params.items():
        tensor.name = name

    return params


def forward(ctx, params, cfg, rng=None):
    assert cfg.variant == 'multibisage', \
        'forward() runs the multibisage tower, use variant_forward()'

    return variant_forward(ctx, params, cfg, rng=rng)


def variant_forward(ctx, params, cfg, rng=None):
    '''Unit-norm embeddings `(B, d)`; `rng` enables dropout.'''
    ctx.check(cfg)

    return get_variant(cfg).forward(ctx, params, rng=rng)


def token_count(cfg):
    return get_variant(cfg).token_count()


def aggregator_length(cfg):
    return get_variant(cfg).aggregator_length()


def embed_pins(pins, params, cfg, feats, tables, graph_ids, batch_size=256):
    '''Embeddings of `pins` as a `(len(pins), d)` array.'''
    pins = list(pins)
    out = np.zeros((len(pins), cfg.d))

    for start in range(0, len(pins), batch_size):
        chunk = pins[start:start + batch_size]
        ctx = build_contexts(chunk, feats, tables, graph_ids, cfg.n)
        out[start:start + len(chunk)] = \
            variant_forward(ctx, params, cfg).data

    return out


def copy_params(params):
    return OrderedDict(
        (name, parameter(tensor.data.copy(), name=name))
        for name, tensor in params.items())


def count_params(params):
    return int(sum(tensor.data.size for tensor in params.values()))
