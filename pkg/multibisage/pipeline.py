# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

'''Pipeline steps shared by the CLI subcommands and `pipeline`.

Each step reads its inputs from explicit paths, writes under `out_dir` and
records what it wrote in `out_dir/manifest.json`. Layout of a full run:

    out_dir/graphs/graph_<i>.tsv   generated graphs
    out_dir/features.bsft          pin features
    out_dir/pairs/train.tsv        engagement pairs
    out_dir/pairs/test.tsv
    out_dir/pruned/graph_<i>.tsv   graphs fed to the walker
    out_dir/neighbors.tsv          walk neighborhoods
    out_dir/model/                 checkpoint, config and training logs
    out_dir/report.tsv             held-out metrics
'''

import os
import statistics

from . import __version__
from .config import config_hash, from_document, resolved
from .evaluate import EvalConfig, dump_ranks, evaluate_model, write_report
from .features import load_features
from .fs import (
    find_configuration, load_configuration, load_pairs, save_configuration,
    ensure_dir, write_manifest, write_tsv
)
from .graphstore import degree_prune, load_edges, save_edges
from .synthgen import gen_corpus, write_corpus
from .trainer import check_state, fit, load_checkpoint, save_checkpoint
from .utils import DataError, silent
from .walker import NeighborTable, load_table, run_walks, save_table

CHECKPOINT = 'checkpoint.bsck'
CONFIG = 'config.json'
METRICS = 'metrics.tsv'
RECALL = 'recall.tsv'
REPORT = 'report.tsv'
NEIGHBORS = 'neighbors.tsv'
ABLATION = 'ablation.tsv'

METRICS_HEADER = ('step', 'lr', 'loss_in_batch', 'loss_mixed', 'loss_total')


def graph_path(graphs_dir, i):
    return '%s/graph_%d.tsv' % (graphs_dir, i)


def record(out_dir, cfg, artifacts):
    return write_manifest(out_dir, __version__, config_hash(cfg), cfg.seed,
                          artifacts)


def gen_synth(cfg, out_dir, log=silent):
    assert max(cfg.graphs) < cfg.synth.num_graphs, \
        'graph %d is not generated (synth.num_graphs=%d)' \
        % (max(cfg.graphs), cfg.synth.num_graphs)

    paths = write_corpus(gen_corpus(cfg.synth, log), out_dir)
    record(out_dir, cfg, paths)

    return paths


def build_graph(edges, graph_id, out_dir=None, prune_cfg=None, log=silent):
    '''Load and validate an edge file, prune it if `prune_cfg` is given and
    optionally store it normalized.'''
    g = load_edges(edges, graph_id)
    paths = {}

    if prune_cfg:
        before = g.edge_count
        g = degree_prune(g, prune_cfg)
        log('graph %d: %d edges pruned down to %d'
            % (graph_id, before, g.edge_count))

    if out_dir:
        paths['graph_%d' % graph_id] = \
            save_edges(g, graph_path(out_dir + '/graphs', graph_id))

    return g, paths


def prune(cfg, graphs_dir, out_dir, log=silent):
    '''Prune the graphs listed in `prune_graphs`, copy the other ones.'''
    paths = {}

    for i in cfg.graphs:
        g = load_edges(graph_path(graphs_dir, i), i)

        if i in cfg.prune_graphs:
            before = g.edge_count
            g = degree_prune(g, cfg.prune)
            log('graph %d: %d edges pruned down to %d'
                % (i, before, g.edge_count))

        paths['pruned_%d' % i] = \
            save_edges(g, graph_path(out_dir + '/pruned', i))

    record(out_dir, cfg, paths)

    return paths


def walk_graphs(cfg, graphs, table_path, features=None, log=silent):
    '''Neighborhoods of `graphs`, `(graph_id, edge file)` pairs, written to
    `table_path`. Walks start from every featured pin, or every pin when
    `features` is not given.'''
    feats = load_features(features) if features else None
    table = NeighborTable()

    for i, path in graphs:
        g = load_edges(path, i)
        starts = [pin for pin in g.pin_ids if feats is None or pin in feats]

        log('graph %d: walking from %d pins' % (i, len(starts)))
        table = table.merge(run_walks(g, starts, cfg.walk, cfg.threads))

    path = save_table(table, table_path)
    record(os.path.dirname(os.path.abspath(path)), cfg, {'neighbors': path})

    return {'neighbors': path}


def walk(cfg, graphs_dir, features, out_dir, log=silent):
    '''Neighborhoods of every featured pin of every graph.'''
    return walk_graphs(cfg, [(i, graph_path(graphs_dir, i))
                             for i in cfg.graphs],
                       out_dir + '/' + NEIGHBORS, features, log)


def load_model_features(path, model_cfg):
    feats = load_features(path)
    widths = (feats.visual.shape[1], feats.textual.shape[1])

    if widths != (model_cfg.d_v, model_cfg.d_t):
        raise DataError('features `%s` are %dx%d wide, the model expects '
                        '%dx%d' % ((path,) + widths
                                   + (model_cfg.d_v, model_cfg.d_t)))

    return feats


def load_tables(neighbors, graph_ids):
    table = load_table(neighbors)
    missing = sorted(set(graph_ids) - set(table.graph_ids()))

    if missing:
        raise DataError('no neighborhoods for graph(s) %s in `%s`'
                        % (', '.join(str(i) for i in missing), neighbors))

    return table.restrict(graph_ids)


def train(cfg, data_dir, neighbors, out_dir, resume=None, log=silent):
    '''Fit a tower on `data_dir/pairs/train.tsv`.

    Held-out recall is measured on the first `eval_pairs_limit` test pairs
    against a pool of `eval_pool_size` pins.
    '''
    feats = load_model_features(data_dir + '/features.bsft', cfg.model)
    tables = load_tables(neighbors, cfg.graphs)
    pairs = load_pairs(data_dir + '/pairs/train.tsv')
    held_out = load_pairs(data_dir + '/pairs/test.tsv')
    held_out = held_out[:cfg.train.eval_pairs_limit]

    eval_cfg = EvalConfig(k=cfg.eval.k, pool_size=cfg.train.eval_pool_size,
                          seed=cfg.eval.seed)

    def evaluate(params):
        metrics, _, _ = evaluate_model(held_out, params, cfg.model, feats,
                                       tables, cfg.graphs, eval_cfg,
                                       cfg.threads)

        return metrics['recall@%d' % eval_cfg.k]

    state = load_checkpoint(resume) if resume else None

    state, metrics, recalls = fit(
        pairs, tables, feats, cfg.model, cfg.train, cfg.graphs, state=state,
        evaluate=evaluate if held_out else None, log=log)

    ensure_dir(out_dir)

    paths = {
        'checkpoint': save_checkpoint(state, out_dir + '/' + CHECKPOINT),
        'metrics': write_tsv(out_dir + '/' + METRICS,
                             [[repr(value) for value in row]
                              for row in metrics],
                             header=METRICS_HEADER, append=bool(resume)),
        'recall': write_tsv(out_dir + '/' + RECALL,
                            [(step, repr(recall))
                             for step, recall in recalls],
                            header=('step', 'recall_at_%d' % cfg.eval.k),
                            append=bool(resume)),
    }

    paths['config'] = out_dir + '/' + CONFIG
    save_configuration(paths['config'], resolved(cfg))
    record(out_dir, cfg, paths)

    return paths


def model_config(checkpoint):
    '''The configuration stored next to `checkpoint`.'''
    path = find_configuration(checkpoint)

    if not path:
        raise DataError('no configuration found for `%s`' % checkpoint)

    return from_document(load_configuration(path))


def evaluate(cfg, checkpoint, pairs, features, neighbors, out_dir,
             ranks_path=None, log=silent):
    '''Recall of a trained tower; the tower's own configuration decides
    the model and graphs, `cfg.eval` the metric.'''
    state = load_checkpoint(checkpoint)
    trained = model_config(checkpoint)
    check_state(state, trained.model)

    feats = load_model_features(features, trained.model)
    tables = load_tables(neighbors, trained.graphs)
    pairs_list = load_pairs(pairs)

    metrics, ranks, pool = evaluate_model(
        pairs_list, state.params, trained.model, feats, tables,
        trained.graphs, cfg.eval, cfg.threads, log)

    paths = {'report': write_report(out_dir + '/' + REPORT, metrics)}

    if ranks_path:
        paths['ranks'] = dump_ranks(ranks_path, pairs_list, ranks,
                                    cfg.eval.k)

    record(out_dir, cfg, paths)

    return metrics, paths


def subset_name(graphs):
    return 'graphs_' + '_'.join(str(i) for i in graphs)


def ablate(cfg, subsets, data_dir, neighbors, out_dir, seeds=None,
           log=silent):
    '''Train and evaluate one tower per graph subset and seed.

    Writes one row per subset: the mean recall over seeds followed by the
    recall of every seed.
    '''
    seeds = list(seeds) if seeds else [cfg.seed]
    key = 'recall@%d' % cfg.eval.k
    rows = []

    for graphs in subsets:
        recalls = []

        for seed in seeds:
            run = cfg.with_seed(seed).with_graphs(graphs)
            run_dir = '%s/%s/seed_%d' % (out_dir, subset_name(graphs), seed)

            log('training on graphs %s, seed %d' % (graphs, seed))
            paths = train(run, data_dir, neighbors, run_dir, log=log)
            metrics, _ = evaluate(run, paths['checkpoint'],
                                  data_dir + '/pairs/test.tsv',
                                  data_dir + '/features.bsft', neighbors,
                                  run_dir, log=log)
            recalls.append(metrics[key])

        rows.append([','.join(str(i) for i in graphs),
                     repr(statistics.mean(recalls))]
                    + [repr(recall) for recall in recalls])

    header = ['graphs', key] + ['%s_seed_%d' % (key, seed) for seed in seeds]
    path = write_tsv(out_dir + '/' + ABLATION, rows, header=header)
    record(out_dir, cfg, {'ablation': path})

    return rows, path


def run_pipeline(cfg, out_dir, log=silent):
    '''gen-synth, prune, walk, train and eval into a single directory.'''
    paths = dict(gen_synth(cfg, out_dir, log))
    paths.update(prune(cfg, out_dir + '/graphs', out_dir, log))
    paths.update(walk(cfg, out_dir + '/pruned', out_dir + '/features.bsft',
                      out_dir, log))
    paths.update(train(cfg, out_dir, out_dir + '/' + NEIGHBORS,
                       out_dir + '/model', log=log))

    metrics, report = evaluate(cfg, paths['checkpoint'],
                               out_dir + '/pairs/test.tsv',
                               out_dir + '/features.bsft',
                               out_dir + '/' + NEIGHBORS, out_dir, log=log)
    paths.update(report)

    return metrics, paths
