# Copyright (C) 2016 Benoit Myard <myardbenoit@gmail.com>
# Released under the terms of the BSD license.

import sys
import click

from . import __version__
from .config import load_config
from .fs import ensure_dir
from .pipeline import (
    NEIGHBORS, ablate as run_ablate, build_graph as run_build_graph,
    evaluate as run_evaluate, gen_synth as run_gen_synth, graph_path,
    prune as run_prune, record, run_pipeline, train as run_train,
    walk_graphs as run_walk
)
from .utils import DataError, echo, parse_ids, parse_prune, silent
from .walker import load_table

EXIT_USAGE = 1
EXIT_DATA = 2


def run(argv=None):
    '''Run the command line and return its exit code.'''
    try:
        cli.main(args=argv, prog_name='multibisage', standalone_mode=False,
                 obj={})
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo('Aborted!')
        return EXIT_USAGE
    except AssertionError as e:
        click.echo('Error: %s' % e)
        return EXIT_USAGE
    except DataError as e:
        click.echo('Error: %s' % e)
        return EXIT_DATA

    return 0


def main():
    sys.exit(run(sys.argv[1:]))


def experiment_options(command):
    '''Options every experiment command understands.'''
    options = [
        click.option('-c', '--config', 'config_path', default=None,
                     type=click.Path(exists=True, dir_okay=False),
                     help='Experiment configuration (JSON or YAML).'),
        click.option('-p', '--preset', default='desk',
                     type=click.Choice(['desk', 'production']),
                     help='Preset the configuration is merged on (defaults '
                     'to `desk`).'),
        click.option('-s', '--set', 'overrides', multiple=True,
                     metavar='SECTION.KEY=VALUE',
                     help='Override one configuration key, repeatable.'),
        click.option('--seed', type=int, default=None,
                     help='Seed of every random stream.'),
        click.option('-t', '--threads', type=int, default=None,
                     help='Worker threads (defaults to the CPU count).'),
        click.option('-q', '--quiet', is_flag=True,
                     help='Only print produced artifacts.'),
    ]

    for option in reversed(options):
        command = option(command)

    return command


def configure(config_path, preset, overrides, seed, threads, quiet):
    cfg = load_config(config_path, preset, overrides, seed=seed,
                      threads=threads)

    return cfg, silent if quiet else echo


def prune_overrides(overrides, prune_values):
    '''`--set` overrides extended with a `MIN,MAX,FACTOR` prune option.'''
    if not prune_values:
        return overrides

    return tuple(overrides) + tuple(
        'prune.%s=%s' % (key, value)
        for key, value in parse_prune(prune_values).items())


def print_paths(paths):
    for name in sorted(paths):
        echo(paths[name])


@click.group(invoke_without_command=True)
@click.option('-v', '--version', is_flag=True, help='Print program version.')
@click.pass_context
def cli(ctx, version):
    if version:
        echo(__version__)
    elif ctx.invoked_subcommand is None:
        echo(ctx.get_help())


@cli.command('gen-synth')
@click.option('-o', '--out-dir', required=True, help='Output directory.')
@experiment_options
def gen_synth(out_dir, **options):
    '''Generate a planted-cluster corpus.

    Pins, the context nodes of every graph and engagement pairs share latent
    clusters; `synth.graph_informativeness` decides how much of that structure
    each graph carries.

        \b
        $ multibisage gen-synth --out-dir runs/desk
        runs/desk/features.bsft
        runs/desk/graphs/graph_0.tsv
        ...
    '''
    cfg, log = configure(**options)

    print_paths(run_gen_synth(cfg, ensure_dir(out_dir), log))


@cli.command('build-graph')
@click.argument('edges', required=False)
@click.option('-e', '--edges', 'edges_option', default=None,
              help='Edge file (same as the EDGES argument).')
@click.option('-g', '--graph-id', type=int, default=0,
              help='Id of the graph (defaults to 0).')
@click.option('-P', '--prune', 'prune_values', default=None,
              metavar='MIN,MAX,FACTOR',
              help='Degree-prune the graph with these values.')
@click.option('-o', '--out-dir', default=None,
              help='Store the normalized edge file under this directory.')
@experiment_options
def build_graph(edges, edges_option, graph_id, prune_values, out_dir,
                **options):
    '''Load an edge file and print its statistics.

    Edge files hold one `pin_id<TAB>ctx_id` per line.

        \b
        $ multibisage build-graph --edges boards.tsv --graph-id 0 \\
            --prune 10,10000,0.86 --seed 7
    '''
    assert bool(edges) != bool(edges_option), \
        'expected one edge file, as EDGES or --edges'

    options['overrides'] = prune_overrides(options['overrides'],
                                           prune_values)
    cfg, log = configure(**options)

    g, paths = run_build_graph(edges or edges_option, graph_id, out_dir,
                               cfg.prune if prune_values else None, log)
    echo(g.stats())

    if out_dir:
        record(out_dir, cfg, paths)
        print_paths(paths)


@cli.command()
@click.option('-d', '--data-dir', required=True,
              help='Directory holding `graphs/graph_<i>.tsv`.')
@click.option('-o', '--out-dir', required=True, help='Output directory.')
@click.option('-P', '--prune', 'prune_values', default=None,
              metavar='MIN,MAX,FACTOR',
              help='Override `prune.min_degree`, `prune.max_degree` and '
              '`prune.prune_factor`.')
@experiment_options
def prune(data_dir, out_dir, prune_values, **options):
    '''Degree-prune graphs before walking them.

    Graphs listed in `prune_graphs` are pruned, other ones of `graphs` are
    copied as is, all into `<out-dir>/pruned/`.
    '''
    options['overrides'] = prune_overrides(options['overrides'],
                                           prune_values)
    cfg, log = configure(**options)

    print_paths(run_prune(cfg, data_dir + '/graphs', ensure_dir(out_dir),
                          log))


@cli.command()
@click.option('-G', '--graphs-dir', default=None,
              help='Directory holding `graph_<i>.tsv` for every graph.')
@click.option('--graph', 'graph_file', default=None,
              help='Single edge file to walk instead of `--graphs-dir`.')
@click.option('-g', '--graph-id', type=int, default=0,
              help='Id of the `--graph` file (defaults to 0).')
@click.option('-f', '--features', default=None,
              help='Feature file; walks start from its pins (defaults to '
              'every pin).')
@click.option('--nw', type=int, default=None, help='Walk segments per pin.')
@click.option('--alpha', type=float, default=None,
              help='Restart probability.')
@click.option('--top-k', type=int, default=None,
              help='Neighbors kept per pin.')
@click.option('-o', '--out-dir', default=None,
              help='Output directory (table written as `neighbors.tsv`).')
@click.option('--out', 'out_file', default=None,
              help='Neighbor table path, instead of `--out-dir`.')
@experiment_options
def walk(graphs_dir, graph_file, graph_id, features, nw, alpha, top_k,
         out_dir, out_file, **options):
    '''Sample neighborhoods with restart random walks.

    The result does not depend on `--threads`.

        \b
        $ multibisage walk --graph boards.tsv --nw 500 --alpha 0.5 \\
            --top-k 10 --seed 7 --out neighbors.tsv
    '''
    assert bool(graphs_dir) != bool(graph_file), \
        'expected one of --graphs-dir or --graph'
    assert bool(out_dir) != bool(out_file), \
        'expected one of --out-dir or --out'

    overrides = list(options['overrides'])
    for key, value in (('nw', nw), ('alpha', alpha), ('top_k', top_k)):
        if value is not None:
            overrides.append('walk.%s=%r' % (key, value))

    options['overrides'] = tuple(overrides)
    cfg, log = configure(**options)

    if graph_file:
        graphs = [(graph_id, graph_file)]
    else:
        graphs = [(i, graph_path(graphs_dir, i)) for i in cfg.graphs]

    print_paths(run_walk(cfg, graphs,
                         out_file or ensure_dir(out_dir) + '/' + NEIGHBORS,
                         features, log))


@cli.command()
@click.argument('pin', type=int)
@click.option('-n', '--neighbors', 'table_path', required=True,
              help='Neighbor table written by `walk`.')
@click.option('-g', '--graph', 'graph_ids', default=None,
              help='Comma separated graph ids (defaults to all).')
def neighbors(pin, table_path, graph_ids):
    '''Print the top neighbors of a pin in every graph.

        \b
        $ multibisage neighbors 42 -n runs/desk/neighbors.tsv
    '''
    table = load_table(table_path)
    graph_ids = parse_ids(graph_ids) if graph_ids else table.graph_ids()

    echo({
        str(graph_id): [{'pin': node, 'visits': visits}
                        for node, visits in table.get(pin, graph_id)]
        for graph_id in graph_ids
    })


@cli.command()
@click.option('-d', '--data-dir', required=True,
              help='Directory holding `features.bsft` and `pairs/`.')
@click.option('-n', '--neighbors', 'table_path', default=None,
              help='Neighbor table (defaults to `<data-dir>/neighbors.tsv`).')
@click.option('-o', '--out-dir', required=True, help='Output directory.')
@click.option('-r', '--resume', default=None,
              help='Checkpoint to resume from.')
@experiment_options
def train(data_dir, table_path, out_dir, resume, **options):
    '''Train a tower.

    Writes `checkpoint.bsck`, `config.json`, `metrics.tsv` and `recall.tsv`.
    '''
    cfg, log = configure(**options)

    print_paths(run_train(cfg, data_dir,
                          table_path or data_dir + '/' + NEIGHBORS,
                          ensure_dir(out_dir), resume=resume, log=log))


@cli.command('eval')
@click.option('-C', '--checkpoint', required=True,
              help='Checkpoint written by `train`.')
@click.option('--pairs', 'pairs_path', required=True,
              help='Pairs to evaluate.')
@click.option('-f', '--features', required=True)
@click.option('-n', '--neighbors', 'table_path', required=True)
@click.option('-o', '--out-dir', required=True, help='Output directory.')
@click.option('--pool-size', type=int, default=None,
              help='Distractor pool size.')
@click.option('-k', '--k', 'k', type=int, default=None,
              help='Recall cut-off.')
@click.option('--dump-ranks', default=None,
              help='Write the rank of every pair to this file.')
@experiment_options
def evaluate(checkpoint, pairs_path, features, table_path, out_dir,
             pool_size, k, dump_ranks, **options):
    '''Recall@k of a trained tower against random distractors.

        \b
        $ multibisage eval -C runs/desk/model/checkpoint.bsck \\
            --pairs runs/desk/pairs/test.tsv -f runs/desk/features.bsft \\
            -n runs/desk/neighbors.tsv -o runs/desk
        recall@10  0.61
        ...
    '''
    overrides = list(options['overrides'])

    if pool_size is not None:
        overrides.append('eval.pool_size=%d' % pool_size)
    if k is not None:
        overrides.append('eval.k=%d' % k)

    options['overrides'] = tuple(overrides)
    cfg, log = configure(**options)

    metrics, paths = run_evaluate(cfg, checkpoint, pairs_path, features,
                                  table_path, ensure_dir(out_dir),
                                  ranks_path=dump_ranks, log=log)

    for name, value in metrics.items():
        echo('%s\t%s' % (name, value))

    print_paths(paths)


@cli.command()
@click.option('-d', '--data-dir', required=True)
@click.option('-n', '--neighbors', 'table_path', default=None,
              help='Neighbor table (defaults to `<data-dir>/neighbors.tsv`).')
@click.option('-o', '--out-dir', required=True, help='Output directory.')
@click.option('-g', '--graphs', 'subsets', multiple=True, required=True,
              help='Comma separated graph subset, repeatable.')
@click.option('--seeds', default=None,
              help='Comma separated seeds to average over.')
@experiment_options
def ablate(data_dir, table_path, out_dir, subsets, seeds, **options):
    '''Compare towers trained on different graph subsets.

        \b
        $ multibisage ablate -d runs/desk -o runs/ablate -g 0 -g 0,1,2
    '''
    cfg, log = configure(**options)

    rows, path = run_ablate(cfg, [parse_ids(subset) for subset in subsets],
                            data_dir,
                            table_path or data_dir + '/' + NEIGHBORS,
                            ensure_dir(out_dir),
                            seeds=parse_ids(seeds) if seeds else None,
                            log=log)

    for row in rows:
        echo('\t'.join(row))

    echo(path)


@cli.command()
@click.option('-o', '--out-dir', required=True, help='Output directory.')
@experiment_options
def pipeline(out_dir, **options):
    '''Run gen-synth, prune, walk, train and eval in one go.

    Artifacts are the same as running each subcommand with the same
    configuration.
    '''
    cfg, log = configure(**options)

    metrics, paths = run_pipeline(cfg, ensure_dir(out_dir), log)

    for name, value in metrics.items():
        echo('%s\t%s' % (name, value))

    print_paths(paths)
