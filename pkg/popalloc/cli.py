#!/usr/bin/env python
# encoding: utf-8
"""
Command line entry point.

    pop run --domain traffic --config experiment.json
    pop sweep --domain traffic --sizes 500,1k,2k --k 8
    pop gen --domain cluster --seed 3 --out cluster.json --param num_jobs=96

Exit code is 0 only if every requested solve returned Optimal and passed
verification against the original instance.
"""
import argparse, logging, sys
from . import modifiers as mods
from . import utils
from .basedomain import get_domain
from .bench import ExperimentConfig, run_experiment, scaling_sweep
from .exceptions import PopError
from .solver import SolverLimits
log = logging.getLogger('popalloc')


def _params(items):
    """ key=value pairs; numeric values go through the num converter. """
    params = {}
    for item in items or ():
        key, sep, value = item.partition('=')
        if not sep:
            raise PopError(f"Expected key=value, got '{item}'")
        if utils.is_quantity(value):
            params[key] = mods.num(value)
        else:
            params[key] = mods.boolean(value) if value.lower() in ('true', 'false') else value
    return params


def cmd_run(opts):
    overrides = {'domain': opts.domain, 'output': opts.output, 'parallelism': opts.parallelism,
        'solver': opts.solver, 'partitioner': opts.partitioner}
    if opts.config:
        config = ExperimentConfig.load(opts.config, **overrides)
    else:
        config = ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    records = run_experiment(config)
    for record in records:
        print(f'{record.method:>10} seed={record.seed:<4} objective={record.objective:<14.9g} '
            f'feasible={str(record.feasible).lower():<5} {record.status:<14} {record.total_ms:10.1f}ms')
    return all(r.ok for r in records if r.method != 'baseline')


def cmd_sweep(opts):
    sizes = utils.split_list(opts.sizes, mods.integer)
    limits = SolverLimits(time_limit=opts.time_limit, node_cap=opts.node_cap)
    sweep = scaling_sweep(opts.domain, sizes, opts.k, opts.seed, opts.solver, limits,
        opts.partitioner, _params(opts.param), opts.output)
    for row in sweep.rows:
        print(f'size={row.size:<8} vars={row.variables:<8} full={row.full_ms:10.1f}ms '
            f'pop-{opts.k}={row.pop_ms:10.1f}ms {"censored" if row.censored else ""}')
    print(f'log-log slope: {sweep.slope:.3f}')
    return not any(row.censored for row in sweep.rows)


def cmd_gen(opts):
    domain = get_domain(opts.domain)
    instance = domain.generate(opts.seed, **_params(opts.param))
    domain.save(instance, opts.out)
    print(f'Wrote {instance} to {opts.out}')
    return True


def main(argv=None):
    cmdline = argparse.ArgumentParser(prog='pop', description='Partitioned allocation experiments')
    cmdline.add_argument('-v', '--verbose', default=False, action='store_true', help='Show debug output')
    commands = cmdline.add_subparsers(dest='command', required=True)
    run = commands.add_parser('run', help='Run full, POP-k and baseline on seeded instances')
    run.add_argument('--domain', help='Allocation domain')
    run.add_argument('--config', help='Experiment config (JSON)')
    run.add_argument('--output', help='Output directory')
    run.add_argument('--parallelism', type=mods.integer, help='Sub-problem worker processes')
    run.add_argument('--solver', help='Solver adapter (embedded or highs)')
    run.add_argument('--partitioner', help='random, stratified, clustered or skewed')
    run.set_defaults(func=cmd_run)
    sweep = commands.add_parser('sweep', help='Full vs POP-k runtime over instance sizes')
    sweep.add_argument('--domain', required=True, help='Allocation domain')
    sweep.add_argument('--sizes', required=True, help='Ascending comma separated sizes (20k style allowed)')
    sweep.add_argument('--k', type=mods.integer, default=8, help='Sub-problem count')
    sweep.add_argument('--seed', type=mods.integer, default=0, help='Instance seed')
    sweep.add_argument('--solver', default=None, help='Solver adapter')
    sweep.add_argument('--partitioner', default=None, help='Partitioner name')
    sweep.add_argument('--time-limit', type=mods.duration, default=None, help='Per solve limit (5m, 300s)')
    sweep.add_argument('--node-cap', type=mods.integer, default=SolverLimits.node_cap,
        help='Branch and bound nodes per solve (20k)')
    sweep.add_argument('--param', action='append', help='Generator parameter key=value')
    sweep.add_argument('--output', default=None, help='Write sweep.csv here')
    sweep.set_defaults(func=cmd_sweep)
    gen = commands.add_parser('gen', help='Write a seeded instance as JSON')
    gen.add_argument('--domain', required=True, help='Allocation domain')
    gen.add_argument('--seed', type=mods.integer, required=True, help='Instance seed')
    gen.add_argument('--out', required=True, help='Output file')
    gen.add_argument('--param', action='append', help='Generator parameter key=value')
    gen.set_defaults(func=cmd_gen)
    opts = cmdline.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if opts.verbose else logging.INFO,
        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        return 0 if opts.func(opts) else 1
    except PopError as err:
        log.error(err)
        return 2


if __name__ == '__main__':
    sys.exit(main())
