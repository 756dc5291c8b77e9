# encoding: utf-8
"""
Experiment harness: solve seeded instances with the full program, POP-k for
every k in a list and the domain's heuristic, verify every allocation against
the original instance and write tradeoff tables.

Output directory layout:
    records.csv      feasible rows, deterministic columns only
    infeasible.csv   rows that failed to solve or to verify
    timings.csv      wall-clock columns for every row
    records.json     everything above in one document
    allocations/     one JSON dump per method and seed
"""
import csv, json, logging, math, os
import numpy as np
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from . import modifiers as mods
from . import utils
from .basedomain import get_domain
from .exceptions import ConfigError, InfeasibleSubproblemError, PopError
from .partition import similarity_report
from .pop import solve_full, solve_pop
from .solver import MIN, SolverLimits, Status
from .solver.adapter import SOLVERS
log = logging.getLogger(__name__)

SCHEMA = 'popalloc-records/1'
DEFAULT_K_LIST = (1, 2, 4, 8, 16)
RECORD_FIELDS = ('method', 'k', 'seed', 'objective', 'variables', 'feasible', 'similarity', 'status')
TIMING_FIELDS = ('method', 'k', 'seed', 'partition_ms', 'max_sub_ms', 'coalesce_ms', 'total_ms', 'serial_ms')
PLOT_FIELDS = ('method', 'count', 'runtime_ms', 'runtime_std', 'objective', 'objective_std')
SIZE_PARAMS = {'cluster': 'num_jobs', 'traffic': 'num_commodities', 'loadbalance': 'num_shards'}


@dataclass
class ExperimentConfig:
    domain: str
    seeds: list = field(default_factory=lambda: [0])
    instance: str = None            # Instance file; overrides generation
    params: dict = field(default_factory=dict)
    k_list: list = field(default_factory=lambda: list(DEFAULT_K_LIST))
    partitioner: str = None         # None: the domain's default
    replication: float = None       # Hotness threshold (x mean load)
    parallelism: int = 1
    output: str = 'results'
    solver: str = 'embedded'
    time_limit: float = None        # None: POP_SOLVER_TIME_LIMIT or 300s
    node_cap: int = SolverLimits.node_cap
    full: bool = True
    baseline: bool = True
    quality_threshold: float = 0.95  # POP-k objective as a fraction of the full optimum

    CONVERTERS = {
        'seeds': lambda v: utils.split_list(v, mods.integer),
        'k_list': lambda v: utils.split_list(v, mods.integer),
        'replication': mods.optional(mods.num),
        'parallelism': mods.integer,
        'time_limit': mods.optional(mods.duration),
        'node_cap': mods.integer,
        'full': mods.boolean,
        'baseline': mods.boolean,
        'quality_threshold': mods.percent,
    }

    def validate(self):
        get_domain(self.domain)
        if not self.k_list or any(k < 1 for k in self.k_list):
            raise ConfigError(f'k_list entries must be at least 1, got {self.k_list}')
        if self.instance is None and not self.seeds:
            raise ConfigError('Generated instances need at least one seed')
        if self.node_cap < 0:
            raise ConfigError('node_cap must be nonnegative')
        if self.parallelism < 1:
            raise ConfigError('parallelism must be at least 1')
        if self.solver not in SOLVERS:
            raise ConfigError(f"Unknown solver '{self.solver}'")
        if self.replication is not None and not self.replication > 0:
            raise ConfigError('replication threshold must be positive')
        if not 0 < self.quality_threshold <= 1:
            raise ConfigError(f'quality_threshold must be in (0, 1], got {self.quality_threshold}')
        return self

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        if 'seed' in data:
            raise ConfigError("Use 'seeds' (a list) instead of 'seed'")
        values = {}
        for key, value in data.items():
            converter = cls.CONVERTERS.get(key)
            values[key] = converter(value) if converter else value
        try:
            config = cls(**values)
        except TypeError as err:
            raise ConfigError(str(err))
        return config.validate()

    @classmethod
    def load(cls, path, **overrides):
        try:
            with open(path) as handle:
                data = json.load(handle)
        except (OSError, ValueError) as err:
            raise ConfigError(f"Cannot read config '{path}': {err}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)


@dataclass
class TradeoffRecord:
    method: str                     # full, pop-<k> or baseline
    k: int
    seed: int
    objective: float = math.nan
    variables: int = 0
    feasible: bool = False
    similarity: float = 0.0         # Max sub-problem distance from the global features
    status: str = Status.OPTIMAL.value
    partition_ms: float = 0.0
    max_sub_ms: float = 0.0
    coalesce_ms: float = 0.0
    total_ms: float = 0.0
    serial_ms: float = 0.0
    quality: dict = field(default_factory=dict)
    error: str = None

    def __str__(self):
        return f'<TradeoffRecord:{self.method} seed={self.seed} obj={self.objective:.6g} {self.status}>'

    @property
    def ok(self):
        return self.feasible and self.status == Status.OPTIMAL.value

    def row(self):
        values = asdict(self)
        values['objective'] = f'{self.objective:.9g}'
        values['similarity'] = f'{self.similarity:.9g}'
        values['feasible'] = str(self.feasible).lower()
        return {key: values[key] for key in RECORD_FIELDS}

    def timing_row(self):
        values = asdict(self)
        return {key: values[key] if key in ('method', 'k', 'seed') else f'{values[key]:.3f}' for key in TIMING_FIELDS}


def run_experiment(config):
    """ Run every method for every seed; returns the records and writes the
        output directory. Infeasible or failed solves become records marked
        infeasible and the run continues.
    """
    config.validate()
    domain = get_domain(config.domain)
    limits = SolverLimits(time_limit=config.time_limit, node_cap=config.node_cap)
    os.makedirs(os.path.join(config.output, 'allocations'), exist_ok=True)
    records = []
    seeds = config.seeds if config.instance is None else config.seeds[:1] or [0]
    for seed in seeds:
        if config.instance:
            instance = domain.load(config.instance)
        else:
            instance = domain.generate(seed, **config.params)
        log.info(f'Seed {seed}: {instance}')
        if config.full:
            records.append(_run_full(domain, instance, seed, config, limits))
        for k in config.k_list:
            records.append(_run_pop(domain, instance, seed, k, config, limits))
        if config.baseline:
            records.append(_run_baseline(domain, instance, seed, config))
    for method, ratio in quality_ratios(records, domain.SENSE).items():
        if method.startswith('pop-') and ratio < config.quality_threshold:
            log.warning(f'{method} reached {ratio:.1%} of the full optimum, below {config.quality_threshold:.1%}')
    write_records(records, config.output)
    emit_plot_data(records, config.output)
    return records


def quality_ratios(records, sense):
    """ Mean objective of each method relative to the full optimum, over the
        seeds where both are feasible; 1.0 means no loss. Minimization ratios
        are inverted so they also stay at or below 1.
    """
    full = {r.seed: r.objective for r in records if r.method == 'full' and r.ok}
    ratios = defaultdict(list)
    for record in records:
        if record.method == 'full' or not record.feasible or record.seed not in full:
            continue
        value, reference = record.objective, full[record.seed]
        if sense == MIN:
            value, reference = reference, value
        if reference > 0:
            ratios[record.method].append(value / reference)
        elif value == reference:
            ratios[record.method].append(1.0)
    return {method: float(np.mean(values)) for method, values in ratios.items()}


def _verify(domain, instance, record, allocation, config):
    report = domain.verify_feasible(instance, allocation)
    record.feasible = report.feasible
    record.objective = domain.objective(instance, allocation)
    record.quality = domain.quality(instance, allocation)
    if not report.feasible:
        log.warning(f'{record.method} seed {record.seed} failed verification: {report}')
        record.error = str(report)
    path = os.path.join(config.output, 'allocations', f'{record.method}-seed{record.seed}.json')
    with open(path, 'w') as handle:
        json.dump(allocation.to_dict(), handle, sort_keys=True)
    return record


def _run_full(domain, instance, seed, config, limits):
    record = TradeoffRecord('full', 1, seed, variables=domain.variable_count(instance))
    try:
        allocation, result = solve_full(instance, config.solver, limits)
    except PopError as err:
        record.status, record.error = 'Error', str(err)
        return record
    record.status = result.status.value
    record.max_sub_ms = record.total_ms = record.serial_ms = utils.ms(result.wall_clock)
    if allocation is None:
        return record
    return _verify(domain, instance, record, allocation, config)


def _run_pop(domain, instance, seed, k, config, limits):
    record = TradeoffRecord(f'pop-{k}', k, seed)
    try:
        with utils.timer() as partitioning:
            plan = domain.partition(instance, k, config.partitioner, seed, config.replication)
        record.partition_ms = utils.ms(partitioning.elapsed)
        record.similarity = similarity_report(plan, domain.entities(instance)).max_distance
        allocation, stats = solve_pop(instance, plan, config.parallelism, config.solver, limits)
    except PopError as err:
        log.warning(f'pop-{k} seed {seed}: {err}')
        record.status = Status.INFEASIBLE.value if isinstance(err, InfeasibleSubproblemError) else 'Error'
        record.error = str(err)
        return record
    record.status = stats.status.value
    record.variables = sum(stats.sub_variables)
    record.max_sub_ms = utils.ms(stats.max_time)
    record.serial_ms = utils.ms(stats.total_time)
    record.coalesce_ms = utils.ms(stats.coalesce_time)
    record.total_ms = record.partition_ms + utils.ms(stats.build_time) + record.max_sub_ms + record.coalesce_ms
    return _verify(domain, instance, record, allocation, config)


def _run_baseline(domain, instance, seed, config):
    record = TradeoffRecord('baseline', 1, seed)
    with utils.timer() as elapsed:
        allocation = domain.baseline(instance, seed)
    record.max_sub_ms = record.total_ms = record.serial_ms = utils.ms(elapsed.elapsed)
    return _verify(domain, instance, record, allocation, config)


def _write_csv(path, rows, columns, header=None):
    with open(path, 'w', newline='') as handle:
        if header:
            handle.write(f'# {header}\n')
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)


def write_records(records, output):
    """ Quality rows split into records.csv (feasible) and infeasible.csv;
        timings kept apart so the quality tables are reproducible byte for byte.
    """
    feasible = [r for r in records if r.feasible]
    quarantined = [r for r in records if not r.feasible]
    _write_csv(os.path.join(output, 'records.csv'), [r.row() for r in feasible], RECORD_FIELDS, f'schema: {SCHEMA}')
    _write_csv(os.path.join(output, 'infeasible.csv'), [r.row() for r in quarantined], RECORD_FIELDS, f'schema: {SCHEMA}')
    _write_csv(os.path.join(output, 'timings.csv'), [r.timing_row() for r in records], TIMING_FIELDS)
    with open(os.path.join(output, 'records.json'), 'w') as handle:
        json.dump({'schema': SCHEMA, 'records': [asdict(r) for r in records]}, handle, indent=2, default=str)
    log.info(f'Wrote {len(feasible)} feasible and {len(quarantined)} infeasible records to {output}')


def emit_plot_data(records, output=None):
    """ One point per method: mean total runtime and objective with standard
        deviations across seeds. Only feasible records count.
    """
    groups = defaultdict(list)
    for record in records:
        if record.feasible:
            groups[record.method].append(record)
    rows = []
    for method, group in groups.items():
        runtimes = np.array([r.total_ms for r in group])
        objectives = np.array([r.objective for r in group])
        rows.append({'method': method, 'count': len(group),
            'runtime_ms': f'{runtimes.mean():.3f}', 'runtime_std': f'{runtimes.std():.3f}',
            'objective': f'{objectives.mean():.9g}', 'objective_std': f'{objectives.std():.9g}'})
    if output:
        _write_csv(os.path.join(output, 'plot.csv'), rows, PLOT_FIELDS, f'schema: {SCHEMA}')
    return rows


@dataclass
class SweepRow:
    size: int
    variables: int
    full_ms: float
    pop_ms: float                   # Partition + slowest sub-problem + coalesce
    serial_ms: float
    full_status: str
    pop_status: str

    @property
    def censored(self):
        return self.full_status != Status.OPTIMAL.value or self.pop_status != Status.OPTIMAL.value


@dataclass
class SweepResult:
    rows: list
    slope: float                    # Log-log slope of full runtime vs variable count

    @property
    def pop_faster(self):
        """ POP-k beats the full solve at the largest size. """
        return bool(self.rows) and self.rows[-1].pop_ms < self.rows[-1].full_ms


def scaling_sweep(domain_name, sizes, k, seed=0, solver=None, limits=None, partitioner=None,
                  params=None, output=None):
    """ Full solve against POP-k over ascending instance sizes. Solves that
        hit a limit are kept as censored rows and left out of the slope fit.
    """
    if list(sizes) != sorted(sizes):
        raise ConfigError(f'Sweep sizes must be ascending, got {sizes}')
    domain = get_domain(domain_name)
    rows = []
    for size in sizes:
        instance = domain.generate(seed, **{**(params or {}), SIZE_PARAMS[domain.NAME]: size})
        try:
            _, result = solve_full(instance, solver, limits)
            full_ms, full_status = utils.ms(result.wall_clock), result.status.value
        except PopError as err:
            log.warning(f'Full solve at size {size}: {err}')
            full_ms, full_status = math.nan, 'Error'
        with utils.timer() as partitioning:
            plan = domain.partition(instance, k, partitioner, seed)
        try:
            _, stats = solve_pop(instance, plan, 1, solver, limits)
            pop_ms = utils.ms(partitioning.elapsed + stats.build_time + stats.max_time + stats.coalesce_time)
            serial_ms, pop_status = utils.ms(stats.total_time), stats.status.value
        except PopError as err:
            log.warning(f'POP-{k} at size {size}: {err}')
            pop_ms = serial_ms = math.nan
            pop_status = Status.INFEASIBLE.value
        rows.append(SweepRow(size, domain.variable_count(instance), full_ms, pop_ms, serial_ms, full_status,
            pop_status))
        log.info(f'Sweep size {size}: full {rows[-1].full_ms:.1f}ms, pop-{k} {pop_ms:.1f}ms')
    timed = [r for r in rows if r.full_status == Status.OPTIMAL.value and r.full_ms > 0]
    slope = math.nan
    if len({r.variables for r in timed}) >= 2:
        slope = float(np.polyfit(np.log([r.variables for r in timed]), np.log([r.full_ms for r in timed]), 1)[0])
    sweep = SweepResult(rows, slope)
    if rows and not sweep.pop_faster:
        log.warning(f'POP-{k} was not faster than the full solve at size {rows[-1].size}')
    if output:
        os.makedirs(output, exist_ok=True)
        columns = [f.name for f in fields(SweepRow)] + ['censored']
        table = [{**asdict(r), 'censored': str(r.censored).lower()} for r in rows]
        _write_csv(os.path.join(output, 'sweep.csv'), table, columns, f'slope: {slope:.4f}')
    return sweep


def sign_test(a, b):
    """ One-sided sign test p-value for 'a tends to exceed b' over paired
        samples; ties are dropped.
    """
    if len(a) != len(b):
        raise ConfigError('Sign test needs paired samples of equal length')
    wins = sum(x > y for x, y in zip(a, b))
    losses = sum(x < y for x, y in zip(a, b))
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, i) for i in range(wins, n + 1)) / 2 ** n
