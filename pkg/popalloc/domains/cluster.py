# encoding: utf-8
"""
Heterogeneity-aware max-min fair cluster scheduling. Jobs receive a time
fraction X[m, j] on every accelerator type j; the policy maximizes the
smallest priority-weighted throughput normalized by each job's equal share
of the cluster.
"""
import logging
import numpy as np
from dataclasses import dataclass, field, replace
from typing import ClassVar
from .. import utils
from ..basedomain import BaseDomain, FeasibilityReport, register
from ..exceptions import InstanceError
from ..partition import EntityFeatures, Resource
from ..pop import AllocationMatrix
from ..solver import LE, MAX, LinearProgram, MaxMinTerm
from ..solver.maxmin import epigraph
log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6
TYPE_NAMES = ('v100', 'p100', 'k80')
PRIORITIES = (1, 2, 4)
GPU_REQUESTS = (1, 2, 4, 8)
THROUGHPUT_RANGE = (0.2, 5.0)
INFEASIBLE_HINT = 'an idle sub-cluster is always feasible; look for negative worker counts or job time budgets'


@dataclass(frozen=True)
class Job:
    job_id: str
    priority: float             # w_m
    gpu_request: int            # z_m
    throughputs: tuple          # T_mj per resource type
    share: float = 1.0          # Time budget; below 1 for replicated jobs in a sub-cluster

    def __post_init__(self):
        if not self.priority > 0:
            raise InstanceError(f'Job {self.job_id} needs a positive priority')
        if self.gpu_request < 1:
            raise InstanceError(f'Job {self.job_id} needs at least one GPU')
        if any(t < 0 for t in self.throughputs) or not any(t > 0 for t in self.throughputs):
            raise InstanceError(f'Job {self.job_id} needs nonnegative throughputs, one positive')


@dataclass(frozen=True)
class ClusterSpec:
    types: tuple
    num_workers: tuple          # Fractional in sub-clusters

    def __post_init__(self):
        if len(self.types) != len(self.num_workers):
            raise InstanceError('Cluster types and worker counts differ in length')
        if any(w < 0 for w in self.num_workers) or not any(w > 0 for w in self.num_workers):
            raise InstanceError('Cluster worker counts must be nonnegative with one positive')


@dataclass
class ClusterInstance:
    DOMAIN: ClassVar[str] = 'cluster'
    jobs: tuple
    cluster: ClusterSpec
    equal_share: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.jobs = tuple(self.jobs)
        if not self.jobs:
            raise InstanceError('Cluster instance has no jobs')
        for job in self.jobs:
            if len(job.throughputs) != len(self.cluster.types):
                raise InstanceError(f'Job {job.job_id} has {len(job.throughputs)} throughputs '
                    f'for {len(self.cluster.types)} types')
        self.equal_share = equal_share(self.jobs, self.cluster)

    def __str__(self):
        return f'<ClusterInstance:jobs={len(self.jobs)} workers={sum(self.cluster.num_workers):g}>'

    @property
    def job_ids(self):
        return tuple(job.job_id for job in self.jobs)

    @property
    def throughputs(self):
        return np.array([job.throughputs for job in self.jobs], dtype=float)

    def to_dict(self):
        jobs = []
        for job in self.jobs:
            item = {'id': job.job_id, 'w': job.priority, 'z': job.gpu_request, 'T': list(job.throughputs)}
            if job.share != 1.0:
                item['share'] = job.share
            jobs.append(item)
        cluster = {'types': list(self.cluster.types), 'num_workers': list(self.cluster.num_workers)}
        return {'domain': self.DOMAIN, 'jobs': jobs, 'cluster': cluster}

    @classmethod
    def from_dict(cls, data):
        try:
            jobs = [Job(str(job['id']), float(job['w']), int(job['z']), tuple(float(t) for t in job['T']),
                float(job.get('share', 1.0))) for job in data['jobs']]
            cluster = ClusterSpec(tuple(data['cluster']['types']),
                tuple(float(w) for w in data['cluster']['num_workers']))
        except (KeyError, TypeError, ValueError) as err:
            raise InstanceError(f'Malformed cluster instance: {err}')
        return cls(jobs, cluster)


def equal_share(jobs, cluster):
    """ X^equal[m, j] = min(1, num_workers_j / (n * z_m)), scaled down per job
        so the row sum stays within the job's time budget.
    """
    workers = np.asarray(cluster.num_workers, dtype=float)
    z = np.array([job.gpu_request for job in jobs], dtype=float)
    budget = np.array([job.share for job in jobs], dtype=float)
    xeq = np.minimum(1.0, workers[None, :] / (len(jobs) * z[:, None]))
    rowsum = xeq.sum(axis=1)
    scale = np.where(rowsum > budget, budget / np.where(rowsum > 0, rowsum, 1.0), 1.0)
    return xeq * scale[:, None]


def _var(m, j, num_types):
    return m * num_types + j


def max_min_program(instance):
    """ The allocation LP (bounds and capacity rows) plus one max-min term per
        job; the epigraph is added by the solver layer.
    """
    jobs, types = instance.jobs, instance.cluster.types
    T = instance.throughputs
    normalizers = (T * instance.equal_share).sum(axis=1)
    lp = LinearProgram(sense=MAX)
    for job in jobs:
        for name in types:
            lp.add_variable(f'X[{job.job_id},{name}]', lower=0.0, upper=1.0)
    terms = []
    for m, job in enumerate(jobs):
        if not normalizers[m] > 0:
            raise InstanceError(f'Job {job.job_id} has zero throughput on its equal share; normalizer undefined')
        coeffs = {_var(m, j, len(types)): job.gpu_request * T[m, j] / job.priority
            for j in range(len(types)) if T[m, j] > 0}
        terms.append(MaxMinTerm(coeffs, float(normalizers[m])))
        lp.add_constraint({_var(m, j, len(types)): 1.0 for j in range(len(types))}, LE, job.share,
            name=f'time[{job.job_id}]')
    for j, name in enumerate(types):
        coeffs = {_var(m, j, len(types)): float(job.gpu_request) for m, job in enumerate(jobs)}
        lp.add_constraint(coeffs, LE, instance.cluster.num_workers[j], name=f'workers[{name}]')
    return lp, terms


def build_lp(instance):
    """ Epigraph-form LP: n*m allocation variables plus the max-min variable t. """
    program, _ = epigraph(*max_min_program(instance))
    return program


def normalized_throughputs(instance, allocation):
    """ Per-job (z_m / w_m) * throughput(m, X) / throughput(m, X^equal). """
    X = allocation.values
    T = instance.throughputs
    normalizers = (T * instance.equal_share).sum(axis=1)
    weights = np.array([job.gpu_request / job.priority for job in instance.jobs])
    return weights * (T * X).sum(axis=1) / normalizers


def allocation_quality(instance, allocation):
    """ Max-min objective next to the distribution of normalized throughputs. """
    values = normalized_throughputs(instance, allocation)
    return {'min': float(values.min()), 'mean': float(values.mean()),
        'std': float(values.std()), 'median': float(np.median(values))}


def make_sub_instance(instance, plan, sub_index):
    """ Assigned jobs (replicated ones with a reduced time budget) on a
        sub-cluster holding the plan's share of every worker type.
    """
    members = set(plan.members(sub_index))
    jobs = [replace(job, share=job.share * plan.weight(job.job_id, sub_index))
        for job in instance.jobs if job.job_id in members]
    if not jobs:
        raise InstanceError(f'Sub-problem {sub_index} has no jobs')
    shares = dict(zip(plan.resource_ids, plan.resource_shares[sub_index]))
    workers = tuple(float(shares[name]) for name in instance.cluster.types)
    return ClusterInstance(jobs, ClusterSpec(instance.cluster.types, workers))


def verify_feasible(instance, allocation, tol=FEASIBILITY_TOL):
    """ Check 0 <= X <= 1, per-job time budgets and per-type worker capacity. """
    X = allocation.values
    if X.shape != (len(instance.jobs), len(instance.cluster.types)):
        raise InstanceError(f'Allocation shape {X.shape} does not match the instance')
    report = FeasibilityReport(tol)
    for m, job in enumerate(instance.jobs):
        report.check('bounds', job.job_id, X[m].max() - 1.0)
        report.check('time', job.job_id, X[m].sum() - job.share)
    z = np.array([job.gpu_request for job in instance.jobs], dtype=float)
    for j, name in enumerate(instance.cluster.types):
        capacity = instance.cluster.num_workers[j]
        report.check('workers', name, float(z @ X[:, j]) - capacity, capacity)
    return report


def greedy_baseline(instance):
    """ Jobs by priority (descending, ties in job order) each take their best
        throughput type with free workers; one type per job.
    """
    remaining = np.array(instance.cluster.num_workers, dtype=float)
    X = np.zeros((len(instance.jobs), len(instance.cluster.types)))
    order = sorted(range(len(instance.jobs)), key=lambda m: -instance.jobs[m].priority)
    for m in order:
        job = instance.jobs[m]
        for j in sorted(range(len(remaining)), key=lambda j: -job.throughputs[j]):
            if job.throughputs[j] > 0 and remaining[j] > 1e-12:
                X[m, j] = min(job.share, remaining[j] / job.gpu_request)
                remaining[j] -= X[m, j] * job.gpu_request
                break
    return AllocationMatrix(instance.job_ids, instance.cluster.types, X)


def generate_instance(seed, num_jobs=48, num_types=3, num_workers=None):
    """ Seeded instance; throughputs log-uniform, priorities in {1,2,4} and
        GPU requests in {1,2,4,8}. Default worker count leaves the cluster
        contended (about 2.5 GPUs per job in total).
    """
    rand = utils.rng(seed)
    types = TYPE_NAMES[:num_types] if num_types <= len(TYPE_NAMES) else tuple(f'type{j}' for j in range(num_types))
    if num_workers is None:
        num_workers = max(1, round(num_jobs * 2.5 / num_types))
    low, high = np.log(THROUGHPUT_RANGE[0]), np.log(THROUGHPUT_RANGE[1])
    jobs = []
    for m in range(num_jobs):
        throughputs = tuple(float(t) for t in np.exp(rand.uniform(low, high, size=num_types)))
        jobs.append(Job(f'job{m}', float(rand.choice(PRIORITIES)), int(rand.choice(GPU_REQUESTS)), throughputs))
    return ClusterInstance(jobs, ClusterSpec(tuple(types), tuple(float(num_workers) for _ in types)))


@register
class ClusterDomain(BaseDomain):
    NAME = 'cluster'
    SENSE = MAX
    LOAD_FEATURE = 1            # GPU request
    GROUP_FEATURE = 0           # Priority class
    STRATA_FEATURES = (0, 1)
    INFEASIBLE_HINT = INFEASIBLE_HINT

    def entities(self, instance):
        return [EntityFeatures(job.job_id, (job.priority, float(job.gpu_request), *job.throughputs))
            for job in instance.jobs]

    def resources(self, instance):
        return [Resource(name, workers, pooled=True)
            for name, workers in zip(instance.cluster.types, instance.cluster.num_workers)]

    def variable_count(self, instance):
        return len(instance.jobs) * len(instance.cluster.types) + 1

    def build_program(self, instance):
        return build_lp(instance)

    def solve(self, instance, solver, limits=None):
        lp, terms = max_min_program(instance)
        result = solver.solve_max_min(lp, terms, limits)
        if not result.has_solution:
            return None, result
        X = np.asarray(result.primal).reshape(len(instance.jobs), len(instance.cluster.types))
        return AllocationMatrix(instance.job_ids, instance.cluster.types, np.clip(X, 0.0, 1.0)), result

    def make_sub_instance(self, instance, plan, sub_index):
        return make_sub_instance(instance, plan, sub_index)

    def verify_feasible(self, instance, allocation):
        return verify_feasible(instance, allocation)

    def objective(self, instance, allocation):
        return float(normalized_throughputs(instance, allocation).min())

    def quality(self, instance, allocation):
        return allocation_quality(instance, allocation)

    def baseline(self, instance, seed=0):
        return greedy_baseline(instance)

    def generate(self, seed, num_jobs=48, num_types=3, num_workers=None):
        return generate_instance(seed, num_jobs, num_types, num_workers)

    def from_dict(self, data):
        return ClusterInstance.from_dict(data)
