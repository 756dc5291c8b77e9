# encoding: utf-8
"""
POP driver: cut an instance into k sub-instances with a PartitionPlan, solve
them independently (optionally in worker processes) and coalesce the
sub-allocations back into one allocation for the original instance.
"""
import logging
import numpy as np
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from . import utils
from .basedomain import get_domain
from .exceptions import InfeasibleSubproblemError, InstanceError, PartitionError, SolverError
from .solver import get_solver
from .solver.program import FEAS_TOL, Status
log = logging.getLogger(__name__)


@dataclass
class AllocationMatrix:
    """ Nonnegative allocation of row entities over column resources. """
    row_ids: tuple
    col_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        self.row_ids = tuple(self.row_ids)
        self.col_ids = tuple(self.col_ids)
        self.values = np.array(self.values, dtype=float).reshape(len(self.row_ids), len(self.col_ids))
        if (self.values < -FEAS_TOL * max(1.0, np.abs(self.values).max(initial=0.0))).any():
            raise InstanceError('Allocation values must be nonnegative')
        self.values = np.maximum(self.values, 0.0)
        self._rows = {r: i for i, r in enumerate(self.row_ids)}

    def __str__(self):
        return f'<AllocationMatrix:{len(self.row_ids)}x{len(self.col_ids)}>'

    @classmethod
    def zeros(cls, row_ids, col_ids):
        return cls(row_ids, col_ids, np.zeros((len(row_ids), len(col_ids))))

    def row(self, row_id):
        return self.values[self._rows[row_id]]

    def to_dict(self):
        return {'rows': list(self.row_ids), 'columns': list(self.col_ids), 'values': self.values.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data['rows'], data['columns'], data['values'])


@dataclass
class SolveStats:
    """ Timing and size of one POP (or full) solve. Times in seconds. """
    k: int
    statuses: list = field(default_factory=list)
    sub_times: list = field(default_factory=list)
    sub_variables: list = field(default_factory=list)
    sub_objectives: list = field(default_factory=list)
    build_time: float = 0.0
    solve_time: float = 0.0         # Wall clock of the (possibly parallel) solve step
    coalesce_time: float = 0.0

    def __str__(self):
        return f'<SolveStats:k={self.k} max={utils.ms(self.max_time):.1f}ms total={utils.ms(self.total_time):.1f}ms>'

    @property
    def max_time(self):
        """ Slowest sub-problem; the ideal parallel runtime. """
        return max(self.sub_times, default=0.0)

    @property
    def total_time(self):
        """ Serial runtime: every sub-problem one after another. """
        return sum(self.sub_times)

    @property
    def status(self):
        """ Worst sub-problem status; Optimal only if all are. """
        for status in (Status.INFEASIBLE, Status.UNBOUNDED, Status.ITERATION_LIMIT, Status.GAP_LIMIT):
            if status in self.statuses:
                return status
        return Status.OPTIMAL


def coalesce(sub_allocations, plan, columns=None):
    """ Combine per sub-problem allocations into one allocation over the
        plan's entities. Rows of disjoint entities are copied; rows of
        replicated entities are summed over the sub-problems holding them.
    """
    if len(sub_allocations) != plan.k:
        raise PartitionError(f'Expected {plan.k} sub-allocations, got {len(sub_allocations)}')
    columns = tuple(plan.resource_ids if columns is None else columns)
    colpos = {c: j for j, c in enumerate(columns)}
    rowpos = {e: i for i, e in enumerate(plan.entity_ids)}
    values = np.zeros((len(plan.entity_ids), len(columns)))
    for s, sub in enumerate(sub_allocations):
        if set(sub.row_ids) != set(plan.members(s)):
            raise PartitionError(f'Sub-allocation {s} rows do not match the plan members')
        unknown = [c for c in sub.col_ids if c not in colpos]
        if unknown:
            raise PartitionError(f'Sub-allocation {s} has unknown columns {unknown[:3]}')
        rows = [rowpos[r] for r in sub.row_ids]
        cols = [colpos[c] for c in sub.col_ids]
        values[np.ix_(rows, cols)] += sub.values
    return AllocationMatrix(plan.entity_ids, columns, values)


def _solve_sub(job):
    """ Worker entry point; module level so it pickles into a process pool. """
    index, domain_name, sub_instance, solver_name, limits = job
    domain = get_domain(domain_name)
    with utils.timer() as elapsed:
        allocation, result = domain.solve(sub_instance, get_solver(solver_name), limits)
    return index, allocation, result, elapsed.elapsed, domain.variable_count(sub_instance)


def solve_pop(instance, plan, parallelism=1, solver=None, limits=None):
    """ Solve every sub-problem of plan and coalesce. Returns
        (AllocationMatrix, SolveStats). With parallelism > 1 sub-problems run
        in a process pool; results are collected by sub-problem index so the
        outcome does not depend on completion order.
    """
    domain = get_domain(instance)
    plan.validate()
    solver_name = getattr(solver, 'NAME', solver)
    stats = SolveStats(k=plan.k)
    with utils.timer() as build:
        subs = [domain.make_sub_instance(instance, plan, s) for s in range(plan.k)]
    stats.build_time = build.elapsed
    jobs = [(s, domain.NAME, sub, solver_name, limits) for s, sub in enumerate(subs)]
    with utils.timer() as solving:
        if parallelism > 1 and plan.k > 1:
            with ProcessPoolExecutor(max_workers=min(parallelism, plan.k)) as pool:
                outcomes = list(pool.map(_solve_sub, jobs))
        else:
            outcomes = [_solve_sub(job) for job in jobs]
    stats.solve_time = solving.elapsed
    outcomes = {outcome[0]: outcome for outcome in outcomes}
    allocations = []
    for s in range(plan.k):
        _, allocation, result, elapsed, variables = outcomes[s]
        log.debug(f'Sub-problem {s}: {result} in {utils.ms(elapsed):.1f}ms')
        stats.statuses.append(result.status)
        stats.sub_times.append(elapsed)
        stats.sub_variables.append(variables)
        stats.sub_objectives.append(result.objective)
        if result.status == Status.INFEASIBLE:
            raise InfeasibleSubproblemError(s, domain.INFEASIBLE_HINT)
        if allocation is None:
            raise SolverError(f'Sub-problem {s} ended with {result.status.value} and no solution')
        allocations.append(allocation)
    with utils.timer() as joining:
        allocation = coalesce(allocations, plan, domain.columns(instance))
    stats.coalesce_time = joining.elapsed
    log.info(f'POP k={plan.k} solved: {stats}')
    return allocation, stats


def solve_full(instance, solver=None, limits=None):
    """ Solve the original instance as one program; the k=1 reference.
        Returns (AllocationMatrix or None, SolveResult); the result's
        wall_clock covers program construction and solve.
    """
    domain = get_domain(instance)
    with utils.timer() as elapsed:
        allocation, result = domain.solve(instance, get_solver(solver), limits)
    result.wall_clock = elapsed.elapsed
    log.info(f'Full solve: {result} in {utils.ms(elapsed.elapsed):.1f}ms')
    return allocation, result
