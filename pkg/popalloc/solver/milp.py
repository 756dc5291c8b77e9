# encoding: utf-8
import heapq, itertools, logging, math, time
import numpy as np
from .program import INT_TOL, MIN, SolveResult, SolverLimits, Status
from .simplex import solve_lp
log = logging.getLogger(__name__)


def solve_milp(mip, limits=None, lp_solver=solve_lp):
    """ Best-first branch and bound over LP relaxations. Branches on the most
        fractional integer variable. Returns Optimal once the incumbent is
        within limits.gap of the best open bound, GapLimit with the incumbent
        when the node cap or time limit is hit first or when a subtree's
        relaxation stopped short of a verdict.
    """
    mip.validate()
    limits = limits or SolverLimits()
    started = time.perf_counter()
    deadline = started + limits.time_limit
    lp = mip.lp
    sign = 1.0 if lp.sense == MIN else -1.0     # Search minimizes sign * objective
    integers = np.array(sorted(mip.integers), dtype=int)
    counter = itertools.count()
    incumbent, incumbent_key = None, math.inf
    unresolved = math.inf           # Best parent bound of subtrees whose relaxation did not finish
    iterations, nodes = 0, 0
    # Root relaxation
    root = lp_solver(lp, limits)
    iterations += root.iterations
    if root.status in (Status.INFEASIBLE, Status.UNBOUNDED):
        return _finish(root.status, None, math.nan, math.nan, iterations, nodes, started)
    if root.status != Status.OPTIMAL:
        return _finish(Status.ITERATION_LIMIT, None, math.nan, math.nan, iterations, nodes, started)
    heap = [(sign * root.objective, next(counter), list(lp.lower), list(lp.upper), root)]
    while heap:
        bound_key = min(heap[0][0], unresolved)
        if incumbent is not None and _closed(incumbent_key, bound_key, limits.gap):
            return _finish(Status.OPTIMAL, incumbent, sign * incumbent_key, sign * bound_key,
                iterations, nodes, started, lp)
        if nodes >= limits.node_cap or time.perf_counter() > deadline:
            log.debug(f'Branch and bound stopped after {nodes} nodes')
            return _finish(Status.GAP_LIMIT, incumbent, sign * incumbent_key, sign * bound_key,
                iterations, nodes, started, lp)
        key, _, lower, upper, result = heapq.heappop(heap)
        if result is None:
            nodes += 1
            result = lp_solver(lp.with_bounds(lower, upper), limits)
            iterations += result.iterations
            if result.status == Status.INFEASIBLE:
                continue
            if result.status != Status.OPTIMAL:
                log.debug(f'Node {nodes} relaxation ended {result.status.value}; subtree left open')
                if key < incumbent_key:
                    unresolved = min(unresolved, key)
                continue
            key = sign * result.objective
            if key >= incumbent_key - 1e-12:
                continue
        branch = _most_fractional(result.primal, integers)
        if branch is None:
            incumbent, incumbent_key = _rounded(result.primal, integers), key
            log.debug(f'New incumbent {result.objective:.6g} at node {nodes}')
            continue
        value = result.primal[branch]
        down_upper = list(upper)
        down_upper[branch] = math.floor(value)
        up_lower = list(lower)
        up_lower[branch] = math.ceil(value)
        # Children are pushed with the parent's bound and solved when popped
        heapq.heappush(heap, (key, next(counter), lower, down_upper, None))
        heapq.heappush(heap, (key, next(counter), up_lower, upper, None))
    open_gap = incumbent is None or not _closed(incumbent_key, unresolved, limits.gap)
    if unresolved < incumbent_key and open_gap:
        return _finish(Status.GAP_LIMIT, incumbent, sign * incumbent_key, sign * unresolved,
            iterations, nodes, started, lp)
    if incumbent is None:
        return _finish(Status.INFEASIBLE, None, math.nan, math.nan, iterations, nodes, started)
    return _finish(Status.OPTIMAL, incumbent, sign * incumbent_key, sign * incumbent_key,
        iterations, nodes, started, lp)


def _closed(incumbent_key, bound_key, gap):
    return incumbent_key - bound_key <= max(gap * abs(bound_key), 1e-9)


def _most_fractional(x, integers):
    """ Integer variable whose value is farthest from integral, or None. """
    if not len(integers):
        return None
    values = x[integers]
    distance = np.abs(values - np.round(values))
    best = int(np.argmax(distance))
    if distance[best] <= INT_TOL:
        return None
    return int(integers[best])


def _rounded(x, integers):
    x = x.copy()
    x[integers] = np.round(x[integers])
    return x


def _finish(status, primal, objective, bound, iterations, nodes, started, lp=None):
    if primal is None:
        objective = math.nan
    elif lp is not None:
        objective = lp.value(primal)
    return SolveResult(status, objective=objective, primal=primal, iterations=iterations,
        nodes=nodes, wall_clock=time.perf_counter() - started, bound=bound)
