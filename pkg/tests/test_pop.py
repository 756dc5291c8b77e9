# encoding: utf-8
import functools, pytest
import numpy as np
from popalloc import partition
from popalloc.basedomain import get_domain
from popalloc.exceptions import ConfigError, InfeasibleSubproblemError, InstanceError, PartitionError
from popalloc.partition import EntityFeatures, Resource
from popalloc.pop import AllocationMatrix, SolveStats, coalesce, solve_full, solve_pop
from popalloc.solver import MAX, Status

GENERATED = {
    'cluster': dict(num_jobs=12, num_types=3),
    'traffic': dict(num_nodes=10, num_edges=30, num_commodities=24),
    'loadbalance': dict(num_shards=6, num_servers=2, epsilon=0.3),
}
BOUND_PARAMS = {
    'cluster': dict(num_jobs=16, num_types=3),
    'traffic': dict(num_nodes=12, num_edges=36, num_commodities=60),
    'loadbalance': dict(num_shards=8, num_servers=4, epsilon=0.5),
}
# Skewed splits need k distinct groups: 3 priority classes, 4 current servers
BOUND_CASES = [(name, k, partitioner)
    for name, partitioners, ks in (
        ('cluster', ('random', 'stratified', 'clustered'), (2, 4, 8)),
        ('cluster', ('skewed',), (2,)),
        ('traffic', ('random', 'stratified', 'skewed'), (2, 4, 8)),
        ('loadbalance', ('random', 'stratified'), (2, 4)),
        ('loadbalance', ('skewed',), (2,)))
    for k in ks for partitioner in partitioners]
ENTITIES = [EntityFeatures(e, (1.0,)) for e in 'abcd']
RESOURCES = [Resource('r0', 4.0), Resource('r1', 2.0)]


def test_allocation_matrix():
    allocation = AllocationMatrix(['a', 'b'], ['r0'], [[1.0], [-1e-12]])
    assert allocation.values.min() == 0.0
    assert allocation.row('a').tolist() == [1.0]
    assert AllocationMatrix.from_dict(allocation.to_dict()).values.tolist() == [[1.0], [0.0]]
    with pytest.raises(InstanceError):
        AllocationMatrix(['a'], ['r0'], [[-0.5]])


def test_coalesce_k1_is_identity():
    plan = partition.build_plan(ENTITIES, RESOURCES, 1, [list('abcd')])
    sub = AllocationMatrix(list('abcd'), ['r0', 'r1'], np.arange(8.0).reshape(4, 2))
    assert coalesce([sub], plan).values.tolist() == sub.values.tolist()


def test_coalesce_disjoint_union():
    plan = partition.build_plan(ENTITIES, RESOURCES, 2, [['a', 'c'], ['b', 'd']])
    subs = [AllocationMatrix(['a', 'c'], ['r0', 'r1'], [[1, 2], [3, 4]]),
        AllocationMatrix(['d', 'b'], ['r0', 'r1'], [[7, 8], [5, 6]])]
    result = coalesce(subs, plan)
    assert result.row_ids == ('a', 'b', 'c', 'd')
    assert result.values.tolist() == [[1, 2], [5, 6], [3, 4], [7, 8]]


def test_coalesce_sums_replicated_rows():
    plan = partition.build_plan(ENTITIES, RESOURCES, 2, [['a', 'b'], ['a', 'c', 'd']])
    subs = [AllocationMatrix(['a', 'b'], ['r0'], [[0.2], [1.0]]),
        AllocationMatrix(['a', 'c', 'd'], ['r0'], [[0.3], [1.0], [1.0]])]
    result = coalesce(subs, plan, columns=['r0'])
    assert result.row('a')[0] == pytest.approx(0.5)


def test_coalesce_mismatch():
    plan = partition.build_plan(ENTITIES, RESOURCES, 2, [['a', 'c'], ['b', 'd']])
    good = AllocationMatrix(['a', 'c'], ['r0'], [[1], [1]])
    with pytest.raises(PartitionError):
        coalesce([good], plan)
    with pytest.raises(PartitionError):
        coalesce([good, AllocationMatrix(['b'], ['r0'], [[1]])], plan)
    with pytest.raises(PartitionError):
        coalesce([good, AllocationMatrix(['b', 'd'], ['r9'], [[1], [1]])], plan)


def test_solve_stats():
    stats = SolveStats(k=2, statuses=[Status.OPTIMAL, Status.GAP_LIMIT], sub_times=[0.5, 0.25])
    assert stats.max_time == 0.5
    assert stats.total_time == 0.75
    assert stats.status == Status.GAP_LIMIT
    assert SolveStats(k=1, statuses=[Status.OPTIMAL]).status == Status.OPTIMAL


@pytest.mark.parametrize('fixture', ['small_cluster', 'small_traffic', 'small_loadbalance'])
def test_k1_matches_full(fixture, request):
    instance = request.getfixturevalue(fixture)
    domain = get_domain(instance)
    plan = domain.partition(instance, 1, seed=0)
    allocation, stats = solve_pop(instance, plan)
    full, result = solve_full(instance)
    assert stats.status == Status.OPTIMAL
    assert result.status == Status.OPTIMAL
    assert domain.objective(instance, allocation) == pytest.approx(
        domain.objective(instance, full), abs=1e-6 * max(1.0, abs(result.objective)))
    assert domain.verify_feasible(instance, allocation).feasible


@pytest.mark.parametrize('seed', range(10))
@pytest.mark.parametrize('name', sorted(GENERATED))
def test_k1_matches_full_on_generated(name, seed):
    domain = get_domain(name)
    instance = domain.generate(seed, **GENERATED[name])
    plan = domain.partition(instance, 1, seed=seed)
    full, result = solve_full(instance)
    if result.status == Status.INFEASIBLE:
        with pytest.raises(InfeasibleSubproblemError):
            solve_pop(instance, plan)
        return
    allocation, stats = solve_pop(instance, plan)
    assert stats.status == result.status == Status.OPTIMAL
    assert domain.objective(instance, allocation) == pytest.approx(domain.objective(instance, full),
        rel=1e-6, abs=1e-6)


@functools.lru_cache(maxsize=None)
def _reference(name):
    instance = get_domain(name).generate(0, **BOUND_PARAMS[name])
    return instance, solve_full(instance)


@pytest.mark.filterwarnings('ignore::popalloc.exceptions.PopWarning')
@pytest.mark.parametrize('name, k, partitioner', BOUND_CASES)
def test_pop_never_beats_full(name, k, partitioner):
    domain = get_domain(name)
    instance, (_, result) = _reference(name)
    if result.status != Status.OPTIMAL:
        pytest.skip(f'Reference {name} instance ended {result.status.value}')
    plan = domain.partition(instance, k, partitioner, seed=k)
    try:
        allocation, _ = solve_pop(instance, plan)
    except InfeasibleSubproblemError:
        # Disjoint server splits are the only ones that can strand a sub-problem
        assert name == 'loadbalance'
        return
    assert domain.verify_feasible(instance, allocation).feasible
    value, tol = domain.objective(instance, allocation), 1e-6 * max(1.0, abs(result.objective))
    if domain.SENSE == MAX:
        assert value <= result.objective + tol
    else:
        assert value >= result.objective - tol


def test_parallel_matches_serial(small_cluster):
    domain = get_domain(small_cluster)
    plan = domain.partition(small_cluster, 3, 'random', seed=2)
    serial, _ = solve_pop(small_cluster, plan, parallelism=1)
    parallel, stats = solve_pop(small_cluster, plan, parallelism=3)
    assert np.array_equal(serial.values, parallel.values)
    assert len(stats.sub_times) == 3
    assert stats.max_time <= stats.total_time


def test_pop_stats(small_traffic):
    domain = get_domain(small_traffic)
    plan = domain.partition(small_traffic, 4, 'random', seed=0)
    allocation, stats = solve_pop(small_traffic, plan)
    assert stats.k == 4
    assert sum(stats.sub_variables) == domain.variable_count(small_traffic)
    assert allocation.row_ids == small_traffic.commodity_ids


def test_unknown_domain():
    with pytest.raises(ConfigError):
        get_domain('weather')
