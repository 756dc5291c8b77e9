# encoding: utf-8
import itertools, pytest
import numpy as np
from popalloc import partition
from popalloc.basedomain import get_domain
from popalloc.domains import loadbalance
from popalloc.domains.loadbalance import LoadBalanceInstance, PlacementState, ShardMap
from popalloc.exceptions import InfeasibleSubproblemError, InstanceError, PartitionError, PopWarning
from popalloc.partition import SplitStrategy
from popalloc.pop import AllocationMatrix, solve_full, solve_pop
from popalloc.solver import Status, get_solver, solve_lp
from tests.conftest import lb_instance

DOMAIN = loadbalance.LoadBalanceDomain()


def _identity_map(instance):
    return ShardMap(instance.shard_ids, instance.server_ids, instance.state.t.copy(), instance.state.t.copy())


def _plan(instance, buckets):
    return partition.build_plan(DOMAIN.entities(instance), DOMAIN.resources(instance), len(buckets), buckets,
        SplitStrategy.DISJOINT_PARTITION)


def _enumerate(instance):
    """ Cheapest placement over every r' pattern, each with its continuous r solved. """
    program = loadbalance.build_milp(instance.shards, instance.servers, instance.state)
    lp, nm = program.lp, len(instance.shards) * len(instance.servers)
    best = None
    for pattern in itertools.product([0.0, 1.0], repeat=nm):
        fixed = lp.with_bounds(lp.lower[:nm] + list(pattern), lp.upper[:nm] + list(pattern))
        result = solve_lp(fixed)
        if result.status == Status.OPTIMAL and (best is None or result.objective < best):
            best = result.objective
    return best


def test_balanced_needs_no_movement():
    instance = lb_instance(loads=[3, 3], memories=[1, 1], capacities=[5, 5], placement=[0, 1], epsilon=0.0)
    allocation, result = DOMAIN.solve(instance, get_solver())
    assert result.objective == pytest.approx(0.0)
    assert DOMAIN.objective(instance, allocation) == 0.0


def test_cheapest_shard_moves(small_loadbalance):
    allocation, result = DOMAIN.solve(small_loadbalance, get_solver())
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(1.0)
    assert DOMAIN.objective(small_loadbalance, allocation) == pytest.approx(1.0)
    assert allocation.row('a')[1] > 0
    assert allocation.row('b')[1] == pytest.approx(0.0, abs=1e-9)
    assert DOMAIN.verify_feasible(small_loadbalance, allocation).feasible
    assert _enumerate(small_loadbalance) == pytest.approx(1.0)


@pytest.mark.parametrize('seed', range(10))
def test_matches_enumeration(seed):
    instance = loadbalance.generate_instance(seed, num_shards=3, num_servers=2, epsilon=0.3)
    expected = _enumerate(instance)
    allocation, result = DOMAIN.solve(instance, get_solver())
    if expected is None:
        assert result.status == Status.INFEASIBLE
        return
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(expected, rel=1e-5, abs=1e-6)
    assert DOMAIN.verify_feasible(instance, allocation).feasible


def test_highs_agrees():
    pytest.importorskip('scipy')
    for seed in range(3):
        instance = loadbalance.generate_instance(seed, num_shards=4, num_servers=2, epsilon=0.3)
        program = DOMAIN.build_program(instance)
        embedded = get_solver('embedded').solve(program)
        highs = get_solver('highs').solve(program)
        assert embedded.status == highs.status
        if embedded.status == Status.OPTIMAL:
            assert embedded.objective == pytest.approx(highs.objective, abs=1e-6)


def test_memory_precheck():
    instance = lb_instance(loads=[1, 1], memories=[6, 6], capacities=[5, 5], placement=[0, 1], epsilon=1.0)
    with pytest.raises(InstanceError):
        loadbalance.build_milp(instance.shards, instance.servers, instance.state)
    allocation, result = DOMAIN.solve(instance, get_solver())
    assert allocation is None
    assert result.status == Status.INFEASIBLE


def test_verify_feasible(small_loadbalance):
    balanced = lb_instance(loads=[3, 3], memories=[1, 1], capacities=[5, 5], placement=[0, 1], epsilon=0.0)
    assert DOMAIN.verify_feasible(balanced, _identity_map(balanced)).feasible
    report = DOMAIN.verify_feasible(small_loadbalance, _identity_map(small_loadbalance))
    assert {'load_high', 'load_low'} <= {v.family for v in report.violations}
    r = balanced.state.t.copy()
    r[0, 0] = 0.9
    report = loadbalance.verify_feasible(balanced, AllocationMatrix(balanced.shard_ids, balanced.server_ids, r))
    assert 'serve' in {v.family for v in report.violations}


def test_sub_instance_k1(small_loadbalance):
    plan = DOMAIN.partition(small_loadbalance, 1, seed=0)
    sub = DOMAIN.make_sub_instance(small_loadbalance, plan, 0)
    assert sub.shards == small_loadbalance.shards
    assert sub.servers == small_loadbalance.servers
    assert sub.state.window == pytest.approx(small_loadbalance.state.window)
    assert np.array_equal(sub.state.t, small_loadbalance.state.t)


def test_sub_instance_equal_load_split(small_loadbalance):
    plan = _plan(small_loadbalance, [['a', 'c'], ['b', 'd']])
    subs = [DOMAIN.make_sub_instance(small_loadbalance, plan, s) for s in range(2)]
    assert [sub.state.load_target for sub in subs] == [6.0, 6.0]
    assert [sub.server_ids for sub in subs] == [('s0',), ('s1',)]
    # c sits on s1 today, which belongs to the other sub-problem
    assert subs[0].state.t.tolist() == [[1.0], [0.0]]
    assert not subs[0].notes


def test_sub_instance_warns_on_load_skew(small_loadbalance):
    plan = _plan(small_loadbalance, [['a', 'b'], ['c', 'd']])
    with pytest.warns(PopWarning):
        sub = DOMAIN.make_sub_instance(small_loadbalance, plan, 0)
    assert sub.state.load_target == 8.0
    assert sub.notes
    low, high = sub.state.window
    assert low > high


def test_sub_instance_needs_disjoint_plan(small_loadbalance):
    plan = DOMAIN.partition(small_loadbalance, 2, 'random', seed=0, strategy=SplitStrategy.CAPACITY_SPLIT)
    with pytest.raises(PartitionError):
        DOMAIN.make_sub_instance(small_loadbalance, plan, 0)


def test_pop_cost_not_below_full(small_loadbalance):
    plan = _plan(small_loadbalance, [['a', 'c'], ['b', 'd']])
    allocation, stats = solve_pop(small_loadbalance, plan)
    full, result = solve_full(small_loadbalance)
    assert stats.status == Status.OPTIMAL
    assert DOMAIN.verify_feasible(small_loadbalance, allocation).feasible
    # c moves onto s0 and b onto s1
    assert DOMAIN.objective(small_loadbalance, allocation) == pytest.approx(3.0)
    assert DOMAIN.objective(small_loadbalance, allocation) >= result.objective - 1e-9


def _hot_shard_instance():
    # H carries half the load; no server can hold H next to another shard
    return lb_instance(loads=[12, 3, 3, 3, 3], memories=[7, 6, 6, 6, 6], capacities=[12, 12, 12, 12],
        placement=[0, 2, 2, 1, 3], epsilon=0.5)


def test_hot_shard_needs_replication():
    instance = _hot_shard_instance()
    entities = DOMAIN.entities(instance)
    plan = _plan(instance, [['a', 'b', 'c'], ['d', 'e']])
    with pytest.warns(PopWarning):
        with pytest.raises(InfeasibleSubproblemError) as err:
            solve_pop(instance, plan)
    assert err.value.sub_index == 0
    assert 'replication' in str(err.value)
    replicated = partition.replicate_hot(plan, entities, 2.0)
    assert replicated.replicated == ['a']
    allocation, stats = solve_pop(instance, replicated)
    assert stats.status == Status.OPTIMAL
    assert allocation.row('a').sum() == pytest.approx(1.0)
    assert DOMAIN.verify_feasible(instance, allocation).feasible


def test_greedy_balanced_is_a_no_op():
    instance = lb_instance(loads=[3, 3], memories=[1, 1], capacities=[5, 5], placement=[0, 1], epsilon=0.1)
    shard_map = loadbalance.greedy_baseline(instance.shards, instance.servers, instance.state)
    assert shard_map.moves == 0
    assert shard_map.balanced


def test_greedy_moves_hottest_shard():
    instance = lb_instance(loads=[6, 4, 2], memories=[1, 1, 1], capacities=[100, 100], placement=[0, 0, 1],
        epsilon=0.5)
    shard_map = loadbalance.greedy_baseline(instance.shards, instance.servers, instance.state)
    assert shard_map.r[0].tolist() == [0.0, 1.0]
    assert shard_map.balanced
    assert shard_map.moves == 2
    assert DOMAIN.verify_feasible(instance, shard_map.allocation).feasible
    _, result = solve_full(instance)
    assert DOMAIN.objective(instance, shard_map.allocation) >= result.objective - 1e-9


def test_greedy_reports_unbalanced(small_loadbalance):
    shard_map = loadbalance.greedy_baseline(small_loadbalance.shards, small_loadbalance.servers,
        small_loadbalance.state)
    assert not shard_map.balanced


def test_round_placement(small_loadbalance):
    allocation, _ = solve_full(small_loadbalance)
    shard_map, report = loadbalance.round_placement(small_loadbalance, allocation)
    assert shard_map.r.sum(axis=1).tolist() == [1.0] * 4
    assert shard_map.indicator.sum(axis=1).tolist() == [1.0] * 4
    assert not report.feasible


def test_instance_dict(small_loadbalance, tmp_path):
    path = str(tmp_path / 'lb.json')
    DOMAIN.save(small_loadbalance, path)
    loaded = DOMAIN.load(path)
    assert loaded.shards == small_loadbalance.shards
    assert np.array_equal(loaded.state.t, small_loadbalance.state.t)
    assert loaded.state.epsilon == small_loadbalance.state.epsilon
    data = small_loadbalance.to_dict()
    data['placement'] = data['placement'][1:]
    with pytest.raises(InstanceError):
        LoadBalanceInstance.from_dict(data)


def test_placement_state_validation():
    with pytest.raises(InstanceError):
        PlacementState(np.array([[0.5]]), 1.0, 0.1)
    with pytest.raises(InstanceError):
        PlacementState(np.array([[1.0]]), 1.0, -0.1)


def test_generate_is_seeded():
    a = loadbalance.generate_instance(seed=2, num_shards=12, num_servers=4)
    b = get_domain('loadbalance').generate(2, num_shards=12, num_servers=4)
    assert a.shards == b.shards
    assert a.state.t.sum(axis=1).tolist() == [1.0] * 12
    assert a.state.epsilon == pytest.approx(0.05 * a.state.load_target)


def _feasible_subproblems(instance, plan):
    count = 0
    for s in range(plan.k):
        allocation, _ = DOMAIN.solve(DOMAIN.make_sub_instance(instance, plan, s), get_solver())
        count += allocation is not None
    return count


@pytest.mark.filterwarnings('ignore::popalloc.exceptions.PopWarning')
def test_stratified_split_keeps_more_subproblems_feasible():
    counts = {'random': 0, 'stratified': 0}
    for seed in range(20):
        instance = loadbalance.generate_instance(seed, num_shards=12, num_servers=4, epsilon=0.3)
        for partitioner in counts:
            counts[partitioner] += _feasible_subproblems(instance, DOMAIN.partition(instance, 2, partitioner, seed))
    assert counts['stratified'] >= counts['random']
    assert counts['stratified'] > 0
