# encoding: utf-8
import itertools, pytest
import numpy as np
from dataclasses import replace
from popalloc.exceptions import SolverError
from popalloc.solver import EQ, LE, MAX, MIN, LinearProgram, MixedIntegerProgram
from popalloc.solver import SolverLimits, Status, get_solver, solve_lp, solve_milp


def _binary_program(sense, objective, rows):
    lp = LinearProgram(sense=sense)
    for coef in objective:
        lp.add_variable(lower=0.0, upper=1.0, obj=coef)
    for coeffs, relation, rhs in rows:
        lp.add_constraint(coeffs, relation, rhs)
    return MixedIntegerProgram(lp, frozenset(range(len(objective))))


def test_knapsack():
    mip = _binary_program(MAX, [3, 2], [({0: 1, 1: 1}, LE, 1)])
    result = solve_milp(mip)
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(3.0)
    assert result.primal == pytest.approx([1.0, 0.0])


def test_integral_relaxation_needs_no_branching():
    mip = _binary_program(MAX, [1, 1], [({0: 1, 1: 1}, LE, 2)])
    result = solve_milp(mip)
    assert result.status == Status.OPTIMAL
    assert result.nodes == 0
    assert result.objective == pytest.approx(2.0)


def test_fractional_root_branches():
    mip = _binary_program(MAX, [5, 4, 3], [({0: 2, 1: 3, 2: 1}, LE, 5), ({0: 4, 1: 1, 2: 2}, LE, 11)])
    result = solve_milp(mip)
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(9.0)
    assert result.bound == pytest.approx(result.objective, rel=1e-5)


def test_infeasible():
    mip = _binary_program(MIN, [1], [({0: 2}, EQ, 1)])
    result = solve_milp(mip)
    assert result.status == Status.INFEASIBLE
    assert result.primal is None


def test_node_cap_returns_gap_limit():
    mip = _binary_program(MAX, [5, 4, 3], [({0: 2, 1: 3, 2: 1}, LE, 5), ({0: 4, 1: 1, 2: 2}, LE, 11)])
    result = solve_milp(mip, SolverLimits(node_cap=0))
    assert result.status == Status.GAP_LIMIT
    assert result.primal is None
    assert result.bound >= 9.0


def test_integer_needs_finite_bounds():
    lp = LinearProgram(sense=MAX)
    lp.add_variable(obj=1.0)
    with pytest.raises(SolverError):
        solve_milp(MixedIntegerProgram(lp, frozenset([0])))


def test_general_integers():
    lp = LinearProgram(sense=MAX)
    lp.add_variable(lower=0, upper=10, obj=1.0)
    lp.add_variable(lower=0, upper=10, obj=1.0)
    lp.add_constraint({0: 2, 1: 2}, LE, 7)
    result = solve_milp(MixedIntegerProgram(lp, frozenset([0, 1])))
    assert result.objective == pytest.approx(3.0)
    assert np.allclose(result.primal, np.round(result.primal))


def _stalling_lp_solver(stall_on):
    """ solve_lp that reports an iteration limit on its stall_on-th call. """
    calls = itertools.count(1)
    def lp_solver(lp, limits):
        result = solve_lp(lp, limits)
        if next(calls) == stall_on:
            return replace(result, status=Status.ITERATION_LIMIT, primal=None, objective=float('nan'))
        return result
    return lp_solver


@pytest.mark.parametrize('stall_on', range(2, 9))
def test_stalled_subtree_is_not_certified(stall_on):
    lp = LinearProgram(sense=MAX)
    lp.add_variable(lower=0, upper=10, obj=5.0)
    lp.add_variable(lower=0, upper=10, obj=4.0)
    lp.add_constraint({0: 6, 1: 4}, LE, 24)
    lp.add_constraint({0: 1, 1: 2}, LE, 6)
    mip = MixedIntegerProgram(lp, frozenset([0, 1]))
    assert solve_milp(mip).objective == pytest.approx(20.0)
    result = solve_milp(mip, lp_solver=_stalling_lp_solver(stall_on))
    assert result.status in (Status.OPTIMAL, Status.GAP_LIMIT)
    if result.status == Status.OPTIMAL:
        assert result.objective == pytest.approx(20.0)
    else:
        assert result.bound >= 20.0 - 1e-6
        assert not result.objective > 20.0 + 1e-6
    if stall_on == 3:
        # The y >= 2 child stalls; its parent bound of 21 stays open
        assert result.status == Status.GAP_LIMIT
        assert result.bound == pytest.approx(21.0)


def test_adapter_dispatch():
    mip = _binary_program(MAX, [3, 2], [({0: 1, 1: 1}, LE, 1)])
    solver = get_solver('embedded')
    assert solver.solve(mip).objective == pytest.approx(3.0)
    assert solver.solve(MixedIntegerProgram(mip.lp)).objective == pytest.approx(3.0)
    with pytest.raises(SolverError):
        get_solver('cplex')


@pytest.mark.parametrize('seed', range(100))
def test_random_binary_programs_match_enumeration(seed):
    rand = np.random.default_rng(seed)
    n, m = int(rand.integers(3, 13)), int(rand.integers(1, 4))
    objective = rand.integers(-3, 10, size=n).astype(float)
    A = rand.integers(-2, 8, size=(m, n)).astype(float)
    b = np.floor(A.clip(min=0).sum(axis=1) * rand.uniform(0.2, 0.6, size=m))
    sense = MAX if seed % 2 else MIN
    mip = _binary_program(sense, objective if sense == MAX else -objective,
        [(dict(enumerate(row)), LE, rhs) for row, rhs in zip(A, b)])
    patterns = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
    feasible = patterns[(patterns @ A.T <= b + 1e-9).all(axis=1)]
    result = solve_milp(mip)
    if not len(feasible):
        assert result.status == Status.INFEASIBLE
        return
    values = feasible @ np.asarray(mip.lp.objective)
    expected = values.max() if sense == MAX else values.min()
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(expected, abs=1e-6 * max(1.0, abs(expected)))
    assert mip.max_violation(result.primal) <= 1e-6


@pytest.mark.parametrize('seed', range(20))
def test_mixed_programs_match_enumeration(seed):
    rand = np.random.default_rng(1000 + seed)
    nbin, ncont = int(rand.integers(2, 6)), 2
    lp = LinearProgram(sense=MAX)
    for _ in range(nbin):
        lp.add_variable(lower=0.0, upper=1.0, obj=float(rand.integers(1, 8)))
    for _ in range(ncont):
        lp.add_variable(lower=0.0, upper=5.0, obj=float(rand.integers(1, 4)))
    for _ in range(2):
        coeffs = {i: float(c) for i, c in enumerate(rand.integers(0, 5, size=nbin + ncont))}
        lp.add_constraint(coeffs, LE, float(rand.integers(4, 12)))
    mip = MixedIntegerProgram(lp, frozenset(range(nbin)))
    best = None
    for pattern in itertools.product([0.0, 1.0], repeat=nbin):
        fixed = lp.with_bounds(list(pattern) + lp.lower[nbin:], list(pattern) + lp.upper[nbin:])
        sub = solve_lp(fixed)
        if sub.status == Status.OPTIMAL and (best is None or sub.objective > best):
            best = sub.objective
    result = solve_milp(mip)
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(best, abs=1e-6 * max(1.0, abs(best)))


def test_highs_agrees():
    pytest.importorskip('scipy')
    mip = _binary_program(MAX, [5, 4, 3], [({0: 2, 1: 3, 2: 1}, LE, 5), ({0: 4, 1: 1, 2: 2}, LE, 11)])
    result = get_solver('highs').solve(mip)
    assert result.status == Status.OPTIMAL
    assert result.objective == pytest.approx(9.0)
