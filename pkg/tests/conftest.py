# encoding: utf-8
import itertools, pytest
import numpy as np
from pyparsing import ParseResults
from pyparsing.exceptions import ParseException
from popalloc import parser, utils
from popalloc.domains import cluster, loadbalance, traffic
from popalloc.solver import EQ, GE, INF, LE, MAX, MIN, LinearProgram


@pytest.fixture
def small_cluster():
    return cluster.generate_instance(seed=1, num_jobs=12, num_types=3)


@pytest.fixture
def small_traffic():
    return traffic.generate_instance(seed=2, num_nodes=10, num_edges=30, num_commodities=24)


@pytest.fixture
def small_loadbalance():
    """ Shards a, b (load 4) on s0 and c, d (load 2) on s1; L = 6. The
        cheapest fix copies shard a (memory 1) onto s1.
    """
    return lb_instance(loads=[4, 4, 2, 2], memories=[1, 2, 1, 2], capacities=[10, 10],
        placement=[0, 0, 1, 1], epsilon=0.5)


def lb_instance(loads, memories, capacities, placement, epsilon):
    shards = [loadbalance.Shard(f'{chr(97 + i)}', float(load), float(mem))
        for i, (load, mem) in enumerate(zip(loads, memories))]
    servers = [loadbalance.Server(f's{j}', float(c)) for j, c in enumerate(capacities)]
    t = np.zeros((len(shards), len(servers)))
    t[np.arange(len(shards)), placement] = 1.0
    state = loadbalance.PlacementState(t, sum(loads) / len(servers), epsilon)
    return loadbalance.LoadBalanceInstance(shards, servers, state)


def random_lp(seed, num_vars, num_rows):
    """ Random LP with finite boxes on every variable so an optimum exists
        whenever the rows are feasible.
    """
    rand = utils.rng(seed)
    lp = LinearProgram(sense=MAX if rand.random() < 0.5 else MIN)
    for i in range(num_vars):
        lower = float(rand.integers(-3, 2))
        lp.add_variable(f'v{i}', lower=lower, upper=lower + float(rand.integers(1, 8)),
            obj=float(rand.integers(-5, 6)))
    for r in range(num_rows):
        coeffs = {i: float(c) for i, c in enumerate(rand.integers(-4, 5, size=num_vars)) if c}
        relation = (LE, GE, EQ)[int(rand.choice(3, p=[0.6, 0.3, 0.1]))]
        lp.add_constraint(coeffs, relation, float(rand.integers(-6, 12)))
    return lp


def dense_rows(lp):
    """ (A, b, relations) with bounds appended as extra rows. """
    rows, rhs, relations = [], [], []
    for row in lp.constraints:
        vector = np.zeros(lp.num_variables)
        for i, coef in row.coeffs.items():
            vector[i] = coef
        rows.append(vector)
        rhs.append(row.rhs)
        relations.append(row.relation)
    for i in range(lp.num_variables):
        for bound, relation in ((lp.lower[i], GE), (lp.upper[i], LE)):
            if abs(bound) < INF:
                rows.append(np.eye(lp.num_variables)[i])
                rhs.append(bound)
                relations.append(relation)
    return np.array(rows), np.array(rhs), relations


def vertex_oracle(lp, tol=1e-7):
    """ Best objective over all basic feasible points, or None if there are
        none. Only meant for a handful of variables.
    """
    A, b, relations = dense_rows(lp)
    n = lp.num_variables
    combos = np.array(list(itertools.combinations(range(len(A)), n)))
    M, rhs = A[combos], b[combos]
    regular = np.abs(np.linalg.det(M)) > 1e-9
    if not regular.any():
        return None
    points = np.linalg.solve(M[regular], rhs[regular][..., None])[..., 0]
    activity = points @ A.T
    slack = np.zeros_like(activity)
    for r, relation in enumerate(relations):
        if relation == LE:
            slack[:, r] = activity[:, r] - b[r]
        elif relation == GE:
            slack[:, r] = b[r] - activity[:, r]
        else:
            slack[:, r] = np.abs(activity[:, r] - b[r])
    feasible = points[(slack <= tol * np.maximum(1.0, np.abs(b))).all(axis=1)]
    if not len(feasible):
        return None
    values = feasible @ np.asarray(lp.objective)
    return float(values.max() if lp.sense == MAX else values.min())


def pprint_parser_node(node, indent=0, text=None):
    """ Prints a parsed LP file. """
    try:
        node = node if node is not None else parser.LPFile.parseString(text)
        indentstr = ' ' * indent
        if isinstance(node, ParseResults):
            print(f'{indentstr}{node.getName() or "-"}:')
            for child in node:
                pprint_parser_node(child, indent+2)
        else:
            print(f'{indentstr}{node}')
    except ParseException as err:
        print(err)


def pprint_program(lp, primal=None):
    """ Rows of a program with the activity of primal when given. """
    print(f'{lp.sense} ' + ' '.join(f'{c:+g}*{lp.names[i]}' for i, c in enumerate(lp.objective) if c))
    for row in lp.constraints:
        expr = ' '.join(f'{c:+g}*{lp.names[i]}' for i, c in sorted(row.coeffs.items()))
        activity = f'   [{row.activity(primal):.6g}]' if primal is not None else ''
        print(f'  {row.name or "":<20} {expr} {row.relation} {row.rhs:g}{activity}')
    for i, name in enumerate(lp.names):
        value = f' = {primal[i]:.6g}' if primal is not None else ''
        print(f'  {lp.lower[i]:g} <= {name} <= {lp.upper[i]:g}{value}')
