# encoding: utf-8
import copy, math, os
import numpy as np
from dataclasses import dataclass, field
from enum import Enum
from ..exceptions import SolverError

PIVOT_TOL = 1e-9            # Smallest usable pivot element
FEAS_TOL = 1e-7             # Primal feasibility tolerance
OPT_TOL = 1e-9              # Reduced cost tolerance
INT_TOL = 1e-6              # Integrality tolerance
DEFAULT_GAP = 1e-6          # Relative MILP gap accepted as optimal
DEFAULT_TIME_LIMIT = 300.0  # Seconds per solve
TIME_LIMIT_ENV = 'POP_SOLVER_TIME_LIMIT'
LE, EQ, GE = '<=', '=', '>='
MAX, MIN = 'max', 'min'
INF = math.inf


class Status(str, Enum):
    OPTIMAL = 'Optimal'
    INFEASIBLE = 'Infeasible'
    UNBOUNDED = 'Unbounded'
    ITERATION_LIMIT = 'IterationLimit'
    GAP_LIMIT = 'GapLimit'


@dataclass
class SolverLimits:
    iteration_cap: int = None       # None: scaled to the program size
    node_cap: int = 20000
    gap: float = DEFAULT_GAP
    time_limit: float = None        # None: POP_SOLVER_TIME_LIMIT or 300s

    def __post_init__(self):
        if self.time_limit is None:
            self.time_limit = default_time_limit()

    def iterations_for(self, rows, cols):
        if self.iteration_cap is not None:
            return self.iteration_cap
        return max(10000, 50 * (rows + cols))


def default_time_limit():
    """ Time limit from the environment (duration syntax), else 300s. """
    from ..modifiers import duration
    value = os.environ.get(TIME_LIMIT_ENV)
    return duration(value) if value else DEFAULT_TIME_LIMIT


@dataclass
class Constraint:
    coeffs: dict                    # Variable index -> coefficient
    relation: str                   # One of <=, =, >=
    rhs: float
    name: str = None

    def activity(self, x):
        return sum(coef * x[i] for i, coef in self.coeffs.items())

    def violation(self, x):
        """ Amount by which x violates this row (0 when satisfied). """
        lhs = self.activity(x)
        if self.relation == LE:
            return max(0.0, lhs - self.rhs)
        if self.relation == GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass
class LinearProgram:
    """ Optimization problem in row form: objective sense, objective
        coefficients, sparse constraint rows and per variable bounds.
        Built incrementally with add_variable() and add_constraint().
    """
    sense: str = MAX
    objective: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    names: list = field(default_factory=list)

    def __str__(self):
        return f'<LinearProgram:{self.sense} vars={self.num_variables} rows={self.num_constraints}>'

    @property
    def num_variables(self):
        return len(self.objective)

    @property
    def num_constraints(self):
        return len(self.constraints)

    def add_variable(self, name=None, lower=0.0, upper=INF, obj=0.0):
        """ Add a variable and return its index. """
        index = len(self.objective)
        self.objective.append(float(obj))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.names.append(name or f'x{index}')
        return index

    def add_constraint(self, coeffs, relation, rhs, name=None):
        coeffs = {int(i): float(c) for i, c in coeffs.items() if c != 0}
        self.constraints.append(Constraint(coeffs, relation, float(rhs), name))
        return len(self.constraints) - 1

    def with_bounds(self, lower, upper):
        """ Copy sharing the constraint rows but with new bounds. """
        program = copy.copy(self)
        program.lower = list(lower)
        program.upper = list(upper)
        return program

    def validate(self):
        """ Raise SolverError if the program is malformed. """
        if self.sense not in (MAX, MIN):
            raise SolverError(f"Unknown objective sense '{self.sense}'")
        n = self.num_variables
        if not (len(self.lower) == len(self.upper) == n):
            raise SolverError('Bounds do not match the variable count')
        if not all(math.isfinite(c) for c in self.objective):
            raise SolverError('Objective coefficients must be finite')
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo > hi:
                raise SolverError(f'Variable {self.names[i]} has lower bound {lo} > upper bound {hi}')
            if lo == INF or hi == -INF:
                raise SolverError(f'Variable {self.names[i]} has an empty domain')
        for row in self.constraints:
            if row.relation not in (LE, EQ, GE):
                raise SolverError(f"Unknown relation '{row.relation}'")
            if not math.isfinite(row.rhs):
                raise SolverError(f"Constraint '{row.name}' has a non finite rhs")
            for i, coef in row.coeffs.items():
                if not 0 <= i < n:
                    raise SolverError(f"Constraint '{row.name}' references variable {i} of {n}")
                if not math.isfinite(coef):
                    raise SolverError(f"Constraint '{row.name}' has a non finite coefficient")
        return self

    def value(self, x):
        return float(np.dot(self.objective, x))

    def max_violation(self, x):
        """ Largest bound or row violation of x. """
        worst = 0.0
        for i, value in enumerate(x):
            worst = max(worst, self.lower[i] - value, value - self.upper[i])
        for row in self.constraints:
            worst = max(worst, row.violation(x))
        return worst


@dataclass
class MixedIntegerProgram:
    lp: LinearProgram
    integers: frozenset = frozenset()

    def __str__(self):
        return f'<MixedIntegerProgram:{self.lp.sense} vars={self.lp.num_variables} ints={len(self.integers)}>'

    def validate(self):
        self.lp.validate()
        for i in self.integers:
            if not 0 <= i < self.lp.num_variables:
                raise SolverError(f'Integer variable {i} out of range')
            if not (math.isfinite(self.lp.lower[i]) and math.isfinite(self.lp.upper[i])):
                raise SolverError(f'Integer variable {self.lp.names[i]} needs finite bounds')
        return self

    def max_violation(self, x):
        worst = self.lp.max_violation(x)
        for i in self.integers:
            worst = max(worst, abs(x[i] - round(x[i])))
        return worst


@dataclass
class SolveResult:
    status: Status
    objective: float = math.nan
    primal: np.ndarray = None
    iterations: int = 0
    nodes: int = 0
    wall_clock: float = 0.0
    bound: float = math.nan         # Best bound (MILP); objective for LPs
    duals: np.ndarray = None        # Row multipliers in the objective's sense

    def __str__(self):
        return f'<SolveResult:{self.status.value} obj={self.objective:.6g} it={self.iterations} nodes={self.nodes}>'

    @property
    def optimal(self):
        return self.status == Status.OPTIMAL

    @property
    def has_solution(self):
        return self.primal is not None and self.status in (Status.OPTIMAL, Status.GAP_LIMIT)
