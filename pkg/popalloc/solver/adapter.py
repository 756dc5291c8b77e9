# encoding: utf-8
"""
Solver adapters. Domains only talk to this interface so the embedded simplex
and branch and bound can be swapped for an external solver without touching
any formulation.
"""
import logging, math, time
import numpy as np
from ..exceptions import SolverError
from .program import EQ, GE, LE, MAX, MixedIntegerProgram, SolveResult, SolverLimits, Status
log = logging.getLogger(__name__)


class SolverAdapter:
    """ Abstract adapter. Subclasses implement solve_lp and solve_milp. """
    NAME = None

    def __str__(self):
        return f'<{self.__class__.__name__}>'

    def solve_lp(self, lp, limits=None):
        raise NotImplementedError

    def solve_milp(self, mip, limits=None):
        raise NotImplementedError

    def solve(self, program, limits=None):
        """ Dispatch on the program type. """
        if isinstance(program, MixedIntegerProgram):
            if not program.integers:
                return self.solve_lp(program.lp, limits)
            return self.solve_milp(program, limits)
        return self.solve_lp(program, limits)

    def solve_max_min(self, lp, terms, limits=None):
        from .maxmin import solve_max_min
        return solve_max_min(lp, terms, solver=self, limits=limits)


class EmbeddedSolver(SolverAdapter):
    NAME = 'embedded'

    def solve_lp(self, lp, limits=None):
        from .simplex import solve_lp
        return solve_lp(lp, limits)

    def solve_milp(self, mip, limits=None):
        from .milp import solve_milp
        return solve_milp(mip, limits, lp_solver=self.solve_lp)


class HighsSolver(SolverAdapter):
    """ HiGHS through scipy.optimize (optional dependency). """
    NAME = 'highs'
    LP_STATUS = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE,
        3: Status.UNBOUNDED, 4: Status.ITERATION_LIMIT}

    def __init__(self):
        try:
            import scipy.optimize  # noqa
        except ImportError:
            raise SolverError("The 'highs' solver needs scipy; pip install popalloc[highs]")

    def _matrices(self, lp):
        from scipy import sparse
        rows, cols, vals = [], [], []
        for r, row in enumerate(lp.constraints):
            for i, coef in row.coeffs.items():
                rows.append(r)
                cols.append(i)
                vals.append(coef)
        shape = (lp.num_constraints, lp.num_variables)
        A = sparse.csr_matrix((vals, (rows, cols)), shape=shape)
        sign = -1.0 if lp.sense == MAX else 1.0
        return A, sign * np.asarray(lp.objective, dtype=float), sign

    def solve_lp(self, lp, limits=None):
        from scipy.optimize import linprog
        lp.validate()
        limits = limits or SolverLimits()
        started = time.perf_counter()
        A, c, sign = self._matrices(lp)
        relations = [row.relation for row in lp.constraints]
        rhs = np.array([row.rhs for row in lp.constraints])
        le = [i for i, rel in enumerate(relations) if rel == LE]
        ge = [i for i, rel in enumerate(relations) if rel == GE]
        eq = [i for i, rel in enumerate(relations) if rel == EQ]
        A_ub = A[le + ge] if le or ge else None
        b_ub = None
        if A_ub is not None:
            flip = np.array([1.0] * len(le) + [-1.0] * len(ge))
            A_ub = A_ub.multiply(flip[:, None]).tocsr()
            b_ub = rhs[le + ge] * flip
        bounds = [(None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
            for lo, hi in zip(lp.lower, lp.upper)]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq else None,
            b_eq=rhs[eq] if eq else None, bounds=bounds, method='highs',
            options={'time_limit': limits.time_limit})
        status = self.LP_STATUS.get(res.status, Status.ITERATION_LIMIT)
        primal = np.asarray(res.x) if res.x is not None else None
        objective = lp.value(primal) if primal is not None else math.nan
        return SolveResult(status, objective=objective, primal=primal, iterations=int(res.get('nit', 0)),
            wall_clock=time.perf_counter() - started, bound=objective)

    def solve_milp(self, mip, limits=None):
        from scipy.optimize import Bounds, LinearConstraint, milp
        mip.validate()
        lp = mip.lp
        limits = limits or SolverLimits()
        started = time.perf_counter()
        A, c, sign = self._matrices(lp)
        lower = np.array([-np.inf if row.relation == LE else row.rhs for row in lp.constraints])
        upper = np.array([np.inf if row.relation == GE else row.rhs for row in lp.constraints])
        integrality = np.zeros(lp.num_variables)
        integrality[sorted(mip.integers)] = 1
        constraints = [LinearConstraint(A, lower, upper)] if lp.num_constraints else []
        res = milp(c, integrality=integrality, bounds=Bounds(lp.lower, lp.upper),
            constraints=constraints, options={'time_limit': limits.time_limit,
            'mip_rel_gap': limits.gap, 'node_limit': limits.node_cap})
        primal = np.asarray(res.x) if res.x is not None else None
        if res.status == 0:
            status = Status.OPTIMAL
        elif res.status == 2:
            status = Status.INFEASIBLE
        elif res.status == 3:
            status = Status.UNBOUNDED
        else:
            status = Status.GAP_LIMIT if primal is not None else Status.ITERATION_LIMIT
        objective = lp.value(primal) if primal is not None else math.nan
        bound = sign * res.get('mip_dual_bound', sign * objective) if primal is not None else math.nan
        return SolveResult(status, objective=objective, primal=primal,
            nodes=int(res.get('mip_node_count', 0) or 0),
            wall_clock=time.perf_counter() - started, bound=bound)


SOLVERS = {cls.NAME: cls for cls in (EmbeddedSolver, HighsSolver)}


def get_solver(name=None):
    """ Returns a fresh solver adapter by name (default embedded). """
    if isinstance(name, SolverAdapter):
        return name
    name = (name or EmbeddedSolver.NAME).lower()
    if name not in SOLVERS:
        raise SolverError(f"Unknown solver '{name}'; choose from {', '.join(sorted(SOLVERS))}")
    return SOLVERS[name]()
