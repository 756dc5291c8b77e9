# encoding: utf-8
from .program import EQ, GE, INF, LE, MAX, MIN  # noqa
from .program import Constraint, LinearProgram, MixedIntegerProgram  # noqa
from .program import SolveResult, SolverLimits, Status  # noqa
from .adapter import EmbeddedSolver, HighsSolver, SolverAdapter, get_solver  # noqa
from .maxmin import MaxMinTerm, solve_max_min  # noqa
from .milp import solve_milp  # noqa
from .simplex import solve_lp  # noqa
from .lpformat import read_lp, write_lp  # noqa
