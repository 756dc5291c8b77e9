# encoding: utf-8
import logging
from dataclasses import dataclass
from ..exceptions import SolverError
from .program import GE, INF, MAX, LinearProgram
log = logging.getLogger(__name__)


@dataclass
class MaxMinTerm:
    """ One entity's value: sum(coeffs[i] * x[i]) / normalizer. """
    coeffs: dict
    normalizer: float = 1.0


def epigraph(lp, terms):
    """ Max-min over terms rewritten as one LP: maximize t subject to every
        term >= t plus lp's own rows and bounds. Returns (program, t index).
    """
    if not terms:
        raise SolverError('Max-min objective needs at least one term')
    program = LinearProgram(sense=MAX, objective=[0.0] * lp.num_variables,
        constraints=list(lp.constraints), lower=list(lp.lower), upper=list(lp.upper),
        names=list(lp.names))
    t = program.add_variable('t', lower=-INF, upper=INF, obj=1.0)
    for index, term in enumerate(terms):
        if not term.normalizer > 0:
            raise SolverError(f'Max-min term {index} needs a positive normalizer')
        coeffs = {i: coef / term.normalizer for i, coef in term.coeffs.items()}
        coeffs[t] = coeffs.get(t, 0.0) - 1.0
        program.add_constraint(coeffs, GE, 0.0, name=f'floor{index}')
    return program, t


def solve_max_min(lp, terms, solver=None, limits=None):
    """ Maximize the smallest term. The returned primal covers lp's variables
        only; objective is the achieved minimum.
    """
    from .adapter import get_solver
    solver = solver or get_solver()
    program, t = epigraph(lp, terms)
    result = solver.solve_lp(program, limits)
    if result.primal is not None:
        result.primal = result.primal[:t]
    if result.duals is not None:
        result.duals = result.duals[:lp.num_constraints]
    return result
