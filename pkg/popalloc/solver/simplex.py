# encoding: utf-8
"""
Bounded-variable revised simplex over a dense basis inverse.

The program is rewritten as min cost·y subject to A·y = b, 0 <= y <= upper,
b >= 0. Phase one minimizes the sum of artificial columns; phase two drops
them (upper bound 0) and minimizes the real cost. Pricing is Dantzig until
3·m consecutive non-improving pivots, then Bland's rule for the rest of the
phase. The inverse is updated with an eta step and rebuilt every 100 pivots.
"""
import logging, math, time
import numpy as np
from .program import EQ, FEAS_TOL, GE, INF, LE, MIN, OPT_TOL, PIVOT_TOL
from .program import SolveResult, SolverLimits, Status
log = logging.getLogger(__name__)

REFACTOR_EVERY = 100
STALL_FACTOR = 3


class StandardForm:
    """ lp rewritten over shifted, nonnegative columns with slacks and
        artificials appended. Keeps what is needed to map back.
    """

    def __init__(self, lp):
        n, m = lp.num_variables, lp.num_constraints
        self.lp = lp
        self.sense = 1.0 if lp.sense == MIN else -1.0
        columns, self.offset = [], np.zeros(n)
        for i in range(n):
            lo, hi = lp.lower[i], lp.upper[i]
            if math.isfinite(lo):
                self.offset[i] = lo
                columns.append((i, 1.0, hi - lo))
            elif math.isfinite(hi):
                self.offset[i] = hi
                columns.append((i, -1.0, INF))
            else:
                columns.append((i, 1.0, INF))
                columns.append((i, -1.0, INF))
        self.colidx = np.array([c[0] for c in columns], dtype=int)
        self.mult = np.array([c[1] for c in columns], dtype=float)
        self.ny = len(columns)
        # Dense original rows
        raw = np.zeros((m, n))
        rhs = np.zeros(m)
        for r, row in enumerate(lp.constraints):
            for i, coef in row.coeffs.items():
                raw[r, i] += coef
            rhs[r] = row.rhs
        objective = np.asarray(lp.objective, dtype=float)
        b = rhs - raw @ self.offset
        structural = raw[:, self.colidx] * self.mult if n else np.zeros((m, 0))
        self.constant = float(objective @ self.offset)
        # Slack per inequality row: +1 for <=, -1 for >=
        slack_rows = [r for r, row in enumerate(lp.constraints) if row.relation != EQ]
        slacks = np.zeros((m, len(slack_rows)))
        for s, r in enumerate(slack_rows):
            slacks[r, s] = 1.0 if lp.constraints[r].relation == LE else -1.0
        self.ns = len(slack_rows)
        self.flip = np.where(b < 0, -1.0, 1.0)
        A = np.hstack([structural, slacks]) * self.flip[:, None]
        self.b = b * self.flip
        # Rows whose slack has +1 after flipping start with the slack basic
        basis = np.full(m, -1, dtype=int)
        for s, r in enumerate(slack_rows):
            if A[r, self.ny + s] > 0:
                basis[r] = self.ny + s
        art_rows = [r for r in range(m) if basis[r] < 0]
        self.na = len(art_rows)
        artificial = np.zeros((m, self.na))
        for a, r in enumerate(art_rows):
            artificial[r, a] = 1.0
            basis[r] = self.ny + self.ns + a
        self.A = np.hstack([A, artificial])
        self.basis = basis
        self.upper = np.concatenate([[c[2] for c in columns], np.full(self.ns + self.na, INF)])
        self.cost = np.concatenate([self.sense * objective[self.colidx] * self.mult if n else [],
            np.zeros(self.ns + self.na)])
        self.is_artificial = np.zeros(self.A.shape[1], dtype=bool)
        self.is_artificial[self.ny + self.ns:] = True

    def original(self, y):
        """ Map standard-form values back onto the lp's variables. """
        x = self.offset.copy()
        if self.ny:
            x += np.bincount(self.colidx, weights=self.mult * y[:self.ny], minlength=len(x))
        return x

    def duals(self, y):
        """ Row multipliers for the original rows in the lp's own sense. """
        return self.sense * self.flip * y


class RevisedSimplex:
    """ One solve of one StandardForm. Not shareable across threads. """

    def __init__(self, form, limits):
        self.form = form
        self.A, self.b, self.upper = form.A, form.b, form.upper.copy()
        self.m, self.ncols = self.A.shape
        self.basis = form.basis.copy()
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.ncols, dtype=bool)
        self.x = np.zeros(self.ncols)
        self.x[self.basis] = self.b
        self.Binv = np.eye(self.m)
        self.iterations = 0
        self.since_refactor = 0
        self.cap = limits.iterations_for(self.m, self.ncols)
        self.deadline = time.perf_counter() + limits.time_limit

    def refactor(self):
        """ Rebuild the basis inverse and recompute basic values. """
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError:
            log.debug('Singular basis on refactor; keeping the updated inverse')
            return
        nonbasic = self.x.copy()
        nonbasic[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ nonbasic)
        self.since_refactor = 0

    def pivot(self, r, j, alpha):
        """ Column j replaces basis row r; alpha = Binv·A[:, j]. """
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[j] = True
        self.at_upper[j] = False
        self.basis[r] = j
        pivot_row = self.Binv[r] / alpha[r]
        eta = alpha.copy()
        eta[r] = 0.0
        self.Binv -= np.outer(eta, pivot_row)
        self.Binv[r] = pivot_row
        self.since_refactor += 1

    def run(self, cost, allowed):
        """ Simplex iterations on cost over the allowed columns.
            Returns Status.OPTIMAL, UNBOUNDED or ITERATION_LIMIT.
        """
        bland, stall = False, 0
        while True:
            if self.iterations >= self.cap or time.perf_counter() > self.deadline:
                return Status.ITERATION_LIMIT
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            y = cost[self.basis] @ self.Binv if self.m else np.zeros(0)
            reduced = cost - y @ self.A if self.m else cost.copy()
            candidates = allowed & ~self.is_basic & (
                (~self.at_upper & (reduced < -OPT_TOL)) | (self.at_upper & (reduced > OPT_TOL)))
            if not candidates.any():
                return Status.OPTIMAL
            if bland:
                j = int(np.flatnonzero(candidates)[0])
            else:
                j = int(np.argmax(np.where(candidates, np.abs(reduced), -1.0)))
            direction = -1.0 if self.at_upper[j] else 1.0
            alpha = self.Binv @ self.A[:, j] if self.m else np.zeros(0)
            delta = direction * alpha
            r, t_row = self._ratio_test(delta, bland)
            t_flip = self.upper[j]
            step = min(t_row, t_flip)
            if step == INF:
                return Status.UNBOUNDED
            step = max(step, 0.0)
            if self.m:
                self.x[self.basis] -= step * delta
            self.x[j] += direction * step
            if t_flip <= t_row:
                self.at_upper[j] = not self.at_upper[j]
                self.x[j] = self.upper[j] if self.at_upper[j] else 0.0
            else:
                leaving = self.basis[r]
                to_upper = delta[r] < 0
                self.pivot(r, j, alpha)
                self.at_upper[leaving] = to_upper
                self.x[leaving] = self.upper[leaving] if to_upper else 0.0
            self.iterations += 1
            if step * abs(reduced[j]) <= 1e-12:
                stall += 1
                if not bland and stall > STALL_FACTOR * self.m:
                    log.debug(f'Switching to Bland pricing after {stall} non-improving pivots')
                    bland = True
            else:
                stall = 0

    def _ratio_test(self, delta, bland):
        """ Leaving row and step length limited by the basic variables. """
        if not self.m:
            return -1, INF
        xB = self.x[self.basis]
        uB = self.upper[self.basis]
        ratios = np.full(self.m, INF)
        down = delta > PIVOT_TOL
        up = (delta < -PIVOT_TOL) & np.isfinite(uB)
        ratios[down] = np.maximum(xB[down], 0.0) / delta[down]
        ratios[up] = np.maximum(uB[up] - xB[up], 0.0) / -delta[up]
        best = ratios.min()
        if best == INF:
            return -1, INF
        ties = np.flatnonzero(ratios <= best + 1e-12)
        if bland:
            r = ties[np.argmin(self.basis[ties])]
        else:
            r = ties[np.argmax(np.abs(delta[ties]))]
        return int(r), float(best)

    def drive_out_artificials(self):
        """ Pivot basic artificials (at zero after phase one) out where a
            real column can take their place. Rows left are redundant.
        """
        real = ~self.form.is_artificial
        for r in range(self.m):
            if not self.form.is_artificial[self.basis[r]]:
                continue
            row = self.Binv[r] @ self.A
            choices = np.flatnonzero(real & ~self.is_basic & (np.abs(row) > 1e-7))
            if len(choices):
                j = int(choices[np.argmax(np.abs(row[choices]))])
                leaving = self.basis[r]
                self.pivot(r, j, self.Binv @ self.A[:, j])
                self.x[leaving] = 0.0
        self.refactor()


def solve_lp(lp, limits=None):
    """ Solve a LinearProgram with the bounded revised simplex method. """
    lp.validate()
    limits = limits or SolverLimits()
    started = time.perf_counter()
    form = StandardForm(lp)
    simplex = RevisedSimplex(form, limits)
    # Phase one
    if form.na:
        phase_one = form.is_artificial.astype(float)
        status = simplex.run(phase_one, np.ones(simplex.ncols, dtype=bool))
        if status != Status.OPTIMAL:
            return _result(form, simplex, Status.ITERATION_LIMIT, started)
        simplex.refactor()
        infeasibility = float(simplex.x[form.is_artificial].sum())
        if infeasibility > FEAS_TOL * max(1.0, float(np.abs(form.b).max(initial=0.0))):
            log.debug(f'Phase one ended with infeasibility {infeasibility:.3g}')
            return _result(form, simplex, Status.INFEASIBLE, started, primal=False)
        simplex.drive_out_artificials()
        simplex.upper[form.is_artificial] = 0.0
    # Phase two
    status = simplex.run(form.cost, ~form.is_artificial)
    simplex.refactor()
    return _result(form, simplex, status, started)


def _result(form, simplex, status, started, primal=True):
    """ Build the SolveResult in the original lp's terms. """
    elapsed = time.perf_counter() - started
    if not primal:
        return SolveResult(status, iterations=simplex.iterations, wall_clock=elapsed)
    y = np.clip(simplex.x, 0.0, None)
    x = form.original(y)
    # Snap onto bounds removed by clipping noise
    x = np.minimum(np.maximum(x, form.lp.lower), form.lp.upper)
    objective = float(np.dot(form.lp.objective, x))
    duals = None
    if status == Status.OPTIMAL and simplex.m:
        duals = form.duals(form.cost[simplex.basis] @ simplex.Binv)
    if status == Status.UNBOUNDED:
        objective = form.sense * -INF
    log.debug(f'Simplex {status.value} after {simplex.iterations} iterations in {elapsed:.3f}s')
    return SolveResult(status, objective=objective, primal=x, iterations=simplex.iterations,
        wall_clock=elapsed, bound=objective, duals=duals)
