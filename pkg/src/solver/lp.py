import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from utils.config import Config
from utils.errors import LpNumericError, ValidationError
from utils.logger import get_logger

log = get_logger("Simplex")

INF = math.inf

MAXIMIZE = "maximize"
MINIMIZE = "minimize"
RELATIONS = ("=", "<=", ">=")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
# consecutive degenerate pivots before switching to Bland's rule
STALL_LIMIT = 50


@dataclass
class LinearProgram:
    """
    Bounded variables, linear constraints and one linear objective.
    Linear expressions are sparse dicts {variable index: coefficient}.
    """
    variables: List[Tuple[float, float]] = field(default_factory=list)
    constraints: List[Tuple[Dict[int, float], str, float]] = field(default_factory=list)
    objective: Tuple[str, Dict[int, float]] = (MAXIMIZE, {})

    def add_variable(self, lower=0.0, upper=INF):
        self.variables.append((float(lower), float(upper)))
        return len(self.variables) - 1

    def add_constraint(self, coeffs, relation, rhs):
        self.constraints.append((dict(coeffs), relation, float(rhs)))

    def maximize(self, coeffs):
        self.objective = (MAXIMIZE, dict(coeffs))

    def minimize(self, coeffs):
        self.objective = (MINIMIZE, dict(coeffs))

    def validate(self):
        n = len(self.variables)
        for k, (lower, upper) in enumerate(self.variables):
            if math.isnan(lower) or math.isnan(upper) or lower > upper:
                raise ValidationError(f"Variable {k} has invalid bounds [{lower}, {upper}]")
            if lower == INF or upper == -INF:
                raise ValidationError(f"Variable {k} has an empty domain [{lower}, {upper}]")
        for index, (coeffs, relation, rhs) in enumerate(self.constraints):
            if relation not in RELATIONS:
                raise ValidationError(f"Constraint {index} has unknown relation {relation!r}")
            if not math.isfinite(rhs):
                raise ValidationError(f"Constraint {index} has non-finite constant {rhs}")
            for k in coeffs:
                if not 0 <= k < n:
                    raise ValidationError(f"Constraint {index} references missing variable {k}")
        direction, coeffs = self.objective
        if direction not in (MAXIMIZE, MINIMIZE):
            raise ValidationError(f"Unknown objective direction {direction!r}")
        for k in coeffs:
            if not 0 <= k < n:
                raise ValidationError(f"Objective references missing variable {k}")


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pivots: int = 0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL


class SimplexSolver:
    """
    Dense two-phase tableau simplex.

    Every variable is shifted/mirrored/split onto nonnegative columns, finite
    upper bounds become extra rows, phase 1 minimizes the artificial sum and
    phase 2 runs on the original objective. Pricing is Dantzig's rule with a
    fallback to Bland's rule while pivots stall on a degenerate vertex.
    """

    def __init__(self, eps=Config.EPS_LP, max_pivots=None):
        self.eps = eps
        self.max_pivots = max_pivots

    def solve(self, lp: LinearProgram) -> LpSolution:
        lp.validate()
        columns, offsets, n_struct = self._map_variables(lp)
        rows, rels, rhs = self._standard_rows(lp, columns, offsets, n_struct)

        direction, obj = lp.objective
        sign = -1.0 if direction == MAXIMIZE else 1.0
        cost = np.zeros(n_struct)
        for k, coef in obj.items():
            for col, factor in columns[k]:
                cost[col] += sign * coef * factor

        self._pivots = 0
        limit = self.max_pivots or 50 * (len(rows) + n_struct + 10)

        tableau, basis, n_cols, artificial = self._initial_tableau(rows, rels, rhs, n_struct)
        m = len(basis)
        b_scale = 1.0 + (float(np.max(np.abs(rhs))) if len(rhs) else 0.0)

        # phase 1
        if artificial:
            tableau[m, :] = 0.0
            for i, col in enumerate(basis):
                if col in artificial:
                    tableau[m, :] -= tableau[i, :]
            for col in artificial:
                tableau[m, col] = 0.0
            self._iterate(tableau, basis, allowed=np.ones(n_cols, dtype=bool), limit=limit)
            if -tableau[m, -1] > self.eps * b_scale:
                log.debug(f"Phase 1 residual {-tableau[m, -1]:.3e}: infeasible")
                return LpSolution(status=INFEASIBLE, pivots=self._pivots)
            tableau, basis = self._drive_out_artificials(tableau, basis, artificial, n_cols)
            m = len(basis)

        # phase 2
        keep = np.array([col not in artificial for col in range(n_cols)] + [True])
        tableau = tableau[:, keep]
        remap = {old: new for new, old in enumerate(np.flatnonzero(keep[:-1]))}
        basis = [remap[col] for col in basis]
        n_cols = tableau.shape[1] - 1

        full_cost = np.zeros(n_cols)
        full_cost[:n_struct] = cost
        tableau[m, :] = 0.0
        tableau[m, :n_cols] = full_cost
        for i, col in enumerate(basis):
            if full_cost[col] != 0.0:
                tableau[m, :] -= full_cost[col] * tableau[i, :]

        bounded = self._iterate(tableau, basis, allowed=np.ones(n_cols, dtype=bool), limit=limit)
        if not bounded:
            return LpSolution(status=UNBOUNDED, pivots=self._pivots)

        y = np.zeros(n_cols)
        for i, col in enumerate(basis):
            y[col] = tableau[i, -1]
        x = np.array([
            offsets[k] + sum(factor * y[col] for col, factor in columns[k])
            for k in range(len(lp.variables))
        ])
        self._check_feasible(lp, x)
        value = sum(coef * x[k] for k, coef in obj.items())
        log.debug(f"Optimal after {self._pivots} pivots: objective {value:.9g}")
        return LpSolution(status=OPTIMAL, objective=float(value), values=x, pivots=self._pivots)

    # ------------------------------------------------------------------
    # standard form
    # ------------------------------------------------------------------

    @staticmethod
    def _map_variables(lp):
        """x_k = offset_k + sum(factor * y_col) with every y_col >= 0."""
        columns, offsets = [], []
        n = 0
        for lower, upper in lp.variables:
            if math.isfinite(lower):
                columns.append([(n, 1.0)])
                offsets.append(lower)
                n += 1
            elif math.isfinite(upper):
                columns.append([(n, -1.0)])
                offsets.append(upper)
                n += 1
            else:
                columns.append([(n, 1.0), (n + 1, -1.0)])
                offsets.append(0.0)
                n += 2
        return columns, offsets, n

    @staticmethod
    def _standard_rows(lp, columns, offsets, n_struct):
        rows, rels, rhs = [], [], []
        for coeffs, relation, constant in lp.constraints:
            row = np.zeros(n_struct)
            shift = 0.0
            for k, coef in coeffs.items():
                shift += coef * offsets[k]
                for col, factor in columns[k]:
                    row[col] += coef * factor
            rows.append(row)
            rels.append(relation)
            rhs.append(constant - shift)
        for k, (lower, upper) in enumerate(lp.variables):
            if math.isfinite(lower) and math.isfinite(upper):
                row = np.zeros(n_struct)
                row[columns[k][0][0]] = 1.0
                rows.append(row)
                rels.append("<=")
                rhs.append(upper - lower)
        for i in range(len(rows)):
            if rhs[i] < 0:
                rows[i] = -rows[i]
                rhs[i] = -rhs[i]
                rels[i] = {"<=": ">=", ">=": "<=", "=": "="}[rels[i]]
        return rows, rels, np.array(rhs, dtype=float)

    @staticmethod
    def _initial_tableau(rows, rels, rhs, n_struct):
        m = len(rows)
        n_slack = sum(1 for r in rels if r != "=")
        n_art = sum(1 for r in rels if r != "<=")
        n_cols = n_struct + n_slack + n_art
        tableau = np.zeros((m + 1, n_cols + 1))
        basis = []
        artificial = set()
        slack_col = n_struct
        art_col = n_struct + n_slack
        for i, (row, rel) in enumerate(zip(rows, rels)):
            tableau[i, :n_struct] = row
            tableau[i, -1] = rhs[i]
            if rel == "<=":
                tableau[i, slack_col] = 1.0
                basis.append(slack_col)
                slack_col += 1
                continue
            if rel == ">=":
                tableau[i, slack_col] = -1.0
                slack_col += 1
            tableau[i, art_col] = 1.0
            basis.append(art_col)
            artificial.add(art_col)
            art_col += 1
        return tableau, basis, n_cols, artificial

    # ------------------------------------------------------------------
    # pivoting
    # ------------------------------------------------------------------

    def _pivot(self, tableau, basis, row, col):
        tableau[row, :] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row, :])
        basis[row] = col
        self._pivots += 1

    def _iterate(self, tableau, basis, allowed, limit):
        """Runs pivots to optimality. Returns False on an unbounded ray."""
        m = len(basis)
        n_cols = tableau.shape[1] - 1
        stall = 0
        while True:
            if self._pivots > limit:
                raise LpNumericError(f"Simplex exceeded {limit} pivots (cycling or ill-conditioning)")
            reduced = tableau[m, :n_cols]
            candidates = np.flatnonzero((reduced < -COST_TOL) & allowed)
            if candidates.size == 0:
                return True
            if stall > STALL_LIMIT:
                enter = int(candidates[0])
            else:
                enter = int(candidates[np.argmin(reduced[candidates])])

            column = tableau[:m, enter]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return False
            ratios = tableau[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12]
            leave = int(min(ties, key=lambda r: basis[r]))

            stall = stall + 1 if best <= 1e-12 else 0
            self._pivot(tableau, basis, leave, enter)
            rhs = tableau[:m, -1]
            rhs[(rhs < 0) & (rhs > -PIVOT_TOL)] = 0.0

    def _drive_out_artificials(self, tableau, basis, artificial, n_cols):
        m = len(basis)
        redundant = []
        for i in range(m):
            if basis[i] not in artificial:
                continue
            row = tableau[i, :n_cols]
            candidates = [j for j in np.flatnonzero(np.abs(row) > PIVOT_TOL) if j not in artificial]
            if candidates:
                best = max(candidates, key=lambda j: abs(row[j]))
                self._pivot(tableau, basis, i, int(best))
            else:
                redundant.append(i)
        if redundant:
            log.debug(f"Dropping {len(redundant)} redundant constraint row(s)")
            keep = [i for i in range(m + 1) if i not in redundant]
            tableau = tableau[keep, :]
            basis = [col for i, col in enumerate(basis) if i not in redundant]
        return tableau, basis

    def _check_feasible(self, lp, x):
        for k, (lower, upper) in enumerate(lp.variables):
            if x[k] < lower - self.eps * (1 + abs(lower)) or x[k] > upper + self.eps * (1 + abs(upper)):
                raise LpNumericError(f"Variable {k} = {x[k]:.12g} outside [{lower}, {upper}] at optimum")
        for index, (coeffs, relation, constant) in enumerate(lp.constraints):
            lhs = sum(coef * x[k] for k, coef in coeffs.items())
            tol = self.eps * (1 + abs(constant))
            if relation == "=":
                violation = abs(lhs - constant)
            elif relation == "<=":
                violation = lhs - constant
            else:
                violation = constant - lhs
            if violation > tol:
                raise LpNumericError(
                    f"Constraint {index} violated by {violation:.3e} at claimed optimum")


def solve(lp: LinearProgram) -> LpSolution:
    return SimplexSolver().solve(lp)
