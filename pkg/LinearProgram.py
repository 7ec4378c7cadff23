"""
LinearProgram - small dense LP solver for the curvature routines.

Two-phase tableau simplex with Bland's rule. Programs are stated in the
natural form (minimize c.x subject to rows a.x {<=,=,>=} b and optional
per-variable bounds) and converted to standard form internally.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ConfigLoader import config

logger = logging.getLogger(__name__)


class LinearProgramException(Exception):
    pass


class MalformedProgram(LinearProgramException):
    """Row width, relation or bound inconsistent with the program."""
    pass


class NumericalFailure(LinearProgramException):
    """Pivot budget exhausted or the reported optimum fails the feasibility check."""
    pass


class Relation(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"

    @property
    def desc(self):
        return {
            LpStatus.OPTIMAL: "Optimal solution found",
            LpStatus.INFEASIBLE: "No point satisfies all constraints",
            LpStatus.UNBOUNDED: "Objective decreases without bound",
        }[self]


@dataclass(frozen=True, eq=False)
class Constraint:
    coefficients: np.ndarray
    relation: Relation
    bound: float


@dataclass(eq=False)
class LinearProgram:
    """
    minimize objective . x

    Variables default to x >= 0. Use set_bounds(j, None, None) for a free
    variable, or any combination of finite lower/upper bounds.
    """

    objective: np.ndarray
    constraints: List[Constraint] = field(default_factory=list)
    lower_bounds: List[Optional[float]] = field(default_factory=list)
    upper_bounds: List[Optional[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.size
        if not self.lower_bounds:
            self.lower_bounds = [0.0] * n
        if not self.upper_bounds:
            self.upper_bounds = [None] * n
        if len(self.lower_bounds) != n or len(self.upper_bounds) != n:
            raise MalformedProgram(f"Bounds must have {n} entries.")
        for constraint in self.constraints:
            self._check_row(constraint.coefficients)

    @property
    def variable_count(self) -> int:
        return self.objective.size

    def _check_row(self, coefficients: np.ndarray) -> None:
        if coefficients.size != self.variable_count:
            raise MalformedProgram(
                f"Constraint has {coefficients.size} coefficients, objective has {self.variable_count}."
            )

    def add_constraint(self, coefficients: Sequence[float], relation: Relation, bound: float) -> None:
        if not isinstance(relation, Relation):
            raise MalformedProgram(f"Unknown relation {relation!r}.")
        row = np.asarray(coefficients, dtype=float).reshape(-1)
        self._check_row(row)
        self.constraints.append(Constraint(row, relation, float(bound)))

    def set_bounds(self, j: int, lower: Optional[float], upper: Optional[float]) -> None:
        if lower is not None and upper is not None and upper < lower:
            raise MalformedProgram(f"Variable {j}: upper bound {upper} below lower bound {lower}.")
        self.lower_bounds[j] = lower
        self.upper_bounds[j] = upper


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    value: float
    point: Optional[np.ndarray]
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


def transport_problem(source: Sequence[float], target: Sequence[float], cost: np.ndarray) -> LinearProgram:
    """
    Kantorovich transport LP: plan[i, j] >= 0, row sums = source,
    column sums = target, minimize sum cost[i, j] * plan[i, j].
    Variables are the plan entries in row-major order.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    cost = np.asarray(cost, dtype=float)
    p, q = source.size, target.size
    if cost.shape != (p, q):
        raise MalformedProgram(f"Cost matrix has shape {cost.shape}, expected {(p, q)}.")

    lp = LinearProgram(objective=cost.reshape(-1))
    for i in range(p):
        row = np.zeros((p, q))
        row[i, :] = 1.0
        lp.add_constraint(row.reshape(-1), Relation.EQ, source[i])
    for j in range(q):
        row = np.zeros((p, q))
        row[:, j] = 1.0
        lp.add_constraint(row.reshape(-1), Relation.EQ, target[j])
    return lp


# ----------------------------------------------------------------------
# Standard form
# ----------------------------------------------------------------------

def _standardize(lp: LinearProgram) -> Tuple[np.ndarray, np.ndarray, List[Relation], np.ndarray, float, np.ndarray, np.ndarray]:
    """
    Substitute x = M @ s + x0 with s >= 0. Returns rows, rhs, relations,
    standard cost, objective constant, M and x0.
    """
    n = lp.variable_count
    columns: List[np.ndarray] = []
    x0 = np.zeros(n)
    extra_rows: List[Tuple[int, float]] = []  # (standard column, upper bound) rows s_k <= u

    for j in range(n):
        lower, upper = lp.lower_bounds[j], lp.upper_bounds[j]
        unit = np.zeros(n)
        unit[j] = 1.0
        if lower is not None:
            x0[j] = lower
            columns.append(unit)
            if upper is not None:
                extra_rows.append((len(columns) - 1, upper - lower))
        elif upper is not None:
            x0[j] = upper
            columns.append(-unit)
        else:
            columns.append(unit)
            columns.append(-unit)

    M = np.column_stack(columns) if columns else np.zeros((n, 0))
    width = M.shape[1]

    rows: List[np.ndarray] = []
    rhs: List[float] = []
    relations: List[Relation] = []
    for constraint in lp.constraints:
        rows.append(constraint.coefficients @ M)
        rhs.append(constraint.bound - float(constraint.coefficients @ x0))
        relations.append(constraint.relation)
    for column, bound in extra_rows:
        row = np.zeros(width)
        row[column] = 1.0
        rows.append(row)
        rhs.append(bound)
        relations.append(Relation.LE)

    A = np.vstack(rows) if rows else np.zeros((0, width))
    cost = lp.objective @ M
    constant = float(lp.objective @ x0)
    return A, np.array(rhs, dtype=float), relations, cost, constant, M, x0


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]


def _run_simplex(tableau: np.ndarray, basis: List[int], tol: float, max_iterations: int) -> Tuple[bool, int]:
    """
    Iterate on a tableau whose last row holds reduced costs (rhs = -z).
    Bland's rule for both entering and leaving choices.
    Returns (bounded, iterations).
    """
    m = tableau.shape[0] - 1
    iterations = 0
    while True:
        reduced = tableau[-1, :-1]
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return True, iterations
        entering = int(candidates[0])

        column = tableau[:m, entering]
        positive = np.flatnonzero(column > tol)
        if positive.size == 0:
            return False, iterations
        ratios = tableau[positive, -1] / column[positive]
        best = ratios.min()
        tied = positive[ratios <= best + tol]
        leaving = int(min(tied, key=lambda i: basis[i]))

        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
        iterations += 1
        if iterations > max_iterations:
            raise NumericalFailure(f"Simplex exceeded {max_iterations} pivots.")
        if not np.all(np.isfinite(tableau)):
            raise NumericalFailure("Non-finite entries in simplex tableau.")


def _check_feasible(lp: LinearProgram, x: np.ndarray, tol: float) -> None:
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    for index, constraint in enumerate(lp.constraints):
        lhs = float(constraint.coefficients @ x)
        slack_tol = tol * (1.0 + abs(constraint.bound) + np.abs(constraint.coefficients).sum() * scale)
        if constraint.relation == Relation.LE:
            violation = lhs - constraint.bound
        elif constraint.relation == Relation.GE:
            violation = constraint.bound - lhs
        else:
            violation = abs(lhs - constraint.bound)
        if violation > slack_tol:
            raise NumericalFailure(f"Constraint {index} violated by {violation:.3e} at reported optimum.")
    for j in range(lp.variable_count):
        lower, upper = lp.lower_bounds[j], lp.upper_bounds[j]
        if lower is not None and x[j] < lower - tol * scale:
            raise NumericalFailure(f"Variable {j} below its lower bound at reported optimum.")
        if upper is not None and x[j] > upper + tol * scale:
            raise NumericalFailure(f"Variable {j} above its upper bound at reported optimum.")


def solve(lp: LinearProgram, tolerance: Optional[float] = None, max_iterations: Optional[int] = None) -> LpSolution:
    """Two-phase simplex; statuses OPTIMAL, INFEASIBLE or UNBOUNDED."""
    tol = config.get_lp_tolerance() if tolerance is None else tolerance
    budget = config.get_lp_max_iterations() if max_iterations is None else max_iterations

    A, b, relations, cost, constant, M, x0 = _standardize(lp)
    m, width = A.shape

    # Non-negative right-hand sides
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            if relations[i] == Relation.LE:
                relations[i] = Relation.GE
            elif relations[i] == Relation.GE:
                relations[i] = Relation.LE

    slack_rows = [i for i in range(m) if relations[i] != Relation.EQ]
    artificial_rows = [i for i in range(m) if relations[i] != Relation.LE]
    n_slack = len(slack_rows)
    n_art = len(artificial_rows)
    total = width + n_slack + n_art

    tableau = np.zeros((m + 1, total + 1))
    tableau[:m, :width] = A
    tableau[:m, -1] = b
    basis = [-1] * m
    for k, i in enumerate(slack_rows):
        tableau[i, width + k] = 1.0 if relations[i] == Relation.LE else -1.0
        if relations[i] == Relation.LE:
            basis[i] = width + k
    for k, i in enumerate(artificial_rows):
        tableau[i, width + n_slack + k] = 1.0
        basis[i] = width + n_slack + k

    # Phase 1: minimize the sum of artificials
    iterations = 0
    if n_art:
        tableau[-1, width + n_slack:total] = 1.0
        for i in artificial_rows:
            tableau[-1] -= tableau[i]
        _, used = _run_simplex(tableau, basis, tol, budget)
        iterations += used
        infeasibility = -tableau[-1, -1]
        if infeasibility > tol * (1.0 + b.sum()):
            logger.debug("LP infeasible (phase 1 residual %.3e after %d pivots)", infeasibility, iterations)
            return LpSolution(LpStatus.INFEASIBLE, float("nan"), None, iterations)

        # Drive artificials out of the basis, dropping redundant rows
        redundant = []
        for i in range(m):
            if basis[i] >= width + n_slack:
                candidates = np.flatnonzero(np.abs(tableau[i, :width + n_slack]) > tol)
                if candidates.size:
                    _pivot(tableau, i, int(candidates[0]))
                    basis[i] = int(candidates[0])
                else:
                    redundant.append(i)
        keep = [i for i in range(m) if i not in redundant]
        tableau = np.vstack([tableau[keep][:, list(range(width + n_slack)) + [total]], np.zeros((1, width + n_slack + 1))])
        basis = [basis[i] for i in keep]
        m = len(keep)

    # Phase 2: original cost over structural and slack columns
    tableau[-1, :] = 0.0
    tableau[-1, :width] = cost
    for i in range(m):
        if tableau[-1, basis[i]] != 0.0:
            tableau[-1] -= tableau[-1, basis[i]] * tableau[i]
    bounded, used = _run_simplex(tableau, basis, tol, budget)
    iterations += used
    if not bounded:
        logger.debug("LP unbounded after %d pivots", iterations)
        return LpSolution(LpStatus.UNBOUNDED, float("-inf"), None, iterations)

    standard = np.zeros(tableau.shape[1] - 1)
    for i in range(m):
        standard[basis[i]] = tableau[i, -1]
    x = M @ standard[:width] + x0
    value = float(lp.objective @ x)

    _check_feasible(lp, x, tol)
    logger.debug("LP optimal value %.12g after %d pivots", value, iterations)
    return LpSolution(LpStatus.OPTIMAL, value, x, iterations)
