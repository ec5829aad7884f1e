"""
Linear-programming layer.

A small incremental model builder over scipy.optimize.linprog: variables are
allocated in named groups, constraints are added as sparse rows, and the
model is solved with the HiGHS backend selected in the config.
convex_combination answers the recurring question whether a convex
combination of finitely many points reaches or dominates a target.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from errors import SolverError
from utils import ConfigManager

logger = logging.getLogger(__name__)

# linprog status codes: 0 optimal, 1 iteration limit, 2 infeasible, 3 unbounded
_OPTIMAL = 0


@dataclass(slots=True)
class LPResult:
    """Outcome of a solved model; `x` is None unless the model was feasible."""
    status: int
    objective: float | None
    x: NDArray[np.float64] | None
    message: str = ''

    @property
    def feasible(self) -> bool:
        return self.status == _OPTIMAL


@dataclass(slots=True)
class LinearProgram:
    """Incrementally built LP: minimize c.x subject to sparse rows and bounds."""
    n_variables: int = 0
    lower: list[float | None] = field(default_factory=list)
    upper: list[float | None] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    _ub_rows: list[dict[int, float]] = field(default_factory=list)
    _ub_rhs: list[float] = field(default_factory=list)
    _eq_rows: list[dict[int, float]] = field(default_factory=list)
    _eq_rhs: list[float] = field(default_factory=list)

    def add_variables(
        self, count: int, lower: float | None = 0.0, upper: float | None = None
    ) -> range:
        """Allocate `count` variables and return their index range."""
        start = self.n_variables
        self.n_variables += count
        self.lower.extend([lower] * count)
        self.upper.extend([upper] * count)
        return range(start, self.n_variables)

    def add_variable(self, lower: float | None = 0.0, upper: float | None = None) -> int:
        return self.add_variables(1, lower, upper)[0]

    def add_le(self, row: dict[int, float], rhs: float) -> None:
        """sum(row[k] * x[k]) <= rhs"""
        self._ub_rows.append(row)
        self._ub_rhs.append(float(rhs))

    def add_ge(self, row: dict[int, float], rhs: float) -> None:
        self.add_le({k: -v for k, v in row.items()}, -rhs)

    def add_eq(self, row: dict[int, float], rhs: float) -> None:
        self._eq_rows.append(row)
        self._eq_rhs.append(float(rhs))

    def maximize(self, index: int, weight: float = 1.0) -> None:
        self.objective[index] = self.objective.get(index, 0.0) - weight

    @property
    def n_constraints(self) -> int:
        return len(self._ub_rows) + len(self._eq_rows)

    def _matrix(self, rows: list[dict[int, float]]) -> csr_matrix | None:
        if not rows:
            return None
        data, row_idx, col_idx = [], [], []
        for r, row in enumerate(rows):
            for c, v in row.items():
                if v != 0.0:
                    data.append(v)
                    row_idx.append(r)
                    col_idx.append(c)
        return csr_matrix((data, (row_idx, col_idx)), shape=(len(rows), self.n_variables))

    def solve(self, method: str | None = None) -> LPResult:
        """Solve the model; unbounded or numerically failed models raise SolverError."""
        method = ConfigManager.value_or(method, 'solver_options', 'lp_method') or 'highs'
        c = np.zeros(self.n_variables)
        for k, v in self.objective.items():
            c[k] = v
        result = linprog(
            c,
            A_ub=self._matrix(self._ub_rows),
            b_ub=np.array(self._ub_rhs) if self._ub_rows else None,
            A_eq=self._matrix(self._eq_rows),
            b_eq=np.array(self._eq_rhs) if self._eq_rows else None,
            bounds=list(zip(self.lower, self.upper, strict=True)),
            method=method,
        )
        logger.debug(
            f"LP {self.n_variables} vars x {self.n_constraints} rows: "
            f"status {result.status} ({result.message})"
        )
        match result.status:
            case 0:
                return LPResult(result.status, float(result.fun), np.asarray(result.x), result.message)
            case 2:
                return LPResult(result.status, None, None, result.message)
            case 3:
                raise SolverError(f"unbounded linear program: {result.message}", result.status)
            case _:
                raise SolverError(f"linear program failed: {result.message}", result.status)


def convex_combination(
    points: ArrayLike, target: ArrayLike, tolerance: float = 0.0, exact: bool = False
) -> NDArray[np.float64] | None:
    """Weights on the rows of `points` whose convex combination reaches `target`.

    Componentwise the combination must weakly dominate target - tolerance, or
    equal target when `exact` is set. None when no such weights exist.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    target = np.asarray(target, dtype=float)
    if points.shape[0] == 0:
        return None
    lp = LinearProgram()
    weights = lp.add_variables(points.shape[0], lower=0.0)
    lp.add_eq({k: 1.0 for k in weights}, 1.0)
    for j in range(points.shape[1]):
        row = {k: float(points[g, j]) for g, k in enumerate(weights)}
        if exact:
            lp.add_eq(row, target[j])
        else:
            lp.add_ge(row, target[j] - tolerance)
    result = lp.solve()
    if not result.feasible:
        return None
    return np.clip(result.x[list(weights)], 0.0, None)
