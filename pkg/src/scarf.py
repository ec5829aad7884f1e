"""
Finitely generated NTU games, balanced collections and core points.

scarf_core_point runs the primitive-set (ordinal/cardinal) pivoting method:
the cardinal side is an exact lexicographic simplex step on the coalition
incidence matrix, the ordinal side walks utility-rank bases. The method ends
on a basis that is both feasible (a balanced collection) and ordinal (no
coalition generator beats its payoff vector on all members).
"""
import itertools
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from errors import BudgetExceeded, CoreNotAchievable, PivotBudgetExhausted, ScarfError, StructuralError
from lp_engine import convex_combination
from utils import ConfigManager

logger = logging.getLogger(__name__)

Coalition = tuple[int, ...]

_BALANCE_TOLERANCE = 1e-10
_DOMINATION_TOLERANCE = 1e-9


def coalition_key(coalition: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Canonical coalition order: by size, then lexicographically."""
    return (len(coalition), tuple(coalition))


@dataclass(frozen=True, slots=True)
class BalancedCollection:
    coalitions: tuple[Coalition, ...]
    weights: tuple[float, ...]

    def to_dict(self) -> dict:
        return {'coalitions': [list(c) for c in self.coalitions], 'weights': list(self.weights)}


def is_balanced_collection(
    coalitions: Sequence[Sequence[int]],
    weights: Sequence[float],
    n_players: int,
    tolerance: float = _BALANCE_TOLERANCE,
) -> bool:
    """True iff every player's memberships carry total weight one."""
    if len(coalitions) != len(weights):
        raise StructuralError("one weight per coalition is required")
    if any(w <= 0 for w in weights):
        raise StructuralError("balancing weights must be positive")
    coverage = np.zeros(n_players)
    for coalition, weight in zip(coalitions, weights, strict=True):
        for j in coalition:
            if not 0 <= j < n_players:
                return False
            coverage[j] += weight
    return bool(np.all(np.abs(coverage - 1.0) <= tolerance))


def all_coalitions(n_players: int) -> list[Coalition]:
    return [
        c for size in range(1, n_players + 1)
        for c in itertools.combinations(range(n_players), size)
    ]


def enumerate_balanced_collections(
    n_players: int, max_size: int | None = None, budget: int | None = None
) -> list[BalancedCollection]:
    """Minimal balanced collections with at most `max_size` coalitions.

    A family is minimal balanced iff its incidence vectors are linearly
    independent and the balancing system has a strictly positive solution.
    """
    max_size = n_players if max_size is None else min(max_size, n_players)
    budget = ConfigManager.value_or(budget, 'scan_options', 'grid_budget')
    candidates = all_coalitions(n_players)
    families = sum(comb(len(candidates), r) for r in range(1, max_size + 1))
    if families > budget:
        raise BudgetExceeded("balanced collection families", families, budget)

    found = []
    for size in range(1, max_size + 1):
        for family in itertools.combinations(candidates, size):
            incidence = np.zeros((n_players, size))
            for k, coalition in enumerate(family):
                incidence[list(coalition), k] = 1.0
            if np.linalg.matrix_rank(incidence) < size:
                continue
            weights, *_ = np.linalg.lstsq(incidence, np.ones(n_players), rcond=None)
            if not np.allclose(incidence @ weights, 1.0, atol=_BALANCE_TOLERANCE):
                continue
            if np.all(weights > _BALANCE_TOLERANCE):
                found.append(BalancedCollection(family, tuple(float(w) for w in weights)))
    return found


@dataclass(slots=True)
class NTUGame:
    """Finitely generated game: V(S) is the comprehensive hull of the rows of
    generators[S] on S-coordinates. Coalitions missing from `generators` are
    not admissible and carry V(S) = nonpositive orthant."""
    n_players: int
    generators: dict[Coalition, NDArray[np.float64]] = field(default_factory=dict)
    witnesses: dict[Coalition, list[Any]] = field(default_factory=dict)
    labels: tuple[str, ...] = ()

    @property
    def grand(self) -> Coalition:
        return tuple(range(self.n_players))

    def admissible(self) -> list[Coalition]:
        return sorted(self.generators, key=coalition_key)

    def add_generator(self, coalition: Iterable[int], payoff: ArrayLike, witness: Any = None) -> int:
        """Append a payoff row (length n_players); returns its index."""
        key = tuple(sorted(coalition))
        row = np.asarray(payoff, dtype=float).reshape(1, self.n_players)
        existing = self.generators.get(key)
        self.generators[key] = row if existing is None else np.vstack([existing, row])
        self.witnesses.setdefault(key, []).append(witness)
        return self.generators[key].shape[0] - 1

    @classmethod
    def from_payoffs(cls, n_players: int, payoffs: dict[Iterable[int], Sequence[Sequence[float]]]) -> 'NTUGame':
        """Build from per-coalition generators listed on the members' coordinates."""
        game = cls(n_players)
        for coalition, rows in payoffs.items():
            members = tuple(sorted(coalition))
            for row in rows:
                full = np.zeros(n_players)
                full[list(members)] = row
                game.add_generator(members, full)
        return game

    @property
    def total_generators(self) -> int:
        return sum(g.shape[0] for g in self.generators.values())

    def dominating_generator(
        self, v: ArrayLike, tolerance: float = _DOMINATION_TOLERANCE
    ) -> tuple[Coalition, int] | None:
        """An admissible coalition generator strictly better than v on all members."""
        v = np.asarray(v, dtype=float)
        for coalition in self.admissible():
            members = list(coalition)
            rows = self.generators[coalition][:, members]
            better = np.all(rows > v[members] + tolerance, axis=1)
            if better.any():
                return coalition, int(np.argmax(better))
        return None

    def pruned(self) -> 'NTUGame':
        """Same game with weakly dominated generators removed per coalition."""
        game = NTUGame(self.n_players, labels=self.labels)
        for coalition in self.admissible():
            keep = pareto_front(self.generators[coalition][:, list(coalition)])
            game.generators[coalition] = self.generators[coalition][keep]
            witnesses = self.witnesses.get(coalition, [])
            game.witnesses[coalition] = [witnesses[k] if k < len(witnesses) else None for k in keep]
        return game


def pareto_front(points: NDArray[np.float64]) -> list[int]:
    """Indices of the rows no other row weakly dominates (first copy of ties kept)."""
    order = sorted(range(points.shape[0]), key=lambda k: (-float(points[k].sum()), k))
    kept: list[int] = []
    for k in order:
        if kept:
            front = points[kept]
            if np.any(np.all(front >= points[k], axis=1)):
                continue
        kept.append(k)
    return sorted(kept)


@dataclass(slots=True)
class CorePoint:
    """Terminal payoff vector with the balanced collection that supports it.

    columns[k] names the generator behind collection.coalitions[k]; slack
    columns appear as ((h,), -1).
    """
    payoffs: NDArray[np.float64]
    collection: BalancedCollection
    columns: list[tuple[Coalition, int]]
    slack_players: tuple[int, ...]
    pivots: int
    start: int

    def to_dict(self) -> dict:
        return {
            'payoffs': self.payoffs.tolist(),
            'collection': self.collection.to_dict(),
            'columns': [{'coalition': list(c), 'generator': g} for c, g in self.columns],
            'slack_players': list(self.slack_players),
            'pivots': self.pivots,
            'start': self.start,
        }


@dataclass(slots=True)
class _Tableau:
    """Columns of the pivoting problem: n slacks, then one per generator."""
    n: int
    columns: list[tuple[Coalition, int]]
    payoff: NDArray[np.float64]  # (n, m); NaN where the player is outside the coalition
    rank: NDArray[np.int64]  # (n, m) utility ranks, distinct per row

    def members(self, k: int) -> Coalition:
        return self.columns[k][0]


def _build_tableau(ntu: NTUGame) -> _Tableau:
    n = ntu.n_players
    columns: list[tuple[Coalition, int]] = [((h,), -1) for h in range(n)]
    for coalition in ntu.admissible():
        columns.extend((coalition, g) for g in range(ntu.generators[coalition].shape[0]))
    m = len(columns)
    payoff = np.full((n, m), np.nan)
    for k in range(n, m):
        coalition, g = columns[k]
        for h in coalition:
            payoff[h, k] = ntu.generators[coalition][g, h]

    rank = np.empty((n, m), dtype=np.int64)
    for h in range(n):
        def key(k: int) -> tuple:
            if k < n:
                return (0, 0.0, k) if k == h else (3, 0.0, k)
            if h in columns[k][0]:
                return (1, float(payoff[h, k]), k)
            return (2, 0.0, k)
        for position, k in enumerate(sorted(range(m), key=key)):
            rank[h, k] = position
    return _Tableau(n, columns, payoff, rank)


def _incidence(tableau: _Tableau, k: int) -> list[int]:
    return [1 if h in tableau.members(k) else 0 for h in range(tableau.n)]


def _cardinal_pivot(
    tableau: _Tableau, basis: list[int], inverse: list[list[Fraction]], entering: int
) -> int:
    """Exact lexicographic ratio test; returns the column leaving the basis."""
    n = tableau.n
    column = _incidence(tableau, entering)
    direction = [sum((inverse[r][i] for i in range(n) if column[i]), Fraction(0)) for r in range(n)]
    rows = [r for r in range(n) if direction[r] > 0]
    if not rows:
        raise ScarfError(f"column {entering} admits no ratio test row")

    def ratio(r: int) -> tuple[Fraction, ...]:
        d = direction[r]
        return (sum(inverse[r], Fraction(0)) / d, *(inverse[r][i] / d for i in range(n)))

    row = min(rows, key=ratio)
    pivot = direction[row]
    inverse[row] = [value / pivot for value in inverse[row]]
    for r in range(n):
        if r != row and direction[r] != 0:
            factor = direction[r]
            inverse[r] = [a - factor * b for a, b in zip(inverse[r], inverse[row], strict=True)]
    leaving = basis[row]
    basis[row] = entering
    return leaving


def _row_minimizers(tableau: _Tableau, columns: Sequence[int]) -> list[int]:
    ranks = tableau.rank[:, list(columns)]
    return [columns[k] for k in np.argmin(ranks, axis=1)]


def _ordinal_pivot(tableau: _Tableau, ordinal: list[int], leaving: int) -> int:
    """Swap `leaving` out of the ordinal basis; returns the column brought in."""
    n = tableau.n
    before = _row_minimizers(tableau, ordinal)
    remaining = [k for k in ordinal if k != leaving]
    after = _row_minimizers(tableau, remaining)
    freed_row = before.index(leaving)
    doubled = after[freed_row]
    old_row = next(h for h in range(n) if before[h] == doubled)

    others = [h for h in range(n) if h != old_row]
    floor = np.array([tableau.rank[h, after[h]] for h in others])
    allowed = np.all(tableau.rank[others] > floor[:, None], axis=0)
    allowed[remaining] = False
    candidates = np.flatnonzero(allowed)
    if candidates.size == 0:
        raise ScarfError(f"no column can replace {leaving} in the ordinal basis")
    entering = int(candidates[np.argmax(tableau.rank[old_row, candidates])])
    ordinal[:] = remaining + [entering]
    return entering


def _terminal_payoffs(tableau: _Tableau, basis: Sequence[int]) -> tuple[NDArray[np.float64], tuple[int, ...]]:
    n = tableau.n
    payoffs = np.empty(n)
    slack_players = []
    for h in range(n):
        values = [tableau.payoff[h, k] for k in basis if k >= n and h in tableau.members(k)]
        if h in basis:
            slack_players.append(h)
            row = tableau.payoff[h, n:]
            floor = float(np.nanmin(row)) if row.size and not np.all(np.isnan(row)) else 0.0
            payoffs[h] = min(0.0, floor)
        else:
            payoffs[h] = min(values)
    return payoffs, tuple(slack_players)


def _run_from(tableau: _Tableau, distinguished: int, budget: int) -> CorePoint:
    n = tableau.n
    basis = list(range(n))
    inverse = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    first = max(range(n, len(tableau.columns)), key=lambda k: tableau.rank[distinguished, k])
    ordinal = [h for h in range(n) if h != distinguished] + [first]
    entering = first
    pivots = 0
    while True:
        pivots += 1
        if pivots > budget:
            raise PivotBudgetExhausted(budget, sorted(ordinal))
        leaving = _cardinal_pivot(tableau, basis, inverse, entering)
        if leaving == distinguished:
            break
        entering = _ordinal_pivot(tableau, ordinal, leaving)
        if entering == distinguished:
            break

    weights = [sum(row, Fraction(0)) for row in inverse]
    payoffs, slack_players = _terminal_payoffs(tableau, basis)
    coalitions, coalition_weights, columns = [], [], []
    for position, k in enumerate(basis):
        if weights[position] <= 0:
            continue
        coalitions.append(tableau.members(k))
        coalition_weights.append(float(weights[position]))
        columns.append(tableau.columns[k])
    logger.debug(f"pivoting from start {distinguished} ended after {pivots} steps on {basis}")
    return CorePoint(
        payoffs,
        BalancedCollection(tuple(coalitions), tuple(coalition_weights)),
        columns,
        slack_players,
        pivots,
        distinguished,
    )


def is_achievable(ntu: NTUGame, v: ArrayLike, tolerance: float | None = None) -> bool:
    """Does a convex combination of grand-coalition generators weakly dominate v?"""
    tolerance = ConfigManager.value_or(tolerance, 'solver_options', 'feasibility_tolerance')
    v = np.asarray(v, dtype=float)
    rows = ntu.generators.get(ntu.grand)
    if rows is None or rows.shape[0] == 0:
        return False
    if np.any(np.all(rows >= v - tolerance, axis=1)):
        return True
    return convex_combination(rows, v, tolerance) is not None


def scarf_core_point(
    ntu: NTUGame,
    achievable: Callable[[CorePoint], bool] | None = None,
    budget: int | None = None,
) -> CorePoint:
    """A payoff vector no admissible coalition improves upon, reached by pivoting.

    Every distinguished starting slack is tried in turn until the terminal
    payoff passes the achievability test (default: convex combination of
    grand-coalition generators). A game that fails balancedness can end every
    start on an unreachable payoff, which raises CoreNotAchievable;
    PivotBudgetExhausted only guards the pivot count of a single start.
    """
    if ntu.total_generators == 0:
        raise ScarfError("game has no admissible coalition with generators")
    factor = ConfigManager.get_config_value('scarf_options', 'pivot_budget_factor')
    budget = budget if budget is not None else factor * ntu.n_players * max(ntu.total_generators, 1) ** 2
    test = achievable if achievable is not None else (lambda point: is_achievable(ntu, point.payoffs))

    tableau = _build_tableau(ntu)
    rejected = []
    for distinguished in range(ntu.n_players):
        point = _run_from(tableau, distinguished, budget)
        if test(point):
            return point
        logger.warning(
            f"terminal payoff {point.payoffs.tolist()} from start {distinguished} is not achievable; "
            f"restarting"
        )
        rejected.append(point.payoffs.tolist())
    raise CoreNotAchievable(rejected)


@dataclass(slots=True)
class ScarfConditionsReport:
    closed_nonempty: bool = True
    comprehensive_bounded: bool = True
    balanced: bool = True
    checked: int = 0
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.closed_nonempty and self.comprehensive_bounded and self.balanced

    def merge(self, other: 'ScarfConditionsReport') -> None:
        """Fold in a later check of the same game."""
        self.closed_nonempty = self.closed_nonempty and other.closed_nonempty
        self.comprehensive_bounded = self.comprehensive_bounded and other.comprehensive_bounded
        self.balanced = self.balanced and other.balanced
        self.checked += other.checked
        self.failures.extend(f for f in other.failures if f not in self.failures)
        self.warnings.extend(w for w in other.warnings if w not in self.warnings)

    def to_dict(self) -> dict:
        return {
            'closed_nonempty': self.closed_nonempty,
            'comprehensive_bounded': self.comprehensive_bounded,
            'balanced': self.balanced,
            'checked': self.checked,
            'failures': list(self.failures),
            'warnings': list(self.warnings),
        }


def check_scarf_conditions(
    ntu: NTUGame,
    collections: Sequence[BalancedCollection] | None = None,
    samples_per_collection: int = 64,
) -> ScarfConditionsReport:
    """Structural checks plus an empirical balancedness test.

    For each balanced collection, payoff vectors are formed as component-wise
    minima of one generator per coalition (zero for coalitions that are not
    admissible) and must be reachable by the grand coalition.
    """
    report = ScarfConditionsReport()
    for coalition in ntu.admissible():
        rows = ntu.generators[coalition]
        if rows.shape[0] == 0:
            report.closed_nonempty = False
            report.failures.append(f"V{list(coalition)} has no generators")
        elif not np.all(np.isfinite(rows[:, list(coalition)])):
            report.comprehensive_bounded = False
            report.failures.append(f"V{list(coalition)} has non-finite generators")
        elif np.any(rows[:, list(coalition)] < 0):
            report.warnings.append(f"V{list(coalition)} has negative generator payoffs")
    if ntu.grand not in ntu.generators or ntu.generators[ntu.grand].shape[0] == 0:
        report.closed_nonempty = False
        report.failures.append("the grand coalition has no generators")
    if not report.closed_nonempty:
        report.balanced = False
        return report

    if collections is None:
        collections = enumerate_balanced_collections(ntu.n_players)
    for collection in collections:
        choices = []
        for coalition in collection.coalitions:
            rows = ntu.generators.get(tuple(coalition))
            choices.append(range(rows.shape[0]) if rows is not None else [None])
        for pick in itertools.islice(itertools.product(*choices), samples_per_collection):
            v = np.full(ntu.n_players, np.inf)
            for coalition, g in zip(collection.coalitions, pick, strict=True):
                for j in coalition:
                    value = 0.0 if g is None else ntu.generators[tuple(coalition)][g, j]
                    v[j] = min(v[j], value)
            report.checked += 1
            if not is_achievable(ntu, v):
                report.balanced = False
                report.failures.append(
                    f"collection {[list(c) for c in collection.coalitions]} yields "
                    f"{v.tolist()} outside V(J)"
                )
                break
    return report


def brute_force_core(
    ntu: NTUGame, resolution: float, budget: int | None = None
) -> list[tuple[float, ...]]:
    """Every grid payoff vector in V(J) that no admissible coalition dominates."""
    budget = ConfigManager.value_or(budget, 'scan_options', 'grid_budget')
    rows = ntu.generators.get(ntu.grand)
    if rows is None or rows.shape[0] == 0:
        return []
    step = Fraction(str(resolution))
    axes = []
    for j in range(ntu.n_players):
        top = Fraction(float(rows[:, j].max())).limit_denominator(10**9)
        values = [k * step for k in range(int(top / step) + 1)]
        if not values or values[-1] != top:
            values.append(top)
        axes.append([float(value) for value in values if value >= 0])
    size = int(np.prod([len(a) for a in axes]))
    if size > budget:
        raise BudgetExceeded("payoff grid", size, budget)
    return [
        point for point in itertools.product(*axes)
        if ntu.dominating_generator(point) is None and is_achievable(ntu, point)
    ]


def tu_core_contains(
    values: dict[Iterable[int], float], v: ArrayLike, n_players: int, tolerance: float = 1e-9
) -> bool:
    """Membership in the transferable-utility core given coalition values."""
    v = np.asarray(v, dtype=float)
    worth = {tuple(sorted(c)): float(x) for c, x in values.items()}
    grand = tuple(range(n_players))
    if grand in worth and v.sum() > worth[grand] + tolerance:
        return False
    return all(v[list(c)].sum() >= x - tolerance for c, x in worth.items())
