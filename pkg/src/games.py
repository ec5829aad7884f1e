"""
Incomplete-information economies and normal-form games.

Problems carry a finite state space, per-player information partitions and
concave piecewise-linear utilities (pointwise minimum of affine pieces).
Profiles hold one vector per player per state; measurability follows the
delivery stage:

    ex post  -> measurable w.r.t. the join of all players' partitions
    interim  -> measurable w.r.t. the player's own partition
"""
import itertools
import logging
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb, prod

import numpy as np
from numpy.typing import ArrayLike, NDArray

from errors import BudgetExceeded, StructuralError, ValidationError
from lp_engine import convex_combination
from probability import (
    InformationStructure,
    Partition,
    StateSpace,
    conditional_expectation,
    expectation,
    is_measurable,
)
from utils import ConfigManager

logger = logging.getLogger(__name__)


class Delivery(Enum):
    """When contracts execute, which fixes strategy measurability."""
    EX_POST = 'ex_post'
    INTERIM = 'interim'


@dataclass(frozen=True, slots=True)
class AffinePiece:
    """coefficients . z + intercept"""
    coefficients: tuple[float, ...]
    intercept: float

    def __call__(self, z: NDArray[np.float64]) -> float:
        return float(np.dot(self.coefficients, z) + self.intercept)


@dataclass(frozen=True, slots=True)
class UtilitySpec:
    """Per-state concave piecewise-linear utility: the minimum over affine pieces."""
    pieces: tuple[tuple[AffinePiece, ...], ...]

    @property
    def n_states(self) -> int:
        return len(self.pieces)

    @property
    def dimension(self) -> int:
        return len(self.pieces[0][0].coefficients)

    @classmethod
    def linear(cls, coefficients: Sequence[Sequence[float]]) -> 'UtilitySpec':
        """One affine piece per state with zero intercept."""
        return cls(tuple(
            (AffinePiece(tuple(float(c) for c in row), 0.0),) for row in coefficients
        ))

    def matrix(self, w: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """(coefficient matrix, intercepts) of the pieces at state w."""
        pieces = self.pieces[w]
        coefficients = np.array([p.coefficients for p in pieces], dtype=float)
        intercepts = np.array([p.intercept for p in pieces], dtype=float)
        return coefficients, intercepts


def _column_matrix(values: ArrayLike) -> NDArray[np.float64]:
    """Rows of vectors; a flat sequence is read as one-dimensional rows."""
    array = np.asarray(values, dtype=float)
    if array.ndim == 0:
        return array.reshape(1, 1)
    if array.ndim == 1:
        return array.reshape(-1, 1)
    return array


def utility_eval(u: UtilitySpec, bundle: ArrayLike, w: int) -> float:
    """Evaluate u(bundle, w) as the minimum over the affine pieces at w."""
    z = np.atleast_1d(np.asarray(bundle, dtype=float))
    if z.shape != (u.dimension,):
        raise StructuralError(
            f"bundle has dimension {z.shape[0]}, utility expects {u.dimension}"
        )
    coefficients, intercepts = u.matrix(w)
    return float(np.min(coefficients @ z + intercepts))


@dataclass(frozen=True, slots=True, eq=False)
class Economy:
    """Pure exchange economy with state-dependent endowments."""
    space: StateSpace
    info: InformationStructure
    endowments: NDArray[np.float64]  # (players, states, goods)
    utilities: tuple[UtilitySpec, ...]
    delivery: Delivery = Delivery.INTERIM
    player_names: tuple[str, ...] = ()
    goods: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        endowments = np.asarray(self.endowments, dtype=float)
        if endowments.ndim != 3:
            raise StructuralError("endowments must be indexed (player, state, good)")
        object.__setattr__(self, 'endowments', endowments)
        if not self.player_names:
            object.__setattr__(
                self, 'player_names', tuple(str(i + 1) for i in range(endowments.shape[0]))
            )
        if not self.goods:
            object.__setattr__(
                self, 'goods', tuple(f"g{k + 1}" for k in range(endowments.shape[2]))
            )

    kind = 'economy'

    @property
    def n_players(self) -> int:
        return self.endowments.shape[0]

    @property
    def n_goods(self) -> int:
        return self.endowments.shape[2]

    def dimension(self, i: int) -> int:
        return self.n_goods

    def totals(self, coalition: Sequence[int] | None = None) -> NDArray[np.float64]:
        """Per-state resource totals of a coalition (default: everyone)."""
        members = range(self.n_players) if coalition is None else sorted(coalition)
        return self.endowments[list(members)].sum(axis=0)


@dataclass(frozen=True, slots=True, eq=False)
class NormalFormGame:
    """Game with polytopal action sets given by vertex lists."""
    space: StateSpace
    info: InformationStructure
    action_vertices: tuple[NDArray[np.float64], ...]  # per player (k_i, d_i)
    utilities: tuple[UtilitySpec, ...]  # over the concatenated joint action
    delivery: Delivery = Delivery.INTERIM
    player_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        vertices = tuple(_column_matrix(v) for v in self.action_vertices)
        object.__setattr__(self, 'action_vertices', vertices)
        if not self.player_names:
            object.__setattr__(
                self, 'player_names', tuple(str(i + 1) for i in range(len(vertices)))
            )

    kind = 'game'

    @property
    def n_players(self) -> int:
        return len(self.action_vertices)

    def dimension(self, i: int) -> int:
        return self.action_vertices[i].shape[1]

    @property
    def joint_dimension(self) -> int:
        return sum(v.shape[1] for v in self.action_vertices)

    def offsets(self) -> list[int]:
        """Start index of each player's action inside the joint action."""
        return list(itertools.accumulate(
            (v.shape[1] for v in self.action_vertices), initial=0
        ))[:-1]


Problem = Economy | NormalFormGame


def measurability_partition(problem: Problem, i: int) -> Partition:
    """The partition player i's strategy must be measurable with respect to."""
    match problem.delivery:
        case Delivery.INTERIM:
            return problem.info[i]
        case Delivery.EX_POST:
            return problem.info.join()


@dataclass(frozen=True, slots=True, eq=False)
class Profile:
    """One vector per player per state: values[i] has shape (states, d_i)."""
    values: tuple[NDArray[np.float64], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, 'values', tuple(_column_matrix(v) for v in self.values)
        )

    @property
    def n_players(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> NDArray[np.float64]:
        return self.values[i]

    @classmethod
    def from_blocks(
        cls, problem: Problem, blocks: Sequence[Sequence[ArrayLike]]
    ) -> 'Profile':
        """Build from one vector per measurability block per player."""
        values = []
        for i, player_blocks in enumerate(blocks):
            partition = measurability_partition(problem, i)
            if len(player_blocks) != len(partition):
                raise StructuralError(
                    f"player {i + 1} needs {len(partition)} block values, "
                    f"got {len(player_blocks)}"
                )
            array = np.empty((problem.space.size, problem.dimension(i)))
            for block, value in zip(partition.blocks, player_blocks, strict=True):
                array[sorted(block)] = np.asarray(value, dtype=float)
            values.append(array)
        return cls(tuple(values))

    @classmethod
    def constant(cls, problem: Problem, per_player: Sequence[ArrayLike]) -> 'Profile':
        """Every player uses the same vector at every state."""
        n_states = problem.space.size
        return cls(tuple(
            np.tile(np.atleast_1d(np.asarray(v, dtype=float)), (n_states, 1))
            for v in per_player
        ))

    @classmethod
    def endowment(cls, economy: Economy) -> 'Profile':
        return cls(tuple(economy.endowments[i].copy() for i in range(economy.n_players)))

    def replace(self, updates: Mapping[int, NDArray[np.float64]]) -> 'Profile':
        return Profile(tuple(
            np.asarray(updates[i], dtype=float) if i in updates else v
            for i, v in enumerate(self.values)
        ))

    def key(self, digits: int = 12) -> tuple:
        """Hashable rounded representation (dedupe, canonical ordering)."""
        return tuple(tuple(np.round(v, digits).ravel().tolist()) for v in self.values)

    def to_lists(self) -> list[list[list[float]]]:
        return [v.tolist() for v in self.values]

    @classmethod
    def from_lists(cls, data: Sequence) -> 'Profile':
        return cls(tuple(np.asarray(v, dtype=float) for v in data))


@dataclass(frozen=True, slots=True, eq=False)
class CoalitionProfile:
    """Per-member per-state vectors of a coalition's joint strategy."""
    coalition: tuple[int, ...]
    values: Mapping[int, NDArray[np.float64]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, 'coalition', tuple(self.coalition))
        object.__setattr__(
            self, 'values', {i: _column_matrix(v) for i, v in self.values.items()}
        )

    def complete(self, status_quo: Profile) -> Profile:
        """Members play their coalition strategy, everyone else the status quo."""
        return status_quo.replace(self.values)

    def to_dict(self) -> dict[str, list]:
        return {str(i): np.asarray(self.values[i]).tolist() for i in self.coalition}

    @classmethod
    def from_dict(cls, coalition: Sequence[int], data: Mapping[str, Sequence]) -> 'CoalitionProfile':
        members = tuple(sorted(coalition))
        return cls(members, {i: np.asarray(data[str(i)], dtype=float) for i in members})


@dataclass(slots=True)
class ValidationReport:
    """Violations make a problem unusable; warnings flag weakened hypotheses."""
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _validate_utilities(problem: Problem, report: ValidationReport) -> None:
    expected = problem.n_goods if isinstance(problem, Economy) else problem.joint_dimension
    if len(problem.utilities) != problem.n_players:
        report.violations.append(
            f"{len(problem.utilities)} utilities for {problem.n_players} players"
        )
        return
    for i, u in enumerate(problem.utilities):
        name = problem.player_names[i]
        if u.n_states != problem.space.size:
            report.violations.append(
                f"utility of player {name} covers {u.n_states} states, "
                f"expected {problem.space.size}"
            )
            continue
        for w, pieces in enumerate(u.pieces):
            if not pieces:
                report.violations.append(
                    f"utility of player {name} has no pieces at state "
                    f"{problem.space.states[w]}"
                )
            for piece in pieces:
                if len(piece.coefficients) != expected:
                    report.violations.append(
                        f"utility piece of player {name} at state "
                        f"{problem.space.states[w]} has dimension "
                        f"{len(piece.coefficients)}, expected {expected}"
                    )


def _sample_points(problem: Problem, w: int, limit: int = 4096) -> Iterator[NDArray[np.float64]]:
    """Vertices of the relevant feasible region at state w."""
    match problem:
        case Economy():
            upper = problem.totals()[w]
            for corner in itertools.product(*((0.0, float(u)) for u in upper)):
                yield np.array(corner)
        case NormalFormGame():
            combos = itertools.product(*(list(v) for v in problem.action_vertices))
            for joint in itertools.islice(combos, limit):
                yield np.concatenate(joint)


def validate_problem(problem: Problem) -> ValidationReport:
    """Check the standing hypotheses of a problem; never raises for content."""
    report = ValidationReport()
    space = problem.space
    if problem.info.n_players != problem.n_players:
        report.violations.append(
            f"{problem.info.n_players} partitions for {problem.n_players} players"
        )
        return report
    if problem.info.size != space.size:
        report.violations.append("partitions and state space disagree on state count")
        return report

    match problem:
        case Economy():
            e = problem.endowments
            if e.shape[1] != space.size:
                report.violations.append(
                    f"endowments cover {e.shape[1]} states, expected {space.size}"
                )
                return report
            if (e < 0).any():
                report.violations.append("endowments must be nonnegative")
            for i in range(problem.n_players):
                partition = measurability_partition(problem, i)
                if not is_measurable(e[i], partition):
                    which = (
                        f"P_{problem.player_names[i]}"
                        if problem.delivery is Delivery.INTERIM
                        else "the join partition"
                    )
                    report.violations.append(
                        f"endowment of player {problem.player_names[i]} "
                        f"not {which}-measurable"
                    )
        case NormalFormGame():
            for i, vertices in enumerate(problem.action_vertices):
                if vertices.size == 0 or vertices.shape[0] == 0:
                    report.violations.append(
                        f"action set of player {problem.player_names[i]} has no vertices"
                    )
                if vertices.ndim != 2 or vertices.shape[1] < 1:
                    report.violations.append(
                        f"action dimension of player {problem.player_names[i]} must be >= 1"
                    )

    _validate_utilities(problem, report)
    if not report.ok:
        return report

    for i, u in enumerate(problem.utilities):
        for w in range(space.size):
            for point in _sample_points(problem, w):
                if utility_eval(u, point, w) < 0:
                    report.warnings.append(
                        f"utility of player {problem.player_names[i]} is negative at "
                        f"state {space.states[w]} on the feasible region"
                    )
                    break
            else:
                continue
            break
    return report


def _in_convex_hull(point: NDArray[np.float64], vertices: NDArray[np.float64], tol: float) -> bool:
    weights = convex_combination(vertices, point, exact=True)
    if weights is None:
        return False
    return bool(np.allclose(vertices.T @ weights, point, atol=tol))


def validate_profile(problem: Problem, x: Profile) -> list[str]:
    """Measurability, shape and feasibility violations of a profile."""
    tol = ConfigManager.get_config_value('solver_options', 'feasibility_tolerance') or 1e-9
    violations: list[str] = []
    if x.n_players != problem.n_players:
        return [f"profile has {x.n_players} players, problem has {problem.n_players}"]
    for i in range(problem.n_players):
        name = problem.player_names[i]
        shape = (problem.space.size, problem.dimension(i))
        if x[i].shape != shape:
            violations.append(f"player {name} profile has shape {x[i].shape}, expected {shape}")
            continue
        if not is_measurable(x[i], measurability_partition(problem, i)):
            violations.append(f"strategy of player {name} violates measurability")
    if violations:
        return violations

    match problem:
        case Economy():
            if any((x[i] < -tol).any() for i in range(problem.n_players)):
                violations.append("allocations must be nonnegative")
            allocated = sum(x[i] for i in range(problem.n_players))
            if not np.allclose(allocated, problem.totals(), atol=tol, rtol=0):
                violations.append("allocation does not balance total endowments")
        case NormalFormGame():
            for i, vertices in enumerate(problem.action_vertices):
                for w in range(problem.space.size):
                    if not _in_convex_hull(x[i][w], vertices, 1e-7):
                        violations.append(
                            f"action of player {problem.player_names[i]} at state "
                            f"{problem.space.states[w]} lies outside the action set"
                        )
    return violations


def require_valid_profile(problem: Problem, x: Profile) -> None:
    violations = validate_profile(problem, x)
    if violations:
        raise ValidationError("invalid profile: " + "; ".join(violations), violations)


def coalition_feasible(economy: Economy, y: CoalitionProfile, tol: float = 1e-9) -> bool:
    """Per-state resource balance of a coalition strategy."""
    members = list(y.coalition)
    allocated = sum(np.asarray(y.values[i]) for i in members)
    return bool(
        np.allclose(allocated, economy.totals(members), atol=tol, rtol=0)
        and all((np.asarray(y.values[i]) >= -tol).all() for i in members)
    )


def state_utilities(problem: Problem, x: Profile, i: int) -> NDArray[np.float64]:
    """U_i(x)_w for every state."""
    u = problem.utilities[i]
    match problem:
        case Economy():
            return np.array([utility_eval(u, x[i][w], w) for w in range(problem.space.size)])
        case NormalFormGame():
            return np.array([
                utility_eval(u, np.concatenate([x[j][w] for j in range(problem.n_players)]), w)
                for w in range(problem.space.size)
            ])


def interim_utility(
    problem: Problem,
    x: Profile,
    i: int,
    conditioning: Partition | None = None,
) -> NDArray[np.float64]:
    """E(U_i(x) | F_i) per state (conditioning defaults to player i's partition)."""
    partition = conditioning if conditioning is not None else problem.info[i]
    return conditional_expectation(state_utilities(problem, x, i), partition, problem.space)


def ex_ante_utility(problem: Problem, x: Profile, i: int) -> float:
    """E(U_i(x)) over the whole state space."""
    return expectation(state_utilities(problem, x, i), problem.space)


def opponent_blocks(
    game: NormalFormGame, coalition: Sequence[int], states: frozenset[int]
) -> list[tuple[int, frozenset[int]]]:
    """(opponent, measurability block) pairs whose block meets the given states."""
    members = set(coalition)
    return [
        (j, block)
        for j in range(game.n_players) if j not in members
        for block in measurability_partition(game, j).blocks
        if block & states
    ]


def opponent_assignments(
    game: NormalFormGame, blocks: Sequence[tuple[int, frozenset[int]]]
) -> Iterator[tuple[int, ...]]:
    """Every vertex choice for the given opponent blocks (bounded by config)."""
    limit = ConfigManager.get_config_value('solver_options', 'vertex_enumeration_limit') or 100000
    count = prod(game.action_vertices[j].shape[0] for j, _ in blocks)
    if count > limit:
        raise BudgetExceeded("opponent vertex assignments", count, limit)
    return itertools.product(*(range(game.action_vertices[j].shape[0]) for j, _ in blocks))


def apply_assignment(
    game: NormalFormGame,
    x: Profile,
    blocks: Sequence[tuple[int, frozenset[int]]],
    assignment: Sequence[int],
) -> Profile:
    """Overwrite opponents' actions on their blocks with the chosen vertices."""
    updates: dict[int, NDArray[np.float64]] = {}
    for (j, block), vertex in zip(blocks, assignment, strict=True):
        array = updates.setdefault(j, x[j].copy())
        array[sorted(block)] = game.action_vertices[j][vertex]
    return x.replace(updates)


def guaranteed_interim_utility(
    game: NormalFormGame,
    y: CoalitionProfile,
    i: int,
    conditioning: Partition | None = None,
    status_quo: Profile | None = None,
) -> NDArray[np.float64]:
    """Worst case of E(U_i | F_i) over all admissible opponent profiles.

    A concave function on a product of polytopes attains its minimum at a
    vertex, so each conditioning block is settled by enumerating vertex
    choices for the opponent blocks that meet it.
    """
    if i not in y.coalition:
        raise StructuralError(f"player {i + 1} is not in the coalition")
    partition = conditioning if conditioning is not None else game.info[i]
    base = status_quo if status_quo is not None else Profile(tuple(
        np.tile(game.action_vertices[j][0], (game.space.size, 1))
        for j in range(game.n_players)
    ))
    x = y.complete(base)
    out = np.empty(game.space.size)
    for block in partition.blocks:
        blocks = opponent_blocks(game, y.coalition, block)
        best = np.inf
        for assignment in opponent_assignments(game, blocks):
            trial = apply_assignment(game, x, blocks, assignment)
            value = interim_utility(game, trial, i, partition)[min(block)]
            best = min(best, value)
        out[sorted(block)] = best
    return out


def _average_pieces(
    u: UtilitySpec, block: frozenset[int], space: StateSpace
) -> tuple[AffinePiece, ...]:
    """Pieces of the prior-weighted average of u over a block of states."""
    states = sorted(block)
    weights = np.array([space.prior[w] for w in states])
    weights = weights / weights.sum()
    pieces: dict[tuple, AffinePiece] = {}
    for combo in itertools.product(*(u.pieces[w] for w in states)):
        coefficients = sum(
            wt * np.asarray(p.coefficients) for wt, p in zip(weights, combo, strict=True)
        )
        intercept = float(sum(wt * p.intercept for wt, p in zip(weights, combo, strict=True)))
        piece = AffinePiece(tuple(float(c) for c in coefficients), intercept)
        pieces.setdefault((piece.coefficients, round(piece.intercept, 15)), piece)
    return tuple(pieces.values())


def restrict_to_field(problem: Problem, field_partition: Partition) -> Problem:
    """The same problem over the state space generated by a sub-field H.

    H must refine the join of the players' partitions; each H-block becomes a
    state carrying its prior mass, and utilities are averaged over the block.
    """
    join = problem.info.join()
    if field_partition.size != problem.space.size:
        raise StructuralError("field and problem disagree on the state count")
    if not field_partition.refines(join):
        raise StructuralError(
            "field must lie between the join of the players' fields and the full field"
        )
    if isinstance(problem, Economy):
        for i in range(problem.n_players):
            if not is_measurable(problem.endowments[i], field_partition):
                raise StructuralError(
                    f"endowment of player {problem.player_names[i]} is not measurable "
                    f"with respect to the field"
                )

    blocks = field_partition.blocks
    space = problem.space
    new_space = StateSpace(
        tuple('+'.join(space.states[w] for w in sorted(b)) for b in blocks),
        tuple(space.mass(b) for b in blocks),
    )
    index_of = {w: k for k, b in enumerate(blocks) for w in b}

    def restrict(partition: Partition) -> Partition:
        return Partition.from_blocks(
            ({index_of[w] for w in block} for block in partition.blocks), len(blocks)
        )

    info = InformationStructure(tuple(restrict(p) for p in problem.info.partitions))
    utilities = tuple(
        UtilitySpec(tuple(_average_pieces(u, b, space) for b in blocks))
        for u in problem.utilities
    )
    representatives = [min(b) for b in blocks]
    match problem:
        case Economy():
            return Economy(
                new_space, info, problem.endowments[:, representatives, :], utilities,
                problem.delivery, problem.player_names, problem.goods,
            )
        case NormalFormGame():
            return NormalFormGame(
                new_space, info, problem.action_vertices, utilities,
                problem.delivery, problem.player_names,
            )


def restrict_profile(x: Profile, field_partition: Partition) -> Profile:
    """Carry an H-measurable profile over to the restricted problem."""
    for i in range(x.n_players):
        if not is_measurable(x[i], field_partition):
            raise StructuralError(f"strategy of player {i + 1} is not field-measurable")
    representatives = [min(b) for b in field_partition.blocks]
    return Profile(tuple(v[representatives] for v in x.values))


def _exact(value: float) -> Fraction:
    return Fraction(value).limit_denominator(10**9)


def _grid_values(cap: Fraction, step: Fraction) -> list[Fraction]:
    """Multiples of step below cap, plus cap itself (the box boundary)."""
    values = []
    k = 0
    while k * step < cap:
        values.append(k * step)
        k += 1
    values.append(cap)
    return values


def _simplex_weights(k: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Compositions of `parts` into k nonnegative integers."""
    if k == 1:
        yield (parts,)
        return
    for first in range(parts + 1):
        for rest in _simplex_weights(k - 1, parts - first):
            yield (first, *rest)


def as_resolution(value: Fraction | float | str) -> Fraction:
    """Exact grid step; decimal strings and floats are read by their decimal text."""
    step = value if isinstance(value, Fraction) else Fraction(str(value))
    if step <= 0:
        raise StructuralError("resolution must be positive")
    return step


def _parts(step: Fraction) -> int:
    """Simplex subdivisions used for action grids."""
    return max(1, int(1 / step))


def _grid_blocks(
    problem: Problem, members: Sequence[int], states: frozenset[int]
) -> dict[int, list[frozenset[int]]]:
    """Each member's measurability blocks inside `states`, which must be a union of them."""
    blocks = {}
    for i in members:
        inside = [b for b in measurability_partition(problem, i).blocks if b <= states]
        if frozenset().union(*inside) != states:
            raise StructuralError(
                f"states {sorted(states)} are not a union of player "
                f"{problem.player_names[i]}'s measurability blocks"
            )
        blocks[i] = inside
    return blocks


def grid_size_estimate(
    problem: Problem,
    resolution: Fraction | float | str,
    members: Sequence[int] | None = None,
    states: Iterable[int] | None = None,
) -> int:
    """Upper bound on the number of grid strategies (product of per-block choices)."""
    step = as_resolution(resolution)
    members = tuple(range(problem.n_players)) if members is None else tuple(sorted(members))
    states = frozenset(range(problem.space.size)) if states is None else frozenset(states)
    blocks = _grid_blocks(problem, members, states)
    estimate = 1
    match problem:
        case Economy():
            totals = problem.totals(members)
            for i in members[:-1]:
                for block in blocks[i]:
                    for k in range(problem.n_goods):
                        cap = min(_exact(totals[w, k]) for w in block)
                        estimate *= len(_grid_values(cap, step))
        case NormalFormGame():
            parts = _parts(step)
            for i in members:
                k = problem.action_vertices[i].shape[0]
                estimate *= comb(parts + k - 1, k - 1) ** len(blocks[i])
    return estimate


def _allocation_grid(
    economy: Economy, members: tuple[int, ...], states: frozenset[int], step: Fraction
) -> Iterator[dict[int, NDArray[np.float64]]]:
    n_goods = economy.n_goods
    blocks = _grid_blocks(economy, members, states)
    totals = economy.totals(members)
    start = {w: [_exact(totals[w, k]) for k in range(n_goods)] for w in states}

    def assign(position: int, remaining: dict, chosen: dict) -> Iterator[dict]:
        i = members[position]
        array = economy.endowments[i].copy()
        if position == len(members) - 1:
            # The last member takes whatever is left, if that is measurable.
            for block in blocks[i]:
                first = remaining[min(block)]
                if any(remaining[w] != first for w in block):
                    return
                for w in block:
                    array[w] = [float(r) for r in first]
            yield {**chosen, i: array}
            return
        choices = [
            list(itertools.product(*(
                _grid_values(min(remaining[w][k] for w in block), step)
                for k in range(n_goods)
            )))
            for block in blocks[i]
        ]
        for combo in itertools.product(*choices):
            current = array.copy()
            rest = dict(remaining)
            for block, bundle in zip(blocks[i], combo, strict=True):
                for w in block:
                    current[w] = [float(b) for b in bundle]
                    rest[w] = [r - b for r, b in zip(remaining[w], bundle, strict=True)]
            yield from assign(position + 1, rest, {**chosen, i: current})

    yield from assign(0, start, {})


def _strategy_grid(
    game: NormalFormGame, members: tuple[int, ...], states: frozenset[int], step: Fraction
) -> Iterator[dict[int, NDArray[np.float64]]]:
    parts = _parts(step)
    blocks = _grid_blocks(game, members, states)
    per_member = []
    for i in members:
        vertices = game.action_vertices[i]
        actions = [
            np.asarray(weights, dtype=float) @ vertices / parts
            for weights in _simplex_weights(vertices.shape[0], parts)
        ]
        outside = np.tile(vertices[0], (game.space.size, 1))
        strategies = []
        for combo in itertools.product(actions, repeat=len(blocks[i])):
            array = outside.copy()
            for block, action in zip(blocks[i], combo, strict=True):
                array[sorted(block)] = action
            strategies.append(array)
        per_member.append(strategies)
    for combo in itertools.product(*per_member):
        yield dict(zip(members, combo, strict=True))


def coalition_grid(
    problem: Problem,
    members: Iterable[int],
    states: Iterable[int],
    resolution: Fraction | float | str,
    budget: int | None = None,
) -> Iterator[CoalitionProfile]:
    """Grid strategies of a coalition that are free on `states`.

    Outside `states` members keep their endowment (economies) or their first
    vertex (games). Economies balance the coalition's own resources per state.
    """
    step = as_resolution(resolution)
    members = tuple(sorted(set(members)))
    if not members:
        raise StructuralError("coalition must be nonempty")
    states = frozenset(states)
    budget = ConfigManager.value_or(budget, 'scan_options', 'grid_budget')
    estimate = grid_size_estimate(problem, step, members, states)
    generator = (
        _allocation_grid(problem, members, states, step) if isinstance(problem, Economy)
        else _strategy_grid(problem, members, states, step)
    )
    for count, values in enumerate(generator, start=1):
        if count > budget:
            raise BudgetExceeded(
                f"grid for coalition {[problem.player_names[i] for i in members]}",
                max(estimate, count), budget,
            )
        yield CoalitionProfile(members, values)


def profile_grid(
    problem: Problem,
    resolution: Fraction | float | str,
    budget: int | None = None,
) -> Iterator[Profile]:
    """Deterministic enumeration of feasible, measurable grid profiles."""
    players = range(problem.n_players)
    omega = range(problem.space.size)
    logger.debug(
        f"grid at resolution {as_resolution(resolution)}: at most "
        f"{grid_size_estimate(problem, resolution)} profiles"
    )
    for y in coalition_grid(problem, players, omega, resolution, budget):
        yield Profile(tuple(y.values[i] for i in players))
