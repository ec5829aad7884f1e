"""
Auxiliary games and the existence pipeline.

Each player i is split into auxiliary players (i, K), one per block K of
their information partition. An auxiliary profile y carries one strategy per
auxiliary player, supported on its block; L(y) sums them back into an
original profile. Coalitions of auxiliary players are admissible only when
they come from an original coalition S0 and one of its common-knowledge
events F. The finitely generated characteristic game over the admissible
coalitions is solved by pivoting, and the lifted profile is certified
against the interim core with exact blocking LPs.
"""
import itertools
import logging
import time
from collections.abc import Iterable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np
from numpy.typing import ArrayLike, NDArray

from blocking import (
    BlockingCertificate,
    CoreConcept,
    CoreVerdict,
    blocks_interim,
    certification_epsilon,
    coalitions,
    in_core,
)
from errors import InterimCoreError, StructuralError, ValidationError
from games import (
    CoalitionProfile,
    Economy,
    NormalFormGame,
    Problem,
    Profile,
    as_resolution,
    coalition_grid,
    grid_size_estimate,
    guaranteed_interim_utility,
    state_utilities,
    validate_problem,
)
from lp_engine import convex_combination
from probability import Event, common_knowledge_events
from scarf import (
    BalancedCollection,
    CorePoint,
    NTUGame,
    ScarfConditionsReport,
    check_scarf_conditions,
    enumerate_balanced_collections,
    scarf_core_point,
)
from utils import ConfigManager

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class AuxPlayer:
    """Original player `origin` restricted to one block of their partition."""
    origin: int
    block: frozenset[int]

    def label(self, problem: Problem) -> str:
        return f"({problem.player_names[self.origin]},{Event(self.block).label(problem.space)})"


@dataclass(frozen=True, slots=True)
class AdmissibleCoalition:
    """Auxiliary coalition induced by an original coalition and a common-knowledge event."""
    origin: tuple[int, ...]
    event: frozenset[int]
    members: tuple[int, ...]


@dataclass(frozen=True, slots=True, eq=False)
class AuxGame:
    problem: Problem
    players: tuple[AuxPlayer, ...]
    admissible: tuple[AdmissibleCoalition, ...]
    endowments: NDArray[np.float64] | None = None  # (aux players, states, goods)

    @property
    def n(self) -> int:
        return len(self.players)

    def index(self, origin: int, block: Iterable[int]) -> int:
        target = AuxPlayer(origin, frozenset(block))
        try:
            return self.players.index(target)
        except ValueError:
            raise StructuralError(
                f"no auxiliary player for player {origin + 1} on block {sorted(target.block)}"
            ) from None

    def coalition(self, members: Sequence[int]) -> AdmissibleCoalition | None:
        key = tuple(sorted(members))
        return next((c for c in self.admissible if c.members == key), None)

    def coalition_for(self, origin: Iterable[int], event: Iterable[int]) -> AdmissibleCoalition:
        origin, event = tuple(sorted(origin)), frozenset(event)
        for c in self.admissible:
            if c.origin == origin and c.event == event:
                return c
        raise StructuralError(f"({list(origin)}, {sorted(event)}) is not an admissible pair")

    def labels(self) -> tuple[str, ...]:
        return tuple(p.label(self.problem) for p in self.players)

    def status_quo(self) -> Profile:
        """Autarky for economies, everyone's first vertex for games."""
        match self.problem:
            case Economy():
                return Profile.endowment(self.problem)
            case NormalFormGame():
                return first_vertex_profile(self.problem)


def first_vertex_profile(game: NormalFormGame) -> Profile:
    return Profile(tuple(
        np.tile(game.action_vertices[i][0], (game.space.size, 1))
        for i in range(game.n_players)
    ))


def build_auxiliary_game(problem: Problem) -> AuxGame:
    """Players (i, K) in canonical order plus the admissible coalition catalogue."""
    report = validate_problem(problem)
    if not report.ok:
        raise ValidationError("problem fails validation", report.violations)

    players = tuple(
        AuxPlayer(i, block)
        for i in range(problem.n_players)
        for block in problem.info[i].blocks
    )
    position = {(p.origin, p.block): j for j, p in enumerate(players)}

    catalogue: list[AdmissibleCoalition] = []
    seen: set[tuple[int, ...]] = set()
    for origin in coalitions(problem.n_players):
        for event in common_knowledge_events(origin, problem.info):
            members = tuple(sorted(
                position[(i, block)]
                for i in origin
                for block in problem.info[i].blocks
                if block <= event.members
            ))
            if members in seen:
                continue
            seen.add(members)
            catalogue.append(AdmissibleCoalition(origin, event.members, members))

    endowments = None
    if isinstance(problem, Economy):
        endowments = np.zeros((len(players), problem.space.size, problem.n_goods))
        for j, p in enumerate(players):
            rows = sorted(p.block)
            endowments[j, rows] = problem.endowments[p.origin, rows]

    logger.debug(
        f"auxiliary game: {len(players)} players, {len(catalogue)} admissible coalitions"
    )
    return AuxGame(problem, players, tuple(catalogue), endowments)


def _check_aux_profile(aux: AuxGame, y: Profile) -> None:
    if y.n_players != aux.n:
        raise StructuralError(f"auxiliary profile has {y.n_players} entries, expected {aux.n}")
    for j, p in enumerate(aux.players):
        outside = [w for w in range(aux.problem.space.size) if w not in p.block]
        if outside and np.any(np.abs(y[j][outside]) > 1e-12):
            raise StructuralError(
                f"strategy of auxiliary player {p.label(aux.problem)} is not supported on its block"
            )


def project_L(aux: AuxGame, y: Profile) -> Profile:
    """x_i = sum of y_(i,K) over player i's blocks."""
    _check_aux_profile(aux, y)
    problem = aux.problem
    values = [np.zeros((problem.space.size, problem.dimension(i))) for i in range(problem.n_players)]
    for j, p in enumerate(aux.players):
        values[p.origin] = values[p.origin] + y[j]
    return Profile(tuple(values))


def decompose(aux: AuxGame, x: Profile) -> Profile:
    """Inverse of L: y_(i,K) = x_i on K and zero elsewhere."""
    values = []
    for p in aux.players:
        array = np.zeros_like(x[p.origin])
        rows = sorted(p.block)
        array[rows] = x[p.origin][rows]
        values.append(array)
    return Profile(tuple(values))


def g_utility(aux: AuxGame, j: int, y: Profile) -> float:
    """Prior-weighted utility of the origin player over the block of aux player j."""
    return float(aux_payoffs(aux, y)[j])


def aux_payoffs(aux: AuxGame, y: Profile) -> NDArray[np.float64]:
    """Every g_j(y) at once."""
    x = project_L(aux, y)
    prior = aux.problem.space.weights()
    per_player = {i: state_utilities(aux.problem, x, i) for i in range(aux.problem.n_players)}
    return np.array([
        float(sum(prior[w] * per_player[p.origin][w] for w in p.block))
        for p in aux.players
    ])


def _economy_payoffs(
    aux: AuxGame, coalition: AdmissibleCoalition, strategies: Sequence[CoalitionProfile]
) -> NDArray[np.float64]:
    """(strategies, aux players) payoff rows, vectorized over the strategy batch."""
    econ = aux.problem
    prior = econ.space.weights()
    rows = np.zeros((len(strategies), aux.n))
    stacks = {
        i: np.stack([np.asarray(s.values[i]) for s in strategies])
        for i in coalition.origin
    }
    for j in coalition.members:
        p = aux.players[j]
        total = np.zeros(len(strategies))
        for w in p.block:
            coefficients, intercepts = econ.utilities[p.origin].matrix(w)
            values = stacks[p.origin][:, w, :] @ coefficients.T + intercepts
            total += prior[w] * values.min(axis=1)
        rows[:, j] = total
    return rows


def _game_payoffs(
    aux: AuxGame, coalition: AdmissibleCoalition, strategies: Sequence[CoalitionProfile]
) -> NDArray[np.float64]:
    """Guaranteed payoffs: mu(K) times the worst-case interim utility on K."""
    game = aux.problem
    rows = np.zeros((len(strategies), aux.n))
    for r, strategy in enumerate(strategies):
        guaranteed = {i: guaranteed_interim_utility(game, strategy, i) for i in coalition.origin}
        for j in coalition.members:
            p = aux.players[j]
            rows[r, j] = game.space.mass(p.block) * guaranteed[p.origin][min(p.block)]
    return rows


def coalition_payoffs(
    aux: AuxGame, coalition: AdmissibleCoalition, strategies: Sequence[CoalitionProfile]
) -> NDArray[np.float64]:
    if not strategies:
        return np.zeros((0, aux.n))
    match aux.problem:
        case Economy():
            return _economy_payoffs(aux, coalition, strategies)
        case NormalFormGame():
            return _game_payoffs(aux, coalition, strategies)


def _coarsest_step(problem: Problem, coalition: AdmissibleCoalition) -> Fraction:
    """Step beyond which the grid no longer gets coarser."""
    match problem:
        case Economy():
            top = float(problem.totals(coalition.origin).max())
            return Fraction(top).limit_denominator(10**9) if top > 0 else Fraction(1)
        case NormalFormGame():
            return Fraction(1)


def sampling_step(
    problem: Problem, coalition: AdmissibleCoalition, resolution: Fraction, budget: int
) -> Fraction:
    """Coarsen the grid by doubling until the coalition's grid fits the budget."""
    step = resolution
    limit = _coarsest_step(problem, coalition)
    while step < limit and grid_size_estimate(problem, step, coalition.origin, coalition.event) > budget:
        step *= 2
    return step


def _status_quo_strategy(aux: AuxGame, coalition: AdmissibleCoalition) -> CoalitionProfile:
    base = aux.status_quo()
    return CoalitionProfile(coalition.origin, {i: base[i].copy() for i in coalition.origin})


def _coalition_strategies(
    aux: AuxGame, coalition: AdmissibleCoalition, resolution: Fraction, budget: int
) -> tuple[list[CoalitionProfile], Fraction]:
    problem = aux.problem
    step = sampling_step(problem, coalition, resolution, budget)
    if step != resolution:
        logger.info(
            f"coalition {list(coalition.origin)} on {sorted(coalition.event)}: grid coarsened "
            f"from {resolution} to {step}"
        )
    strategies = [_status_quo_strategy(aux, coalition)]
    strategies.extend(itertools.islice(
        coalition_grid(problem, coalition.origin, coalition.event, step, budget=budget + 1),
        budget,
    ))
    return strategies, step


def _add_rows(
    ntu: NTUGame, members: tuple[int, ...], rows: NDArray[np.float64], witnesses: Sequence
) -> int:
    """Append rows not already present; returns how many were new."""
    existing = ntu.generators.get(members)
    known = set() if existing is None else {tuple(np.round(r, 12)) for r in existing}
    added = 0
    for row, witness in zip(rows, witnesses, strict=True):
        key = tuple(np.round(row, 12))
        if key in known:
            continue
        known.add(key)
        ntu.add_generator(members, row, witness)
        added += 1
    return added


def build_characteristic_game(
    aux: AuxGame,
    resolution: Fraction | float | str | None = None,
    sample_budget: int | None = None,
    prune: bool = True,
) -> NTUGame:
    """Finitely generated NTU game over the admissible auxiliary coalitions.

    Economies record plain payoff vectors; games record guaranteed payoffs
    against every opponent vertex assignment. Witness strategies (on the
    original players of the coalition) travel with the generators.
    """
    step = as_resolution(ConfigManager.value_or(resolution, 'scarf_options', 'resolution'))
    budget = ConfigManager.value_or(sample_budget, 'scarf_options', 'sample_budget')
    ntu = NTUGame(aux.n, labels=aux.labels())
    for coalition in aux.admissible:
        strategies, used = _coalition_strategies(aux, coalition, step, budget)
        rows = coalition_payoffs(aux, coalition, strategies)
        added = _add_rows(ntu, coalition.members, rows, strategies)
        logger.debug(
            f"V{list(coalition.members)}: {added} generators at step {used}"
        )
    return ntu.pruned() if prune else ntu


def balancing_combination(aux: AuxGame, ntu: NTUGame, point: CorePoint) -> Profile:
    """y_j = sum of delta_S y^S_j over the terminal collection.

    Slack columns contribute the auxiliary player's status-quo strategy.
    """
    status = decompose(aux, aux.status_quo())
    values = [np.zeros_like(status[j]) for j in range(aux.n)]
    for (members, g), weight in zip(point.columns, point.collection.weights, strict=True):
        if g < 0:
            j = members[0]
            values[j] = values[j] + weight * status[j]
            continue
        witness: CoalitionProfile = ntu.witnesses[members][g]
        for j in members:
            p = aux.players[j]
            rows = sorted(p.block)
            values[j][rows] += weight * np.asarray(witness.values[p.origin])[rows]
    return Profile(tuple(values))


def grand_combination(aux: AuxGame, ntu: NTUGame, v: ArrayLike) -> Profile | None:
    """Convex combination of grand-coalition witnesses whose payoffs dominate v."""
    tolerance = ConfigManager.get_config_value('solver_options', 'feasibility_tolerance')
    v = np.asarray(v, dtype=float)
    grand = tuple(range(aux.n))
    rows = ntu.generators.get(grand)
    if rows is None or rows.shape[0] == 0:
        return None
    lam = convex_combination(rows, v, tolerance)
    if lam is None:
        return None
    origin = tuple(range(aux.problem.n_players))
    mixed = {
        i: sum(lam[g] * np.asarray(ntu.witnesses[grand][g].values[i]) for g in range(rows.shape[0]))
        for i in origin
    }
    return decompose(aux, CoalitionProfile(origin, mixed).complete(aux.status_quo()))


@dataclass(slots=True)
class LiftResult:
    profile: Profile
    slack: NDArray[np.float64]


def lift_core_point(aux: AuxGame, v: ArrayLike, witness: Profile) -> LiftResult:
    """L(witness) with per-aux-player slack g_j(witness) - v_j."""
    tolerance = ConfigManager.get_config_value('solver_options', 'feasibility_tolerance')
    v = np.asarray(v, dtype=float)
    payoffs = aux_payoffs(aux, witness)
    slack = payoffs - v
    short = np.flatnonzero(slack < -tolerance)
    if short.size:
        violations = [
            f"{aux.players[j].label(aux.problem)}: slack {slack[j]:.3g}" for j in short
        ]
        raise ValidationError("witness falls short of the core payoff", violations)
    if isinstance(aux.problem, Economy):
        balance = sum(witness.values) - aux.endowments.sum(axis=0)
        if np.any(np.abs(balance) > max(tolerance, 1e-7)):
            raise ValidationError("witness is not feasible for the grand coalition")
    return LiftResult(project_L(aux, witness), slack)


@contextmanager
def solve_stage(name: str) -> Iterator[None]:
    """Tag solver errors escaping the block with the stage name."""
    try:
        yield
    except InterimCoreError as e:
        if e.stage is None:
            e.stage = name
        raise


@dataclass(slots=True)
class SolveReport:
    """Artifacts of every stage of the existence pipeline."""
    resolution: str
    epsilon: float
    aux_labels: tuple[str, ...] = ()
    admissible: int = 0
    generators: list[int] = field(default_factory=list)
    conditions: ScarfConditionsReport | None = None
    point: CorePoint | None = None
    slack: NDArray[np.float64] | None = None
    profile: Profile | None = None
    verdict: CoreVerdict | None = None
    certification_epsilon: float = 0.0
    rounds: int = 0
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict is not None and self.verdict.member

    def to_dict(self, problem: Problem) -> dict:
        return {
            'resolution': self.resolution,
            'epsilon': self.epsilon,
            'aux_players': list(self.aux_labels),
            'admissible_coalitions': self.admissible,
            'generators_per_round': list(self.generators),
            'conditions': self.conditions.to_dict() if self.conditions else None,
            'core_point': self.point.to_dict() if self.point else None,
            'slack': self.slack.tolist() if self.slack is not None else None,
            'profile': self.profile.to_lists() if self.profile else None,
            'certified': self.certified,
            'certificate': (
                self.verdict.certificate.to_dict(problem)
                if self.verdict and self.verdict.certificate else None
            ),
            'certification_epsilon': self.certification_epsilon,
            'rounds': self.rounds,
            'timing': dict(self.timing),
        }


def _conditions_collections(ntu: NTUGame) -> list[BalancedCollection] | None:
    """Balanced collections of admissible coalitions, or None when the game is too large to enumerate."""
    limit = ConfigManager.get_config_value('scarf_options', 'balance_check_players')
    if ntu.n_players > limit:
        return None
    admissible = set(ntu.generators)
    return [
        c for c in enumerate_balanced_collections(ntu.n_players)
        if all(tuple(s) in admissible for s in c.coalitions)
    ]


def _all_certificates(problem: Problem, x: Profile, epsilon: float) -> list[BlockingCertificate]:
    found = []
    for members in coalitions(problem.n_players):
        for event in common_knowledge_events(members, problem.info):
            certificate = blocks_interim(problem, x, members, event, epsilon)
            if certificate is not None:
                found.append(certificate)
    return found


def _witness_for(aux: AuxGame, ntu: NTUGame, point: CorePoint) -> Profile | None:
    tolerance = ConfigManager.get_config_value('solver_options', 'feasibility_tolerance')
    y = balancing_combination(aux, ntu, point)
    if np.all(aux_payoffs(aux, y) >= point.payoffs - tolerance):
        return y
    return grand_combination(aux, ntu, point.payoffs)


def _has_witness(aux: AuxGame, ntu: NTUGame, point: CorePoint) -> bool:
    return _witness_for(aux, ntu, point) is not None


def solve_interim_core(
    problem: Problem,
    resolution: Fraction | float | str | None = None,
    epsilon: float = 0.0,
    rounds: int | None = None,
    sample_budget: int | None = None,
) -> SolveReport:
    """Auxiliary game, characteristic game, precondition check, pivoting, lift, certification.

    A blocked lift feeds every blocking strategy found back into the
    characteristic game as a generator of its admissible coalition, and the
    pivoting is repeated.
    """
    step = as_resolution(ConfigManager.value_or(resolution, 'scarf_options', 'resolution'))
    rounds = ConfigManager.value_or(rounds, 'scarf_options', 'refinement_rounds')
    report = SolveReport(str(step), epsilon)
    concept = CoreConcept.interim(epsilon)

    started = time.perf_counter()
    with solve_stage('auxiliary'):
        aux = build_auxiliary_game(problem)
    report.aux_labels = aux.labels()
    report.admissible = len(aux.admissible)

    with solve_stage('characteristic'):
        ntu = build_characteristic_game(aux, step, sample_budget)
    report.timing['build'] = time.perf_counter() - started

    with solve_stage('conditions'):
        collections = _conditions_collections(ntu)
        report.conditions = check_scarf_conditions(ntu, collections or [], samples_per_collection=2)
    report.timing['conditions'] = time.perf_counter() - started - report.timing['build']
    if not report.conditions.ok:
        logger.warning(
            f"characteristic game fails the pivoting preconditions: {'; '.join(report.conditions.failures)}"
        )

    for round_number in range(rounds + 1):
        report.rounds = round_number
        report.generators.append(ntu.total_generators)
        with solve_stage('scarf'):
            point = scarf_core_point(ntu, partial(_has_witness, aux, ntu))
        with solve_stage('lift'):
            lifted = lift_core_point(aux, point.payoffs, _witness_for(aux, ntu, point))
        with solve_stage('certify'):
            verdict = in_core(problem, lifted.profile, concept)
        report.point, report.slack, report.profile, report.verdict = (
            point, lifted.slack, lifted.profile, verdict
        )
        if verdict.member or round_number == rounds:
            break

        with solve_stage('refine'):
            added = 0
            for certificate in _all_certificates(problem, lifted.profile, epsilon):
                coalition = aux.coalition_for(certificate.coalition, certificate.event)
                rows = coalition_payoffs(aux, coalition, [certificate.strategy])
                added += _add_rows(ntu, coalition.members, rows, [certificate.strategy])
            ntu = ntu.pruned()
        logger.debug(f"refinement round {round_number + 1}: {added} blocking generators added")
        if added == 0:
            break
    report.timing['pivot'] = (
        time.perf_counter() - started - report.timing['build'] - report.timing['conditions']
    )

    if collections is None:
        # Too many players to enumerate: test the terminal collection instead.
        with solve_stage('conditions'):
            report.conditions.merge(check_scarf_conditions(
                ntu, [report.point.collection], samples_per_collection=2
            ))
    with solve_stage('certify'):
        report.certification_epsilon = (
            0.0 if report.certified else certification_epsilon(problem, report.profile, concept)
        )
    report.timing['total'] = time.perf_counter() - started

    if report.certified:
        ConfigManager.console_print(
            f"lifted profile certified in the {concept.label} core after {report.rounds} refinement rounds"
        )
    else:
        ConfigManager.console_print(
            f"lifted profile not certified at eps={epsilon:g}; it survives at eps="
            f"{report.certification_epsilon:.6g}"
        )
    return report
