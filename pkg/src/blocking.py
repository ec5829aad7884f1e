"""
Blocking predicates and core membership.

Every blocking question is settled by one linear program: the coalition's
strategy is free on the smallest union of its members' measurability blocks
that contains the event (and the conditioning blocks it touches), utilities
enter through hypograph variables, and the program maximizes the uniform
margin t by which every member beats the status quo on every relevant state.
A certificate is issued only when t exceeds the strict margin and the
margins recompute directly from the returned strategy.

Games with externalities compare *guaranteed* interim utilities: one
hypograph family per opponent vertex assignment.
"""
import itertools
import logging
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from tqdm import tqdm

from errors import StructuralError
from games import (
    CoalitionProfile,
    Economy,
    NormalFormGame,
    Problem,
    Profile,
    coalition_feasible,
    grid_size_estimate,
    guaranteed_interim_utility,
    interim_utility,
    measurability_partition,
    opponent_assignments,
    opponent_blocks,
    profile_grid,
    require_valid_profile,
)
from lp_engine import LinearProgram
from probability import (
    Event,
    Partition,
    common_knowledge_events,
    events_of_fields,
    is_measurable,
)
from utils import ConfigManager

logger = logging.getLogger(__name__)


class ConceptKind(Enum):
    INTERIM = 'interim'
    PRIVATE = 'private'
    WEAK_INTERIM_PRIVATE = 'weak-interim-private'
    INTERIM_FINE = 'interim-fine'
    WEAK_CORE = 'weak-core'


@dataclass(frozen=True, slots=True)
class CoreConcept:
    """A blocking notion: which events, which conditioning, which epsilon.

    WEAK_CORE is the weak core of the flattened game in which every player
    ranks strategies by ex ante expected utility.
    """
    kind: ConceptKind
    epsilon: float = 0.0
    fields: tuple[Partition, ...] | None = None

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise StructuralError("epsilon must be nonnegative")
        if self.kind is ConceptKind.INTERIM_FINE and not self.fields:
            raise StructuralError("the interim fine core needs one field per player")

    @classmethod
    def interim(cls, epsilon: float = 0.0) -> 'CoreConcept':
        return cls(ConceptKind.INTERIM, epsilon)

    @classmethod
    def private(cls) -> 'CoreConcept':
        return cls(ConceptKind.PRIVATE)

    @classmethod
    def weak_interim_private(cls) -> 'CoreConcept':
        return cls(ConceptKind.WEAK_INTERIM_PRIVATE)

    @classmethod
    def interim_fine(cls, fields: Sequence[Partition], epsilon: float = 0.0) -> 'CoreConcept':
        return cls(ConceptKind.INTERIM_FINE, epsilon, tuple(fields))

    @classmethod
    def weak_core(cls, epsilon: float = 0.0) -> 'CoreConcept':
        return cls(ConceptKind.WEAK_CORE, epsilon)

    @classmethod
    def parse(cls, name: str, epsilon: float = 0.0, problem: Problem | None = None) -> 'CoreConcept':
        """Concept from its CLI name; the fine core defaults to full pooling."""
        try:
            kind = ConceptKind(name)
        except ValueError:
            options = ', '.join(k.value for k in ConceptKind)
            raise StructuralError(f"unknown concept {name!r} (expected one of {options})") from None
        match kind:
            case ConceptKind.PRIVATE | ConceptKind.WEAK_INTERIM_PRIVATE:
                return cls(kind)
            case ConceptKind.INTERIM_FINE:
                if problem is None:
                    raise StructuralError("the interim fine core needs a problem to pool over")
                join = problem.info.join()
                return cls(kind, epsilon, tuple(join for _ in range(problem.n_players)))
            case _:
                return cls(kind, epsilon)

    @property
    def label(self) -> str:
        match self.kind:
            case ConceptKind.PRIVATE | ConceptKind.WEAK_INTERIM_PRIVATE:
                return self.kind.value
            case _:
                return f"{self.kind.value}(eps={self.epsilon:g})"

    def conditioning(self, problem: Problem) -> tuple[Partition, ...]:
        """Per-player partitions the interim utilities are conditioned on."""
        match self.kind:
            case ConceptKind.INTERIM_FINE:
                return self.fields
            case ConceptKind.WEAK_CORE:
                return tuple(Partition.trivial(problem.space.size) for _ in range(problem.n_players))
            case _:
                return problem.info.partitions

    def to_dict(self) -> dict:
        data: dict = {'kind': self.kind.value, 'epsilon': self.epsilon}
        if self.fields:
            data['fields'] = [[sorted(b) for b in p.blocks] for p in self.fields]
        return data

    @classmethod
    def from_dict(cls, data: dict, size: int) -> 'CoreConcept':
        fields = data.get('fields')
        return cls(
            ConceptKind(data['kind']),
            float(data.get('epsilon', 0.0)),
            tuple(Partition.from_blocks(p, size) for p in fields) if fields else None,
        )


@dataclass(slots=True)
class BlockingCertificate:
    """A coalition, an event and a strategy that beats the status quo there."""
    coalition: tuple[int, ...]
    event: frozenset[int]
    strategy: CoalitionProfile
    epsilon: float
    margins: dict[int, dict[int, float]]
    concept: CoreConcept = field(default_factory=CoreConcept.interim)

    @property
    def min_margin(self) -> float:
        return min(m for per_state in self.margins.values() for m in per_state.values())

    def describe(self, problem: Problem) -> str:
        members = '{' + ','.join(problem.player_names[i] for i in self.coalition) + '}'
        return f"{members} blocks on {Event(self.event).label(problem.space)} (min margin {self.min_margin:.6g})"

    def to_dict(self, problem: Problem) -> dict:
        states = problem.space.states
        return {
            'coalition': [problem.player_names[i] for i in self.coalition],
            'event': [states[w] for w in sorted(self.event)],
            'epsilon': self.epsilon,
            'concept': self.concept.to_dict(),
            'strategy': {
                problem.player_names[i]: np.asarray(self.strategy.values[i]).tolist()
                for i in self.coalition
            },
            'margins': {
                problem.player_names[i]: {states[w]: m for w, m in per_state.items()}
                for i, per_state in self.margins.items()
            },
        }

    @classmethod
    def from_dict(cls, problem: Problem, data: dict) -> 'BlockingCertificate':
        names = list(problem.player_names)
        try:
            coalition = tuple(sorted(names.index(str(name)) for name in data['coalition']))
            event = frozenset(problem.space.index(label) for label in data['event'])
            strategy = CoalitionProfile(coalition, {
                names.index(str(name)): np.asarray(values, dtype=float)
                for name, values in data['strategy'].items()
            })
            margins = {
                names.index(str(name)): {
                    problem.space.index(label): float(m) for label, m in per_state.items()
                }
                for name, per_state in data.get('margins', {}).items()
            }
        except (KeyError, ValueError) as e:
            raise StructuralError(f"malformed certificate: {e}") from e
        concept = CoreConcept.from_dict(data.get('concept', {'kind': 'interim'}), problem.space.size)
        return cls(coalition, event, strategy, float(data.get('epsilon', 0.0)), margins, concept)


@dataclass(slots=True)
class CoreVerdict:
    """member is True iff the whole search space was covered without a certificate."""
    member: bool
    certificate: BlockingCertificate | None
    searched: int
    search_space: str


@dataclass(slots=True)
class BlockingMargin:
    """Optimal uniform margin t* and the strategy attaining it (None if infeasible)."""
    value: float
    strategy: CoalitionProfile | None


def coalitions(n_players: int) -> Iterator[tuple[int, ...]]:
    """Nonempty coalitions, by size and then lexicographically."""
    for size in range(1, n_players + 1):
        yield from itertools.combinations(range(n_players), size)


def _canonical(coalition: Iterable[int], problem: Problem) -> tuple[int, ...]:
    members = tuple(sorted(set(coalition)))
    if not members:
        raise StructuralError("coalition must be nonempty")
    if members[0] < 0 or members[-1] >= problem.n_players:
        raise StructuralError(f"coalition {members} mentions unknown players")
    return members


def _margin_blocks(
    members: Sequence[int], states: frozenset[int], conditioning: Sequence[Partition]
) -> dict[int, list[frozenset[int]]]:
    """For each member, the conditioning blocks that contain a margin state."""
    return {
        i: [b for b in conditioning[i].blocks if b & states]
        for i in members
    }


def _strategy_support(
    problem: Problem,
    members: Sequence[int],
    event: frozenset[int],
    needed: dict[int, list[frozenset[int]]],
) -> frozenset[int]:
    """Smallest union of every member's measurability blocks covering the event
    and all conditioning blocks the margins read."""
    support = set(event).union(*(b for blocks in needed.values() for b in blocks))
    partitions = [measurability_partition(problem, i) for i in members]
    while True:
        grown = set(support)
        for partition in partitions:
            grown |= partition.saturate(grown).members
        if grown == support:
            return frozenset(support)
        support = grown


def _economy_program(
    econ: Economy,
    x: Profile,
    members: tuple[int, ...],
    support: frozenset[int],
    needed: dict[int, list[frozenset[int]]],
    status: dict[int, np.ndarray],
    epsilon: float,
):
    lp = LinearProgram()
    space = econ.space
    n_goods = econ.n_goods
    bundle: dict[tuple[int, int], range] = {}
    for i in members:
        for block in measurability_partition(econ, i).blocks:
            if block <= support:
                variables = lp.add_variables(n_goods, lower=0.0)
                for w in block:
                    bundle[(i, w)] = variables

    totals = econ.totals(members)
    for w in sorted(support):
        for k in range(n_goods):
            lp.add_eq({bundle[(i, w)][k]: 1.0 for i in members}, totals[w, k])

    t = lp.add_variable(lower=None)
    for i in members:
        u = econ.utilities[i]
        for block in needed[i]:
            row: dict[int, float] = {t: -1.0}
            mass = space.mass(block)
            for w in sorted(block):
                h = lp.add_variable(lower=None)
                coefficients, intercepts = u.matrix(w)
                for a, b in zip(coefficients, intercepts, strict=True):
                    piece = {h: 1.0}
                    for k in range(n_goods):
                        piece[bundle[(i, w)][k]] = -a[k]
                    lp.add_le(piece, b)
                row[h] = space.prior[w] / mass
            lp.add_ge(row, status[i][min(block)] + epsilon)
    lp.maximize(t)

    def decode(solution: np.ndarray) -> CoalitionProfile:
        values = {}
        for i in members:
            # Own endowment outside the support keeps the coalition self-sufficient.
            array = econ.endowments[i].copy()
            for w in support:
                array[w] = solution[list(bundle[(i, w)])]
            values[i] = array
        return CoalitionProfile(members, values)

    return lp, t, decode


def _game_program(
    game: NormalFormGame,
    x: Profile,
    members: tuple[int, ...],
    support: frozenset[int],
    needed: dict[int, list[frozenset[int]]],
    status: dict[int, np.ndarray],
    epsilon: float,
):
    lp = LinearProgram()
    space = game.space
    offsets = game.offsets()
    weights: dict[tuple[int, int], range] = {}
    for i in members:
        n_vertices = game.action_vertices[i].shape[0]
        for block in measurability_partition(game, i).blocks:
            if block <= support:
                variables = lp.add_variables(n_vertices, lower=0.0, upper=1.0)
                lp.add_eq({v: 1.0 for v in variables}, 1.0)
                for w in block:
                    weights[(i, w)] = variables

    t = lp.add_variable(lower=None)
    for i in members:
        u = game.utilities[i]
        for block in needed[i]:
            mass = space.mass(block)
            opponents = opponent_blocks(game, members, block)
            for assignment in opponent_assignments(game, opponents):
                fixed = {
                    (j, w): game.action_vertices[j][vertex]
                    for (j, opp_block), vertex in zip(opponents, assignment, strict=True)
                    for w in opp_block
                }
                row: dict[int, float] = {t: -1.0}
                for w in sorted(block):
                    h = lp.add_variable(lower=None)
                    coefficients, intercepts = u.matrix(w)
                    for a, b in zip(coefficients, intercepts, strict=True):
                        piece = {h: 1.0}
                        constant = float(b)
                        for j in range(game.n_players):
                            segment = a[offsets[j]:offsets[j] + game.dimension(j)]
                            if (j, w) in weights:
                                vertices = game.action_vertices[j]
                                for v, var in enumerate(weights[(j, w)]):
                                    piece[var] = piece.get(var, 0.0) - float(segment @ vertices[v])
                            elif (j, w) in fixed:
                                constant += float(segment @ fixed[(j, w)])
                            else:
                                constant += float(segment @ x[j][w])
                        lp.add_le(piece, constant)
                    row[h] = space.prior[w] / mass
                lp.add_ge(row, status[i][min(block)] + epsilon)
    lp.maximize(t)

    def decode(solution: np.ndarray) -> CoalitionProfile:
        values = {}
        for i in members:
            array = x[i].copy()
            vertices = game.action_vertices[i]
            for w in support:
                array[w] = solution[list(weights[(i, w)])] @ vertices
            values[i] = array
        return CoalitionProfile(members, values)

    return lp, t, decode


def blocking_margin(
    problem: Problem,
    x: Profile,
    coalition: Iterable[int],
    event: Event | Iterable[int],
    epsilon: float = 0.0,
    conditioning: Sequence[Partition] | None = None,
) -> BlockingMargin:
    """Largest t such that some admissible coalition strategy beats the status
    quo by epsilon + t for every member at every state of the event."""
    members = _canonical(coalition, problem)
    states = event.members if isinstance(event, Event) else frozenset(event)
    if not states:
        raise StructuralError("blocking event must be nonempty")
    fields = tuple(conditioning) if conditioning is not None else problem.info.partitions
    needed = _margin_blocks(members, states, fields)
    support = _strategy_support(problem, members, states, needed)
    status = {i: interim_utility(problem, x, i, fields[i]) for i in members}

    build = _economy_program if isinstance(problem, Economy) else _game_program
    lp, t, decode = build(problem, x, members, support, needed, status, epsilon)
    result = lp.solve()
    if not result.feasible:
        logger.debug(f"blocking LP for {members} infeasible: {result.message}")
        return BlockingMargin(float('-inf'), None)
    return BlockingMargin(float(result.x[t]), decode(result.x))


def blocking_lp(
    problem: Problem,
    x: Profile,
    coalition: Iterable[int],
    event: Event | Iterable[int],
    epsilon: float = 0.0,
    conditioning: Sequence[Partition] | None = None,
) -> CoalitionProfile | None:
    """The maximizing coalition strategy when the optimal margin is strict."""
    threshold = ConfigManager.get_config_value('solver_options', 'strict_margin')
    margin = blocking_margin(problem, x, coalition, event, epsilon, conditioning)
    return margin.strategy if margin.value > threshold else None


def certificate_margins(
    problem: Problem,
    x: Profile,
    strategy: CoalitionProfile,
    states: Iterable[int],
    epsilon: float,
    conditioning: Sequence[Partition],
) -> dict[int, dict[int, float]]:
    """Challenger minus status quo minus epsilon, per member per state."""
    states = sorted(states)
    margins: dict[int, dict[int, float]] = {}
    for i in strategy.coalition:
        status = interim_utility(problem, x, i, conditioning[i])
        match problem:
            case NormalFormGame():
                challenger = guaranteed_interim_utility(problem, strategy, i, conditioning[i], x)
            case Economy():
                challenger = interim_utility(problem, strategy.complete(x), i, conditioning[i])
        margins[i] = {w: float(challenger[w] - status[w] - epsilon) for w in states}
    return margins


def strategy_admissible(problem: Problem, strategy: CoalitionProfile) -> bool:
    tol = ConfigManager.get_config_value('solver_options', 'feasibility_tolerance')
    for i in strategy.coalition:
        if not is_measurable(np.round(strategy.values[i], 12), measurability_partition(problem, i)):
            return False
    if isinstance(problem, Economy):
        return coalition_feasible(problem, strategy, max(tol, 1e-7))
    return True


def _certify(
    problem: Problem,
    x: Profile,
    members: tuple[int, ...],
    event: frozenset[int],
    margin_states: frozenset[int],
    epsilon: float,
    concept: CoreConcept,
) -> BlockingCertificate | None:
    threshold = ConfigManager.get_config_value('solver_options', 'strict_margin')
    conditioning = concept.conditioning(problem)
    result = blocking_margin(problem, x, members, margin_states, epsilon, conditioning)
    if result.value <= threshold:
        return None
    margins = certificate_margins(problem, x, result.strategy, margin_states, epsilon, conditioning)
    lowest = min(m for per_state in margins.values() for m in per_state.values())
    if lowest <= threshold:
        logger.warning(
            f"LP margin {result.value:.3g} for coalition {members} did not survive "
            f"recomputation ({lowest:.3g}); treating as not blocked"
        )
        return None
    return BlockingCertificate(members, event, result.strategy, epsilon, margins, concept)


def blocks_interim(
    problem: Problem,
    x: Profile,
    coalition: Iterable[int],
    event: Event | Iterable[int],
    epsilon: float = 0.0,
) -> BlockingCertificate | None:
    """Does the coalition block x on a common-knowledge event of its own?"""
    members = _canonical(coalition, problem)
    states = event.members if isinstance(event, Event) else frozenset(event)
    if Event(states) not in common_knowledge_events(members, problem.info):
        raise StructuralError(
            f"event {Event(states).label(problem.space)} is not common knowledge for {members}"
        )
    return _certify(problem, x, members, states, states, epsilon, CoreConcept.interim(epsilon))


def blocks_private(econ: Economy, x: Profile, coalition: Iterable[int]) -> BlockingCertificate | None:
    """Strict interim improvement for every member at every state."""
    members = _canonical(coalition, econ)
    omega = frozenset(range(econ.space.size))
    return _certify(econ, x, members, omega, omega, 0.0, CoreConcept.private())


def blocks_weak_interim_private(
    econ: Economy, x: Profile, coalition: Iterable[int], w0: int
) -> BlockingCertificate | None:
    """Strict interim improvement for every member at the single state w0."""
    members = _canonical(coalition, econ)
    if not 0 <= w0 < econ.space.size:
        raise StructuralError(f"state {w0} outside the state space")
    state = frozenset({w0})
    return _certify(econ, x, members, state, state, 0.0, CoreConcept.weak_interim_private())


def _check_fine_fields(problem: Problem, fields: Sequence[Partition]) -> None:
    if len(fields) != problem.n_players:
        raise StructuralError(f"{len(fields)} fields for {problem.n_players} players")
    for i, h in enumerate(fields):
        if not h.refines(problem.info[i]):
            raise StructuralError(
                f"field of player {problem.player_names[i]} is coarser than their information"
            )


def blocks_fine(
    problem: Problem,
    x: Profile,
    coalition: Iterable[int],
    event: Event | Iterable[int],
    fields: Sequence[Partition],
    epsilon: float = 0.0,
) -> BlockingCertificate | None:
    """Blocking with interim utilities conditioned on enlarged fields H_i."""
    _check_fine_fields(problem, fields)
    members = _canonical(coalition, problem)
    states = event.members if isinstance(event, Event) else frozenset(event)
    if Event(states) not in events_of_fields(members, fields):
        raise StructuralError(
            f"event {Event(states).label(problem.space)} is not in the meet of the fields"
        )
    if all(h == problem.info[i] for i, h in enumerate(fields)):
        return blocks_interim(problem, x, members, states, epsilon)
    concept = CoreConcept.interim_fine(fields, epsilon)
    return _certify(problem, x, members, states, states, epsilon, concept)


def blocks_ex_ante(
    problem: Problem, x: Profile, coalition: Iterable[int], epsilon: float = 0.0
) -> BlockingCertificate | None:
    """Weak-core blocking in the flattened game (ex ante expected utilities)."""
    members = _canonical(coalition, problem)
    omega = frozenset(range(problem.space.size))
    return _certify(problem, x, members, omega, omega, epsilon, CoreConcept.weak_core(epsilon))


def concept_events(problem: Problem, concept: CoreConcept, members: tuple[int, ...]) -> list[frozenset[int]]:
    """The events a coalition may block on under the concept, in canonical order."""
    match concept.kind:
        case ConceptKind.INTERIM:
            return [e.members for e in common_knowledge_events(members, problem.info)]
        case ConceptKind.INTERIM_FINE:
            return [e.members for e in events_of_fields(members, concept.fields)]
        case ConceptKind.WEAK_INTERIM_PRIVATE:
            return [frozenset({w}) for w in range(problem.space.size)]
        case ConceptKind.PRIVATE | ConceptKind.WEAK_CORE:
            return [frozenset(range(problem.space.size))]


def _block(
    problem: Problem, x: Profile, members: tuple[int, ...], event: frozenset[int], concept: CoreConcept
) -> BlockingCertificate | None:
    match concept.kind:
        case ConceptKind.INTERIM:
            return blocks_interim(problem, x, members, event, concept.epsilon)
        case ConceptKind.INTERIM_FINE:
            return blocks_fine(problem, x, members, event, concept.fields, concept.epsilon)
        case ConceptKind.PRIVATE:
            return blocks_private(problem, x, members)
        case ConceptKind.WEAK_INTERIM_PRIVATE:
            return blocks_weak_interim_private(problem, x, members, min(event))
        case ConceptKind.WEAK_CORE:
            return blocks_ex_ante(problem, x, members, concept.epsilon)


def in_core(
    problem: Problem, x: Profile, concept: CoreConcept, validate: bool = True
) -> CoreVerdict:
    """Search every coalition and admissible event; the first certificate wins."""
    if validate:
        require_valid_profile(problem, x)
    if concept.kind is ConceptKind.INTERIM_FINE:
        _check_fine_fields(problem, concept.fields)
    searched = 0
    n_coalitions = 0
    for members in coalitions(problem.n_players):
        n_coalitions += 1
        for event in concept_events(problem, concept, members):
            searched += 1
            certificate = _block(problem, x, members, event, concept)
            if certificate is not None:
                logger.debug(f"{concept.label}: {certificate.describe(problem)}")
                return CoreVerdict(False, certificate, searched, f"stopped after {searched} subproblems")
    description = f"{n_coalitions} coalitions x their {concept.kind.value} events ({searched} subproblems)"
    return CoreVerdict(True, None, searched, description)


def certification_epsilon(problem: Problem, x: Profile, concept: CoreConcept) -> float:
    """Smallest epsilon at which x survives: the largest blocking margin found."""
    conditioning = concept.conditioning(problem)
    worst = 0.0
    for members in coalitions(problem.n_players):
        for event in concept_events(problem, concept, members):
            margin = blocking_margin(problem, x, members, event, 0.0, conditioning)
            worst = max(worst, margin.value)
    return worst


def verify_certificate(
    problem: Problem, x: Profile, certificate: BlockingCertificate, threshold: float | None = None
) -> bool:
    """Re-check a certificate by direct recomputation; no search."""
    threshold = ConfigManager.value_or(threshold, 'solver_options', 'strict_margin')
    if tuple(certificate.strategy.coalition) != tuple(certificate.coalition):
        return False
    if not strategy_admissible(problem, certificate.strategy):
        logger.info("certificate strategy is not admissible for its coalition")
        return False
    concept = certificate.concept
    events = concept_events(problem, concept, certificate.coalition)
    if certificate.event not in events:
        logger.info("certificate event is not available to its coalition")
        return False
    margins = certificate_margins(
        problem, x, certificate.strategy, certificate.event,
        certificate.epsilon, concept.conditioning(problem),
    )
    return all(m > threshold for per_state in margins.values() for m in per_state.values())


@dataclass(slots=True)
class ScanReport:
    """Grid profiles split into core members and blocked profiles."""
    concept: CoreConcept
    resolution: str
    total: int = 0
    members: int = 0
    member_keys: set[tuple] = field(default_factory=set)
    sample_members: list[Profile] = field(default_factory=list)
    sample_certificates: list[tuple[Profile, BlockingCertificate]] = field(default_factory=list)

    @property
    def non_members(self) -> int:
        return self.total - self.members


def core_grid_scan(
    problem: Problem,
    concept: CoreConcept,
    resolution,
    budget: int | None = None,
    workers: int | None = None,
    show_progress: bool | None = None,
) -> ScanReport:
    """Run in_core over every grid profile (deterministic order, optional threads)."""
    retained = ConfigManager.get_config_value('scan_options', 'retained_samples')
    workers = ConfigManager.value_or(workers, 'scan_options', 'workers')
    show_progress = ConfigManager.value_or(show_progress, 'scan_options', 'show_progress')
    profiles = list(profile_grid(problem, resolution, budget))
    report = ScanReport(concept, str(resolution), total=len(profiles))
    logger.debug(
        f"scanning {len(profiles)} profiles (bound {grid_size_estimate(problem, resolution)}) "
        f"under {concept.label}"
    )

    def judge(profile: Profile) -> CoreVerdict:
        return in_core(problem, profile, concept, validate=False)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(tqdm(
                pool.map(judge, profiles), total=len(profiles),
                desc=concept.label, disable=not show_progress,
            ))
    else:
        verdicts = [
            judge(p) for p in tqdm(profiles, desc=concept.label, disable=not show_progress)
        ]

    for profile, verdict in zip(profiles, verdicts, strict=True):
        if verdict.member:
            report.members += 1
            report.member_keys.add(profile.key())
            if len(report.sample_members) < retained:
                report.sample_members.append(profile)
        elif len(report.sample_certificates) < retained:
            report.sample_certificates.append((profile, verdict.certificate))
    ConfigManager.console_print(
        f"{concept.label}: {report.members} of {report.total} grid profiles are core members"
    )
    return report


def known_inclusion(inner: CoreConcept, outer: CoreConcept) -> bool:
    """True when the core under `inner` is contained in the core under `outer`
    on every economy (blocking under outer implies blocking under inner)."""
    order = {
        ConceptKind.WEAK_INTERIM_PRIVATE: 0,
        ConceptKind.INTERIM: 1,
        ConceptKind.PRIVATE: 2,
    }
    if inner.kind == outer.kind and inner.kind in (ConceptKind.INTERIM, ConceptKind.WEAK_CORE):
        return inner.epsilon <= outer.epsilon
    if inner.kind is ConceptKind.INTERIM and inner.epsilon > 0:
        return False
    if inner.kind in order and outer.kind in order:
        return order[inner.kind] <= order[outer.kind]
    return False
