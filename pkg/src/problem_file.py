"""
YAML problem and profile documents.

A problem document looks like:

    kind: economy            # or game
    delivery: interim        # or ex_post
    states: [a, b]
    prior: ["1/2", "1/2"]    # optional, uniform when omitted
    players: ["1", "2", "3"]
    partitions:
      "1": [[a, b]]
      "2": [[a], [b]]
    goods: [x]                          # economies
    endowments:
      "1": {a: [1], b: [1]}
    actions:                            # games: vertices of each action polytope
      "1": [[0], [1]]
    utilities:
      "1":
        a: [{coefficients: [1], intercept: 0}]

Numbers may be YAML numbers or strings such as "1/3" and "0.25"; they are
read exactly as rationals and converted to floats at the boundary. Unknown
keys are rejected with the line they appear on.
"""
import logging
from collections.abc import Mapping, Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from errors import ProblemFileError, StructuralError
from games import (
    AffinePiece,
    Delivery,
    Economy,
    NormalFormGame,
    Problem,
    Profile,
    UtilitySpec,
)
from probability import InformationStructure, Partition, StateSpace

logger = logging.getLogger(__name__)

_PROBLEM_KEYS = {
    'kind', 'delivery', 'states', 'prior', 'players', 'partitions',
    'goods', 'endowments', 'actions', 'utilities', 'description',
}
_REQUIRED = {'kind', 'states', 'players', 'partitions', 'utilities'}
_PIECE_KEYS = {'coefficients', 'intercept'}


class _Lines:
    """Line numbers of mapping keys, addressed by key path."""

    def __init__(self, text: str) -> None:
        self.lines: dict[tuple[str, ...], int] = {}
        try:
            root = yaml.compose(text)
        except yaml.YAMLError:
            return
        if root is not None:
            self._walk(root, ())

    def _walk(self, node: yaml.Node, path: tuple[str, ...]) -> None:
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                child = (*path, str(key.value))
                self.lines[child] = key.start_mark.line + 1
                self._walk(value, child)
        elif isinstance(node, yaml.SequenceNode):
            for k, item in enumerate(node.value):
                child = (*path, str(k))
                self.lines[child] = item.start_mark.line + 1
                self._walk(item, child)

    def find(self, *path: Any) -> int | None:
        key = tuple(str(p) for p in path)
        while key:
            if key in self.lines:
                return self.lines[key]
            key = key[:-1]
        return None


class _Reader:
    """Parses a loaded document, raising ProblemFileError with line numbers."""

    def __init__(self, lines: _Lines) -> None:
        self.lines = lines

    def fail(self, message: str, *path: Any) -> ProblemFileError:
        return ProblemFileError(message, self.lines.find(*path))

    def number(self, value: Any, *path: Any) -> float:
        if isinstance(value, bool) or value is None:
            raise self.fail(f"expected a number at {'.'.join(map(str, path))}, got {value!r}", *path)
        try:
            return float(Fraction(str(value).strip()))
        except (ValueError, ZeroDivisionError):
            raise self.fail(f"cannot read {value!r} as an exact number", *path) from None

    def vector(self, value: Any, *path: Any) -> list[float]:
        if not isinstance(value, list):
            value = [value]
        return [self.number(v, *path, k) for k, v in enumerate(value)]

    def mapping(self, value: Any, *path: Any) -> Mapping:
        if not isinstance(value, Mapping):
            raise self.fail(f"{'.'.join(map(str, path)) or 'document'} must be a mapping", *path)
        return value

    def labels(self, value: Any, *path: Any) -> list[str]:
        if not isinstance(value, list) or not value:
            raise self.fail(f"{'.'.join(map(str, path))} must be a nonempty list", *path)
        return [str(v) for v in value]

    def per_player(self, data: Mapping, key: str, players: Sequence[str]) -> list[Any]:
        section = self.mapping(data.get(key), key)
        unknown = sorted(set(map(str, section)) - set(players))
        if unknown:
            raise self.fail(f"{key} mentions unknown players {unknown}", key, unknown[0])
        missing = [p for p in players if p not in {str(k) for k in section}]
        if missing:
            raise self.fail(f"{key} is missing players {missing}", key)
        by_name = {str(k): v for k, v in section.items()}
        return [by_name[p] for p in players]

    def per_state(self, value: Any, states: Sequence[str], *path: Any) -> list[Any]:
        """A mapping state -> item, or a single item shared by every state."""
        if isinstance(value, Mapping) and set(map(str, value)) <= set(states) and value:
            by_state = {str(k): v for k, v in value.items()}
            missing = [s for s in states if s not in by_state]
            if missing:
                raise self.fail(f"{'.'.join(map(str, path))} is missing states {missing}", *path)
            return [by_state[s] for s in states]
        return [value for _ in states]

    def pieces(self, value: Any, *path: Any) -> tuple[AffinePiece, ...]:
        if isinstance(value, Mapping):
            value = [value]
        if not isinstance(value, list) or not value:
            raise self.fail("a utility needs at least one affine piece", *path)
        pieces = []
        for k, piece in enumerate(value):
            piece = self.mapping(piece, *path, k)
            unknown = sorted(set(map(str, piece)) - _PIECE_KEYS)
            if unknown:
                raise self.fail(f"unknown utility piece keys {unknown}", *path, k, unknown[0])
            if 'coefficients' not in piece:
                raise self.fail("utility piece needs coefficients", *path, k)
            coefficients = self.vector(piece['coefficients'], *path, k, 'coefficients')
            intercept = self.number(piece.get('intercept', 0), *path, k, 'intercept')
            pieces.append(AffinePiece(tuple(coefficients), intercept))
        return tuple(pieces)


def parse_problem(text: str) -> Problem:
    """Parse a YAML problem document."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise ProblemFileError(f"malformed YAML: {e}", mark.line + 1 if mark else None) from e
    return problem_from_dict(data, _Lines(text))


def problem_from_dict(data: Any, lines: _Lines | None = None) -> Problem:
    reader = _Reader(lines or _Lines(''))
    data = reader.mapping(data)
    unknown = sorted(set(map(str, data)) - _PROBLEM_KEYS)
    if unknown:
        raise reader.fail(f"unknown keys {unknown}", unknown[0])
    missing = sorted(_REQUIRED - set(map(str, data)))
    if missing:
        raise reader.fail(f"missing required keys {missing}")

    states = reader.labels(data['states'], 'states')
    players = reader.labels(data['players'], 'players')
    if 'prior' in data:
        prior = reader.vector(data['prior'], 'prior')
        if len(prior) != len(states):
            raise reader.fail(f"{len(prior)} prior weights for {len(states)} states", 'prior')
    else:
        prior = [1.0 / len(states)] * len(states)

    try:
        delivery = Delivery(str(data.get('delivery', Delivery.INTERIM.value)))
    except ValueError:
        raise reader.fail(f"unknown delivery {data.get('delivery')!r}", 'delivery') from None

    try:
        space = StateSpace(tuple(states), tuple(prior))
    except StructuralError as e:
        raise reader.fail(str(e), 'prior' if 'prior' in data else 'states') from e
    try:
        partitions = []
        for name, blocks in zip(players, reader.per_player(data, 'partitions', players), strict=True):
            if not isinstance(blocks, list):
                raise reader.fail(f"partition of player {name} must be a list of blocks", 'partitions', name)
            partitions.append(Partition.from_blocks(
                ([space.index(str(label)) for label in (b if isinstance(b, list) else [b])] for b in blocks),
                space.size,
            ))
        info = InformationStructure(tuple(partitions))
    except StructuralError as e:
        raise reader.fail(str(e), 'partitions') from e

    utilities = tuple(
        UtilitySpec(tuple(
            reader.pieces(item, 'utilities', name, state)
            for state, item in zip(states, reader.per_state(spec, states, 'utilities', name), strict=True)
        ))
        for name, spec in zip(players, reader.per_player(data, 'utilities', players), strict=True)
    )

    match str(data['kind']):
        case 'economy':
            if 'actions' in data:
                raise reader.fail("economies do not take actions", 'actions')
            endowments = np.array([
                [
                    reader.vector(item, 'endowments', name, state)
                    for state, item in zip(states, reader.per_state(spec, states, 'endowments', name), strict=True)
                ]
                for name, spec in zip(players, reader.per_player(data, 'endowments', players), strict=True)
            ])
            goods = tuple(reader.labels(data['goods'], 'goods')) if 'goods' in data else ()
            if goods and len(goods) != endowments.shape[2]:
                raise reader.fail(f"{len(goods)} goods but endowments of dimension {endowments.shape[2]}", 'goods')
            return Economy(space, info, endowments, utilities, delivery, tuple(players), goods)
        case 'game':
            if 'endowments' in data or 'goods' in data:
                raise reader.fail("games do not take goods or endowments", 'endowments')
            vertices = []
            for name, spec in zip(players, reader.per_player(data, 'actions', players), strict=True):
                if not isinstance(spec, list) or not spec:
                    raise reader.fail(f"actions of player {name} need at least one vertex", 'actions', name)
                vertices.append(np.array([
                    reader.vector(v, 'actions', name, k) for k, v in enumerate(spec)
                ]))
            return NormalFormGame(space, info, tuple(vertices), utilities, delivery, tuple(players))
        case other:
            raise reader.fail(f"unknown kind {other!r} (expected economy or game)", 'kind')


def load_problem(path: Path | str) -> Problem:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from e
    logger.debug(f"parsing problem file {path}")
    return parse_problem(text)


def _exact_text(value: float) -> str | int:
    fraction = Fraction(float(value)).limit_denominator(10**9)
    if fraction.denominator == 1:
        return fraction.numerator
    return str(fraction)


def _vector_text(values: Sequence[float]) -> list:
    return [_exact_text(v) for v in np.atleast_1d(values)]


def dump_problem(problem: Problem) -> dict:
    """Document form of a problem; parse_problem reads it back unchanged."""
    states = list(problem.space.states)
    players = list(problem.player_names)
    document: dict[str, Any] = {
        'kind': problem.kind,
        'delivery': problem.delivery.value,
        'states': states,
        'prior': _vector_text(problem.space.prior),
        'players': players,
        'partitions': {
            name: [[states[w] for w in sorted(block)] for block in problem.info[i].blocks]
            for i, name in enumerate(players)
        },
    }
    match problem:
        case Economy():
            document['goods'] = list(problem.goods)
            document['endowments'] = {
                name: {state: _vector_text(problem.endowments[i, w]) for w, state in enumerate(states)}
                for i, name in enumerate(players)
            }
        case NormalFormGame():
            document['actions'] = {
                name: [_vector_text(v) for v in problem.action_vertices[i]]
                for i, name in enumerate(players)
            }
    document['utilities'] = {
        name: {
            state: [
                {'coefficients': _vector_text(p.coefficients), 'intercept': _exact_text(p.intercept)}
                for p in problem.utilities[i].pieces[w]
            ]
            for w, state in enumerate(states)
        }
        for i, name in enumerate(players)
    }
    return document


def problem_to_yaml(problem: Problem) -> str:
    return yaml.safe_dump(dump_problem(problem), sort_keys=False)


def parse_profile(problem: Problem, data: Any) -> Profile:
    """Profile from a mapping player -> vector (every state) or state -> vector.

    A bare list of per-player values is also accepted, in player order.
    """
    reader = _Reader(_Lines(''))
    players = list(problem.player_names)
    states = list(problem.space.states)
    if isinstance(data, list):
        if len(data) != len(players):
            raise ProblemFileError(f"profile lists {len(data)} players, problem has {len(players)}")
        data = dict(zip(players, data, strict=True))
    section = reader.mapping(data, 'profile')
    unknown = sorted(set(map(str, section)) - set(players))
    if unknown:
        raise ProblemFileError(f"profile mentions unknown players {unknown}")
    by_name = {str(k): v for k, v in section.items()}
    values = []
    for i, name in enumerate(players):
        if name not in by_name:
            raise ProblemFileError(f"profile is missing player {name}")
        rows = [
            reader.vector(item, name, state)
            for state, item in zip(states, reader.per_state(by_name[name], states, name), strict=True)
        ]
        array = np.array(rows, dtype=float)
        if array.shape != (problem.space.size, problem.dimension(i)):
            raise ProblemFileError(
                f"profile of player {name} has shape {array.shape}, expected "
                f"{(problem.space.size, problem.dimension(i))}"
            )
        values.append(array)
    return Profile(tuple(values))


def load_profile(problem: Problem, source: str) -> Profile:
    """Profile from a YAML/JSON file path or an inline YAML document."""
    path = Path(source)
    try:
        text = path.read_text(encoding='utf-8') if path.is_file() else source
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ProblemFileError(f"malformed profile: {e}") from e
    if isinstance(data, Mapping) and 'profile' in data:
        data = data['profile']
    return parse_profile(problem, data)


def dump_profile(problem: Problem, x: Profile) -> dict:
    """Per-player documents, collapsing to one vector when measurability allows."""
    states = list(problem.space.states)
    document = {}
    for i, name in enumerate(problem.player_names):
        rows = x[i]
        if np.all(rows == rows[0]):
            document[name] = _vector_text(rows[0])
        else:
            document[name] = {state: _vector_text(rows[w]) for w, state in enumerate(states)}
    return document
