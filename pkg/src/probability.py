"""
Finite probability spaces and the partition lattice.

States are indexed 0..n-1. A Partition stores its blocks in canonical order
(sorted by smallest state index) so equal partitions compare and hash equal;
events are frozen index sets. Every prior weight is strictly positive, so
"almost every state" and "every state" coincide throughout the package.
"""
import itertools
import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np
from numpy.typing import ArrayLike, NDArray

from errors import StructuralError
from utils import ConfigManager

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class StateSpace:
    """Ordered state labels with a strictly positive common prior."""
    states: tuple[str, ...]
    prior: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.states:
            raise StructuralError("state space must contain at least one state")
        if len(self.states) != len(self.prior):
            raise StructuralError(
                f"{len(self.states)} states but {len(self.prior)} prior weights"
            )
        if len(set(self.states)) != len(self.states):
            raise StructuralError(f"duplicate state labels in {self.states}")
        if any(p <= 0 for p in self.prior):
            raise StructuralError("every prior weight must be strictly positive")
        tolerance = ConfigManager.get_config_value(
            'solver_options', 'probability_tolerance'
        ) or 1e-12
        total = float(sum(self.prior))
        if abs(total - 1.0) > tolerance:
            raise StructuralError(f"prior weights sum to {total!r}, not 1")

    @classmethod
    def equiprobable(cls, labels: Sequence[str]) -> 'StateSpace':
        """Uniform prior over the given labels."""
        n = len(labels)
        return cls(tuple(labels), tuple(1.0 / n for _ in range(n)))

    @property
    def size(self) -> int:
        return len(self.states)

    def weights(self) -> NDArray[np.float64]:
        return np.asarray(self.prior, dtype=float)

    def index(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise StructuralError(f"unknown state label {label!r}") from None

    def mass(self, members: Iterable[int]) -> float:
        return float(sum(self.prior[w] for w in members))


@dataclass(frozen=True, slots=True)
class Event:
    """A set of state indices."""
    members: frozenset[int]

    @classmethod
    def of(cls, members: Iterable[int]) -> 'Event':
        return cls(frozenset(members))

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        """Canonical order: by size, then lexicographically by sorted members."""
        return (len(self.members), tuple(sorted(self.members)))

    def __contains__(self, w: object) -> bool:
        return w in self.members

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def label(self, space: StateSpace) -> str:
        return '{' + ','.join(space.states[w] for w in sorted(self.members)) + '}'


@dataclass(frozen=True, slots=True)
class Partition:
    """Disjoint nonempty blocks covering states 0..size-1, in canonical order."""
    blocks: tuple[frozenset[int], ...]
    size: int

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for block in self.blocks:
            if not block:
                raise StructuralError("partition blocks must be nonempty")
            if seen & block:
                raise StructuralError(
                    f"partition blocks overlap on states {sorted(seen & block)}"
                )
            seen |= block
        if seen != set(range(self.size)):
            missing = sorted(set(range(self.size)) - seen)
            extra = sorted(seen - set(range(self.size)))
            raise StructuralError(
                f"partition does not cover the state space "
                f"(missing {missing}, out of range {extra})"
            )
        ordered = tuple(sorted(self.blocks, key=min))
        if ordered != self.blocks:
            object.__setattr__(self, 'blocks', ordered)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], size: int) -> 'Partition':
        return cls(tuple(frozenset(b) for b in blocks), size)

    @classmethod
    def discrete(cls, size: int) -> 'Partition':
        return cls(tuple(frozenset({w}) for w in range(size)), size)

    @classmethod
    def trivial(cls, size: int) -> 'Partition':
        return cls((frozenset(range(size)),), size)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> 'Partition':
        """Build from a per-state block label vector."""
        groups: dict[int, set[int]] = {}
        for w, label in enumerate(labels):
            groups.setdefault(label, set()).add(w)
        return cls.from_blocks(groups.values(), len(labels))

    def __len__(self) -> int:
        return len(self.blocks)

    def block_index(self, w: int) -> int:
        for k, block in enumerate(self.blocks):
            if w in block:
                return k
        raise StructuralError(f"state {w} outside partition of size {self.size}")

    def block_of(self, w: int) -> frozenset[int]:
        return self.blocks[self.block_index(w)]

    def labels(self) -> NDArray[np.int64]:
        """Per-state index of the containing block."""
        out = np.empty(self.size, dtype=np.int64)
        for k, block in enumerate(self.blocks):
            for w in block:
                out[w] = k
        return out

    def refines(self, other: 'Partition') -> bool:
        """True if every block of self lies inside a block of other (self finer)."""
        _check_same_size(self, other)
        return all(
            any(block <= coarse for coarse in other.blocks) for block in self.blocks
        )

    def is_coarser_than(self, other: 'Partition') -> bool:
        return other.refines(self)

    def is_union_of_blocks(self, event: Event | Iterable[int]) -> bool:
        members = event.members if isinstance(event, Event) else frozenset(event)
        return all(block <= members or not (block & members) for block in self.blocks)

    def saturate(self, event: Event | Iterable[int]) -> Event:
        """Smallest union of blocks containing the event."""
        members = event.members if isinstance(event, Event) else frozenset(event)
        return Event(frozenset().union(*(b for b in self.blocks if b & members)))

    def describe(self, space: StateSpace) -> str:
        return '{' + ', '.join(
            Event(block).label(space) for block in self.blocks
        ) + '}'


@dataclass(frozen=True, slots=True)
class InformationStructure:
    """One partition per player, all over the same state space."""
    partitions: tuple[Partition, ...]

    def __post_init__(self) -> None:
        if not self.partitions:
            raise StructuralError("information structure needs at least one player")
        sizes = {p.size for p in self.partitions}
        if len(sizes) != 1:
            raise StructuralError(f"partitions over different state counts {sizes}")

    @property
    def n_players(self) -> int:
        return len(self.partitions)

    @property
    def size(self) -> int:
        return self.partitions[0].size

    def __getitem__(self, i: int) -> Partition:
        return self.partitions[i]

    def join(self) -> Partition:
        """The global partition generated by all players' information."""
        return reduce(partition_join, self.partitions)

    def meet_of(self, coalition: Iterable[int]) -> Partition:
        members = sorted(coalition)
        if not members:
            raise StructuralError("coalition must be nonempty")
        return reduce(partition_meet, (self.partitions[i] for i in members))


def _check_same_size(p: Partition, q: Partition) -> None:
    if p.size != q.size:
        raise StructuralError(
            f"partitions over different state spaces ({p.size} vs {q.size} states)"
        )


def partition_meet(p: Partition, q: Partition) -> Partition:
    """Finest common coarsening: merge overlapping blocks until fixpoint."""
    _check_same_size(p, q)
    parent = list(range(p.size))

    def find(w: int) -> int:
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    for block in itertools.chain(p.blocks, q.blocks):
        first, *rest = sorted(block)
        for w in rest:
            root_a, root_b = find(first), find(w)
            if root_a != root_b:
                parent[max(root_a, root_b)] = min(root_a, root_b)

    return Partition.from_labels([find(w) for w in range(p.size)])


def partition_join(p: Partition, q: Partition) -> Partition:
    """Coarsest common refinement: nonempty pairwise intersections."""
    _check_same_size(p, q)
    blocks = [a & b for a in p.blocks for b in q.blocks if a & b]
    return Partition.from_blocks(blocks, p.size)


def is_measurable(values: ArrayLike, partition: Partition) -> bool:
    """True iff the per-state values are exactly constant on every block."""
    array = np.asarray(values)
    if array.shape[0] != partition.size:
        raise StructuralError(
            f"value map has {array.shape[0]} states, partition has {partition.size}"
        )
    for block in partition.blocks:
        first, *rest = sorted(block)
        if any(not np.array_equal(array[w], array[first]) for w in rest):
            return False
    return True


def conditional_expectation(
    values: ArrayLike, partition: Partition, space: StateSpace
) -> NDArray[np.float64]:
    """E(f | partition) as a per-state array (blockwise prior-weighted mean)."""
    array = np.asarray(values, dtype=float)
    if array.shape[0] != space.size or partition.size != space.size:
        raise StructuralError("values, partition and state space disagree on size")
    weights = space.weights()
    out = np.empty_like(array)
    for block in partition.blocks:
        idx = sorted(block)
        w = weights[idx]
        mean = np.tensordot(w, array[idx], axes=(0, 0)) / w.sum()
        out[idx] = mean
    return out


def expectation(values: ArrayLike, space: StateSpace) -> float:
    return float(np.dot(space.weights(), np.asarray(values, dtype=float)))


def all_unions(blocks: Sequence[frozenset[int]]) -> list[Event]:
    """Every nonempty union of the given blocks, in canonical event order."""
    events = [
        Event(frozenset().union(*combo))
        for r in range(1, len(blocks) + 1)
        for combo in itertools.combinations(blocks, r)
    ]
    return sorted(events, key=Event.sort_key)


def common_knowledge_events(
    coalition: Iterable[int], info: InformationStructure
) -> list[Event]:
    """All nonempty events in the meet of the members' fields (always includes Ω)."""
    meet = info.meet_of(coalition)
    return all_unions(meet.blocks)


def events_of_fields(
    coalition: Iterable[int], fields: Sequence[Partition]
) -> list[Event]:
    """Nonempty events common to the given per-player fields over the coalition."""
    members = sorted(coalition)
    if not members:
        raise StructuralError("coalition must be nonempty")
    meet = reduce(partition_meet, (fields[i] for i in members))
    return all_unions(meet.blocks)


def all_partitions(size: int) -> Iterator[Partition]:
    """Every set partition of 0..size-1 (restricted growth strings)."""
    if size == 0:
        return

    def grow(prefix: list[int], top: int) -> Iterator[list[int]]:
        if len(prefix) == size:
            yield prefix
            return
        for label in range(top + 2):
            yield from grow(prefix + [label], max(top, label))

    for labels in grow([0], 0):
        yield Partition.from_labels(labels)
