"""
The three-player, two-state exchange economy used as the reference instance.

Player 2 observes the state, players 1 and 3 do not. Everyone owns one unit
of the single good in both states; players 1 and 3 value it linearly, player
2 values it linearly at a and as 1 - x at b. Under interim delivery the
equal split (1,1,1) is in the interim core, while the weak interim private
core is empty: every allocation is blocked at a single state.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from blocking import (
    BlockingCertificate,
    CoreConcept,
    ScanReport,
    blocks_weak_interim_private,
    certificate_margins,
    core_grid_scan,
    in_core,
    verify_certificate,
)
from games import AffinePiece, CoalitionProfile, Delivery, Economy, Profile, UtilitySpec
from probability import InformationStructure, Partition, StateSpace

logger = logging.getLogger(__name__)

STATE_A, STATE_B = 0, 1
DEFAULT_RESOLUTION = Fraction(1, 4)


def worked_economy() -> Economy:
    space = StateSpace.equiprobable(('a', 'b'))
    coarse = Partition.trivial(2)
    info = InformationStructure((coarse, Partition.discrete(2), coarse))
    linear = UtilitySpec.linear([[1.0], [1.0]])
    decreasing_at_b = UtilitySpec((
        (AffinePiece((1.0,), 0.0),),
        (AffinePiece((-1.0,), 1.0),),
    ))
    return Economy(
        space,
        info,
        np.ones((3, 2, 1)),
        (linear, decreasing_at_b, linear),
        Delivery.INTERIM,
        ('1', '2', '3'),
        ('x',),
    )


def constant_profile(economy: Economy, shares: tuple[float, ...]) -> Profile:
    return Profile.constant(economy, [[s] for s in shares])


def _certificate(
    economy: Economy, x: Profile, coalition: tuple[int, ...], state: int, shares: dict[int, float]
) -> BlockingCertificate:
    """Certificate for a hand-written constant blocking allocation."""
    concept = CoreConcept.weak_interim_private()
    strategy = CoalitionProfile(coalition, {
        i: np.full((economy.space.size, 1), value) for i, value in shares.items()
    })
    margins = certificate_margins(
        economy, x, strategy, [state], 0.0, concept.conditioning(economy)
    )
    return BlockingCertificate(coalition, frozenset({state}), strategy, 0.0, margins, concept)


def split_blocking_certificate(economy: Economy) -> tuple[Profile, BlockingCertificate]:
    """{2,3} blocks (3/2, 1/2, 1) at a, splitting player 1's surplus between them."""
    alpha = 0.5
    x = constant_profile(economy, (1.0 + alpha, 1.0 - alpha, 1.0))
    certificate = _certificate(
        economy, x, (1, 2), STATE_A, {1: 1.0 - alpha + alpha / 2, 2: 1.0 + alpha / 2}
    )
    return x, certificate


def equal_split_blocking_certificate(economy: Economy) -> tuple[Profile, BlockingCertificate]:
    """The reference certificate: {1,2} blocks the equal split at b with y = (3/2, 1/2).

    Both members gain 1/2 at b. The blocking LP maximizes the smallest margin
    and may return a different strategy for the same coalition and event,
    e.g. y = (2, 0) with margin 1; both verify.
    """
    x = constant_profile(economy, (1.0, 1.0, 1.0))
    return x, _certificate(economy, x, (0, 1), STATE_B, {0: 1.5, 1: 0.5})


@dataclass(slots=True)
class WorkedExampleResult:
    """Outcome of each reproduced claim, with the artifacts behind it."""
    checks: dict[str, bool] = field(default_factory=dict)
    scan: ScanReport | None = None
    interim_searched: int = 0
    certificates: list[tuple[Profile, BlockingCertificate]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(self.checks.values())


def reproduce(resolution: Fraction | str = DEFAULT_RESOLUTION) -> WorkedExampleResult:
    """Weak interim private emptiness, interim membership of (1,1,1), both certificates."""
    economy = worked_economy()
    result = WorkedExampleResult()

    result.scan = core_grid_scan(economy, CoreConcept.weak_interim_private(), resolution)
    result.checks['weak interim private core empty on the grid'] = result.scan.members == 0

    equal = constant_profile(economy, (1.0, 1.0, 1.0))
    verdict = in_core(economy, equal, CoreConcept.interim())
    result.interim_searched = verdict.searched
    result.checks['(1,1,1) in the interim core'] = verdict.member

    x_split, split = split_blocking_certificate(economy)
    x_equal, at_b = equal_split_blocking_certificate(economy)
    result.certificates = [(x_split, split), (x_equal, at_b)]
    result.checks['{2,3} blocks at a'] = (
        verify_certificate(economy, x_split, split)
        and blocks_weak_interim_private(economy, x_split, (1, 2), STATE_A) is not None
    )
    found = in_core(economy, x_equal, CoreConcept.weak_interim_private()).certificate
    result.checks['{1,2} blocks (1,1,1) at b'] = (
        verify_certificate(economy, x_equal, at_b)
        and found is not None
        and found.coalition == (0, 1)
        and found.event == frozenset({STATE_B})
    )
    for claim, ok in result.checks.items():
        logger.debug(f"{claim}: {'reproduced' if ok else 'NOT reproduced'}")
    return result
