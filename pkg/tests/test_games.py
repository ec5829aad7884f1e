"""
Tests for problems, profiles, utilities and grids.
"""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import BudgetExceeded, StructuralError, ValidationError
from games import (
    AffinePiece,
    CoalitionProfile,
    Delivery,
    Economy,
    NormalFormGame,
    Profile,
    UtilitySpec,
    as_resolution,
    coalition_feasible,
    coalition_grid,
    ex_ante_utility,
    grid_size_estimate,
    guaranteed_interim_utility,
    interim_utility,
    measurability_partition,
    profile_grid,
    require_valid_profile,
    restrict_profile,
    restrict_to_field,
    state_utilities,
    utility_eval,
    validate_problem,
    validate_profile,
)
from probability import InformationStructure, Partition, StateSpace
from problem_file import load_problem


@pytest.fixture
def entry_game(problems_dir):
    return load_problem(problems_dir / 'entry_game.yaml')


def _matching_pennies_game() -> NormalFormGame:
    """One state; each player picks a mix of two actions; payoffs depend on both."""
    space = StateSpace.equiprobable(('only',))
    info = InformationStructure((Partition.trivial(1), Partition.trivial(1)))
    # u_0 = 1 + a0 - a1 over joint action (a0, a1), u_1 = 2 - a0
    u0 = UtilitySpec(((AffinePiece((1.0, -1.0), 1.0),),))
    u1 = UtilitySpec(((AffinePiece((-1.0, 0.0), 2.0),),))
    return NormalFormGame(space, info, ([[0.0], [1.0]], [[0.0], [1.0]]), (u0, u1))


class TestUtilities:
    """Tests for piecewise-linear utility evaluation."""

    def test_minimum_over_pieces(self):
        """Utilities are the pointwise minimum of their affine pieces."""
        u = UtilitySpec(((AffinePiece((1.0,), 0.0), AffinePiece((0.0,), 1.0)),))
        assert utility_eval(u, [0.5], 0) == pytest.approx(0.5)
        assert utility_eval(u, [3.0], 0) == pytest.approx(1.0)

    def test_dimension_checked(self):
        """Bundles must match the utility's dimension."""
        u = UtilitySpec.linear([[1.0, 1.0]])
        with pytest.raises(StructuralError, match="dimension"):
            utility_eval(u, [1.0], 0)

    def test_state_and_interim_utilities(self, worked):
        """Player 2 values the equal split at 1 in state a and 0 in state b."""
        x = Profile.constant(worked, [[1.0], [1.0], [1.0]])
        assert state_utilities(worked, x, 1).tolist() == pytest.approx([1.0, 0.0])
        assert interim_utility(worked, x, 1).tolist() == pytest.approx([1.0, 0.0])
        assert interim_utility(worked, x, 0).tolist() == pytest.approx([1.0, 1.0])
        assert ex_ante_utility(worked, x, 1) == pytest.approx(0.5)

    @given(
        st.lists(
            st.tuples(st.lists(st.sampled_from([0.0, 0.5, 1.0, 2.0]), min_size=2, max_size=2),
                      st.sampled_from([0.0, 0.5, 1.0])),
            min_size=1, max_size=4,
        ),
        st.lists(st.floats(0, 5), min_size=2, max_size=2),
        st.lists(st.floats(0, 5), min_size=2, max_size=2),
        st.floats(0, 1),
    )
    @settings(max_examples=500, deadline=None)
    def test_concave_along_segments(self, pieces, first, second, t):
        """The minimum of affine pieces never falls below the chord."""
        u = UtilitySpec((tuple(AffinePiece(tuple(c), b) for c, b in pieces),))
        mixed = t * np.array(first) + (1 - t) * np.array(second)
        chord = t * utility_eval(u, first, 0) + (1 - t) * utility_eval(u, second, 0)
        assert utility_eval(u, mixed, 0) >= chord - 1e-9


class TestEconomy:
    """Tests for economy construction and validation."""

    def test_default_names(self):
        """Players and goods get numbered names."""
        space = StateSpace.equiprobable(('a',))
        info = InformationStructure((Partition.trivial(1),) * 2)
        econ = Economy(space, info, np.ones((2, 1, 2)), (UtilitySpec.linear([[1, 1]]),) * 2)
        assert econ.player_names == ('1', '2')
        assert econ.goods == ('g1', 'g2')
        assert econ.totals().tolist() == [[2.0, 2.0]]

    def test_endowments_must_be_three_dimensional(self):
        """Endowments are indexed by player, state and good."""
        space = StateSpace.equiprobable(('a',))
        info = InformationStructure((Partition.trivial(1),))
        with pytest.raises(StructuralError):
            Economy(space, info, np.ones((1, 1)), (UtilitySpec.linear([[1]]),))

    def test_worked_economy_is_valid(self, worked):
        """The reference economy is valid; 1 - x at b dips below zero past one unit."""
        report = validate_problem(worked)
        assert report.ok
        assert len(report.warnings) == 1
        assert "player 2" in report.warnings[0]

    def test_non_measurable_endowment(self, worked):
        """An uninformed player's endowment cannot vary with the state."""
        endowments = worked.endowments.copy()
        endowments[0, 1, 0] = 2.0
        econ = Economy(worked.space, worked.info, endowments, worked.utilities, Delivery.INTERIM)
        report = validate_problem(econ)
        assert any("not P_1-measurable" in v for v in report.violations)

    def test_ex_post_measurability_uses_join(self, worked):
        """Under ex post delivery the same endowment is acceptable."""
        endowments = worked.endowments.copy()
        endowments[0, 1, 0] = 2.0
        econ = Economy(worked.space, worked.info, endowments, worked.utilities, Delivery.EX_POST)
        assert validate_problem(econ).ok
        assert measurability_partition(econ, 0) == Partition.discrete(2)

    def test_negative_utility_is_a_warning(self, worked):
        """Negative utilities weaken hypotheses but do not invalidate the problem."""
        shifted = UtilitySpec.linear([[1.0], [1.0]])
        negative = UtilitySpec(((AffinePiece((1.0,), -5.0),),) * 2)
        econ = Economy(worked.space, worked.info, worked.endowments, (negative, shifted, shifted))
        report = validate_problem(econ)
        assert report.ok
        assert len(report.warnings) == 1

    def test_piece_dimension_violation(self, worked):
        """Pieces must have one coefficient per good."""
        wrong = UtilitySpec.linear([[1.0, 1.0], [1.0, 1.0]])
        econ = Economy(worked.space, worked.info, worked.endowments, (wrong,) + worked.utilities[1:])
        assert not validate_problem(econ).ok


class TestProfiles:
    """Tests for profile construction and validation."""

    def test_from_blocks(self, worked):
        """Block values are spread over the block's states."""
        x = Profile.from_blocks(worked, [[[1.0]], [[2.0], [0.0]], [[0.0]]])
        assert x[1].ravel().tolist() == [2.0, 0.0]
        assert x[0].ravel().tolist() == [1.0, 1.0]

    def test_from_blocks_counts_blocks(self, worked):
        """Each player needs one value per measurability block."""
        with pytest.raises(StructuralError, match="block values"):
            Profile.from_blocks(worked, [[[1.0], [1.0]], [[1.0], [1.0]], [[1.0]]])

    def test_unbalanced_allocation(self, worked):
        """Allocations must exhaust total endowments."""
        x = Profile.constant(worked, [[1.0], [1.0], [0.5]])
        assert any("balance" in v for v in validate_profile(worked, x))
        with pytest.raises(ValidationError):
            require_valid_profile(worked, x)

    def test_measurability_violation(self, worked):
        """An uninformed player's allocation cannot depend on the state."""
        x = Profile((np.array([[2.0], [0.0]]), np.array([[0.0], [2.0]]), np.ones((2, 1))))
        assert validate_profile(worked, x) == ["strategy of player 1 violates measurability"]

    def test_endowment_profile_is_valid(self, worked):
        """The endowment is always feasible."""
        assert validate_profile(worked, Profile.endowment(worked)) == []

    def test_coalition_feasible(self, worked):
        """A coalition may only redistribute its own resources."""
        y = CoalitionProfile((1, 2), {1: np.full((2, 1), 0.5), 2: np.full((2, 1), 1.5)})
        assert coalition_feasible(worked, y)
        greedy = CoalitionProfile((1, 2), {1: np.full((2, 1), 1.0), 2: np.full((2, 1), 1.5)})
        assert not coalition_feasible(worked, greedy)

    def test_complete_keeps_outsiders(self, worked):
        """Completing a coalition strategy leaves non-members at the status quo."""
        x = Profile.constant(worked, [[1.0], [1.0], [1.0]])
        y = CoalitionProfile((0,), {0: np.full((2, 1), 0.25)})
        completed = y.complete(x)
        assert completed[0].ravel().tolist() == [0.25, 0.25]
        assert completed[2] is x[2]

    def test_game_action_outside_polytope(self, entry_game):
        """Game actions must lie in the convex hull of the vertices."""
        x = Profile.constant(entry_game, [[0.5], [1.5]])
        assert any("outside the action set" in v for v in validate_profile(entry_game, x))


class TestGames:
    """Tests for guaranteed utilities in games with externalities."""

    def test_entry_game_is_valid(self, entry_game):
        """The bundled game file satisfies the standing hypotheses."""
        report = validate_problem(entry_game)
        assert report.ok
        assert report.warnings == []
        assert entry_game.offsets() == [0, 1]
        assert entry_game.joint_dimension == 2

    def test_guaranteed_utility_takes_worst_opponent_vertex(self):
        """Player 0 alone is guaranteed 1 + a0 - 1, the opponent playing action 1."""
        game = _matching_pennies_game()
        y = CoalitionProfile((0,), {0: np.array([[1.0]])})
        assert guaranteed_interim_utility(game, y, 0).tolist() == pytest.approx([1.0])

    def test_guaranteed_utility_of_grand_coalition(self):
        """With no opponents the guarantee is the realized utility."""
        game = _matching_pennies_game()
        y = CoalitionProfile((0, 1), {0: np.array([[1.0]]), 1: np.array([[0.0]])})
        assert guaranteed_interim_utility(game, y, 0).tolist() == pytest.approx([2.0])
        assert guaranteed_interim_utility(game, y, 1).tolist() == pytest.approx([1.0])

    def test_non_member_rejected(self):
        """Guarantees are only defined for coalition members."""
        game = _matching_pennies_game()
        y = CoalitionProfile((0,), {0: np.array([[1.0]])})
        with pytest.raises(StructuralError):
            guaranteed_interim_utility(game, y, 1)


class TestRestriction:
    """Tests for restricting a problem to a sub-field."""

    def test_field_must_refine_join(self, worked):
        """The worked economy's join is discrete, so the trivial field is too coarse."""
        with pytest.raises(StructuralError, match="between the join"):
            restrict_to_field(worked, Partition.trivial(2))

    def test_pooled_states_average_utilities(self):
        """Pooling states that nobody distinguishes averages their pieces by prior."""
        space = StateSpace(('a', 'b', 'c'), (0.25, 0.25, 0.5))
        info = InformationStructure((Partition.from_blocks([[0, 1], [2]], 3),))
        u = UtilitySpec.linear([[1.0], [3.0], [1.0]])
        econ = Economy(space, info, np.ones((1, 3, 1)), (u,))
        field = Partition.from_blocks([[0, 1], [2]], 3)
        restricted = restrict_to_field(econ, field)
        assert restricted.space.states == ('a+b', 'c')
        assert restricted.space.prior == pytest.approx((0.5, 0.5))
        assert restricted.utilities[0].pieces[0][0].coefficients == pytest.approx((2.0,))
        x = Profile.endowment(econ)
        assert restrict_profile(x, field)[0].shape == (2, 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_discrete_field_is_the_same_problem(self, random_economy, seed):
        """Restricting to the full field changes no prior, partition, endowment or utility value."""
        econ = random_economy(seed, n_states=3)
        restricted = restrict_to_field(econ, Partition.discrete(3))
        assert restricted.space.prior == pytest.approx(econ.space.prior)
        assert restricted.info.partitions == econ.info.partitions
        assert np.array_equal(restricted.endowments, econ.endowments)
        for i in range(econ.n_players):
            for w in range(3):
                for bundle in ([0.0], [0.7], [2.5]):
                    assert utility_eval(restricted.utilities[i], bundle, w) == pytest.approx(
                        utility_eval(econ.utilities[i], bundle, w)
                    )

    @pytest.mark.parametrize("seed", range(20))
    def test_join_keeps_interim_utilities(self, random_economy, seed):
        """On the join of the players' fields a join-measurable profile keeps every interim utility."""
        econ = random_economy(seed)
        join = econ.info.join()
        rng = np.random.default_rng(seed)
        levels = rng.choice([0.0, 0.5, 1.0, 1.5], size=(econ.n_players, len(join.blocks)))
        x = Profile(tuple(
            np.array([[levels[i, join.blocks.index(join.block_of(w))]] for w in range(econ.space.size)])
            for i in range(econ.n_players)
        ))
        restricted = restrict_to_field(econ, join)
        y = restrict_profile(x, join)
        for i in range(econ.n_players):
            original = interim_utility(econ, x, i)
            pooled = interim_utility(restricted, y, i)
            for k, block in enumerate(join.blocks):
                for w in block:
                    assert pooled[k] == pytest.approx(original[w])


class TestGrids:
    """Tests for deterministic grid enumeration."""

    def test_resolution_parsing(self):
        """Resolutions are exact and positive."""
        assert as_resolution('1/4') == Fraction(1, 4)
        assert as_resolution(0.1) == Fraction(1, 10)
        with pytest.raises(StructuralError):
            as_resolution('0')

    def test_worked_grid_has_91_constant_profiles(self, worked):
        """At step 1/4 every grid allocation is constant: pairs summing to at most 3."""
        profiles = list(profile_grid(worked, '1/4'))
        assert len(profiles) == 91
        assert len({p.key() for p in profiles}) == 91
        for x in profiles:
            assert validate_profile(worked, x) == []
            assert np.all(x[1][0] == x[1][1])

    def test_estimate_bounds_enumeration(self, worked, entry_game):
        """The size estimate never undercounts."""
        assert grid_size_estimate(worked, '1/4') >= 91
        assert grid_size_estimate(entry_game, '1/4') == len(list(profile_grid(entry_game, '1/4')))

    def test_game_grid(self, entry_game):
        """Five actions per block: row has two blocks, column one."""
        assert len(list(profile_grid(entry_game, '1/4'))) == 125

    def test_grid_order_is_deterministic(self, worked):
        """Two enumerations agree element by element."""
        first = [p.key() for p in profile_grid(worked, '1/2')]
        second = [p.key() for p in profile_grid(worked, '1/2')]
        assert first == second

    def test_coalition_grid_keeps_outside_states(self, worked):
        """Outside the free states members keep their endowment."""
        for y in coalition_grid(worked, [1], [0], '1/2'):
            assert y.values[1][1, 0] == 1.0

    def test_coalition_grid_budget(self, worked):
        """Enumeration stops with BudgetExceeded past the budget."""
        with pytest.raises(BudgetExceeded) as raised:
            list(coalition_grid(worked, [0, 1, 2], [0, 1], '1/4', budget=10))
        assert raised.value.budget == 10

    def test_free_states_must_be_unions_of_blocks(self, worked):
        """An uninformed player cannot be free on a single state."""
        with pytest.raises(StructuralError, match="union"):
            list(coalition_grid(worked, [0], [0], '1/2'))
