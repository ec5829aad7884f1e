"""
Tests for the auxiliary game, the characteristic game and the solve pipeline.
"""
import json
from fractions import Fraction

import numpy as np
import pytest

import derived
from blocking import CoreConcept, in_core
from derived import (
    AuxPlayer,
    aux_payoffs,
    balancing_combination,
    build_auxiliary_game,
    build_characteristic_game,
    coalition_payoffs,
    decompose,
    g_utility,
    lift_core_point,
    project_L,
    sampling_step,
    solve_interim_core,
    solve_stage,
)
from errors import StructuralError, ValidationError
from games import Economy, Profile, ex_ante_utility, interim_utility, validate_profile
from scarf import NTUGame, ScarfConditionsReport, all_coalitions, is_balanced_collection, scarf_core_point
from worked_example import constant_profile


@pytest.fixture
def aux(worked):
    return build_auxiliary_game(worked)


def _random_aux_profile(aux, rng) -> Profile:
    """Arbitrary bundles on each auxiliary player's block, zero elsewhere."""
    econ = aux.problem
    values = []
    for p in aux.players:
        array = np.zeros((econ.space.size, econ.n_goods))
        array[sorted(p.block)] = rng.choice([0.0, 0.5, 1.0, 2.0], size=(len(p.block), econ.n_goods))
        values.append(array)
    return Profile(tuple(values))


class TestAuxiliaryGame:
    """Tests for auxiliary players and admissible coalitions."""

    def test_players_in_canonical_order(self, aux):
        """One auxiliary player per block, players in order, blocks in partition order."""
        assert aux.players == (
            AuxPlayer(0, frozenset({0, 1})),
            AuxPlayer(1, frozenset({0})),
            AuxPlayer(1, frozenset({1})),
            AuxPlayer(2, frozenset({0, 1})),
        )
        assert aux.labels() == ('(1,{a,b})', '(2,{a})', '(2,{b})', '(3,{a,b})')

    def test_admissible_catalogue(self, aux):
        """Nine admissible coalitions, one per coalition and common-knowledge event."""
        members = [c.members for c in aux.admissible]
        assert members == [
            (0,), (1,), (2,), (1, 2), (3,), (0, 1, 2), (0, 3), (1, 2, 3), (0, 1, 2, 3)
        ]
        assert aux.coalition((1, 2)).event == frozenset({0, 1})
        assert aux.coalition((0, 1)) is None

    def test_coalition_for(self, aux):
        """Certificates map back onto their admissible coalition."""
        assert aux.coalition_for((1, 2), {0, 1}).members == (1, 2, 3)
        with pytest.raises(StructuralError, match="not an admissible pair"):
            aux.coalition_for((0, 1), {1})

    def test_auxiliary_endowments(self, aux):
        """Endowments are cut down to each auxiliary player's block."""
        assert aux.endowments[:, :, 0].tolist() == [
            [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]
        ]

    def test_index(self, aux):
        """Auxiliary players are found by origin and block."""
        assert aux.index(1, {1}) == 2
        with pytest.raises(StructuralError):
            aux.index(0, {0})

    def test_invalid_problem_rejected(self, worked):
        """Validation violations stop the pipeline."""
        endowments = worked.endowments.copy()
        endowments[0, 1, 0] = 3.0
        broken = Economy(worked.space, worked.info, endowments, worked.utilities)
        with pytest.raises(ValidationError):
            build_auxiliary_game(broken)


class TestProfileMaps:
    """Tests for L, its inverse and the auxiliary payoffs."""

    def test_decompose_then_project(self, aux, worked):
        """L undoes the decomposition."""
        x = Profile.from_blocks(worked, [[[0.5]], [[2.0], [0.0]], [[0.5]]])
        y = decompose(aux, x)
        assert y[1].ravel().tolist() == [2.0, 0.0]
        assert y[2].ravel().tolist() == [0.0, 0.0]
        back = project_L(aux, y)
        for i in range(worked.n_players):
            assert np.array_equal(back[i], x[i])

    def test_project_requires_block_support(self, aux):
        """An auxiliary strategy cannot reach outside its block."""
        y = Profile(tuple(np.ones((2, 1)) for _ in range(4)))
        with pytest.raises(StructuralError, match="not supported"):
            project_L(aux, y)

    def test_project_requires_every_player(self, aux):
        """L needs one strategy per auxiliary player."""
        with pytest.raises(StructuralError):
            project_L(aux, Profile((np.ones((2, 1)),)))

    def test_equal_split_payoffs(self, aux, worked):
        """Player 2's ex ante value of the equal split is split by state."""
        y = decompose(aux, constant_profile(worked, (1.0, 1.0, 1.0)))
        assert aux_payoffs(aux, y).tolist() == pytest.approx([1.0, 0.5, 0.0, 1.0])
        assert g_utility(aux, 1, y) == pytest.approx(0.5)

    def test_payoffs_sum_to_ex_ante_utility(self, aux, worked):
        """Summing a player's auxiliary payoffs gives their ex ante utility."""
        x = Profile.from_blocks(worked, [[[0.5]], [[2.0], [2.0]], [[0.5]]])
        payoffs = aux_payoffs(aux, decompose(aux, x))
        assert payoffs[1] + payoffs[2] == pytest.approx(ex_ante_utility(worked, x, 1))
        assert payoffs[0] == pytest.approx(ex_ante_utility(worked, x, 0))

    @pytest.mark.parametrize("seed", range(100))
    def test_aux_utility_is_block_mass_times_interim_utility(self, random_economy, seed):
        """g_j(y) = mu(K) E(u_i(L(y)) | K) for every auxiliary player, five profiles per economy."""
        econ = random_economy(seed)
        aux = build_auxiliary_game(econ)
        rng = np.random.default_rng(seed)
        for _ in range(5):
            y = _random_aux_profile(aux, rng)
            x = project_L(aux, y)
            for j, p in enumerate(aux.players):
                expected = econ.space.mass(p.block) * interim_utility(econ, x, p.origin)[min(p.block)]
                assert g_utility(aux, j, y) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_L_is_linear(self, random_economy, seed):
        """L(a y + b z) = a L(y) + b L(z)."""
        econ = random_economy(seed)
        aux = build_auxiliary_game(econ)
        rng = np.random.default_rng(seed)
        y, z = _random_aux_profile(aux, rng), _random_aux_profile(aux, rng)
        a, b = 0.25, 1.5
        mixed = Profile(tuple(a * u + b * v for u, v in zip(y.values, z.values, strict=True)))
        left, ly, lz = project_L(aux, mixed), project_L(aux, y), project_L(aux, z)
        for i in range(econ.n_players):
            assert np.allclose(left[i], a * ly[i] + b * lz[i])

    @pytest.mark.parametrize("seed", range(20))
    def test_resources_and_feasibility_carry_over(self, random_economy, seed):
        """Auxiliary and original totals agree state by state, so feasibility agrees too."""
        econ = random_economy(seed)
        aux = build_auxiliary_game(econ)
        assert np.allclose(aux.endowments.sum(axis=0), econ.endowments.sum(axis=0))
        rng = np.random.default_rng(seed)
        for _ in range(10):
            y = _random_aux_profile(aux, rng)
            aux_total = sum(y.values)
            total = sum(project_L(aux, y).values)
            assert np.allclose(aux_total, total)
            aux_feasible = bool(np.all(aux_total <= aux.endowments.sum(axis=0) + 1e-12))
            feasible = bool(np.all(total <= econ.endowments.sum(axis=0) + 1e-12))
            assert aux_feasible == feasible


class TestCharacteristicGame:
    """Tests for sampled generators."""

    def test_pair_generators_at_half(self, aux):
        """{2,3} on the whole space: player 2 gets c at both states, player 3 the rest."""
        ntu = build_characteristic_game(aux, '1/2', prune=False)
        rows = ntu.generators[(1, 2, 3)]
        assert rows.shape[0] == 5
        assert sorted(rows[:, 1].tolist()) == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        for row in rows:
            c = 2 * row[1]
            assert row[2] == pytest.approx(0.5 * (1 - c))
            assert row[3] == pytest.approx(2 - c)
            assert row[0] == 0.0

    def test_status_quo_generator_first(self, aux):
        """Each coalition's first generator is its autarky payoff."""
        ntu = build_characteristic_game(aux, '1/2', prune=False)
        assert ntu.generators[(0,)][0].tolist() == pytest.approx([1.0, 0.0, 0.0, 0.0])
        assert ntu.generators[(1, 2, 3)][0].tolist() == pytest.approx([0.0, 0.5, 0.0, 1.0])

    def test_singletons_have_one_generator(self, aux):
        """A player alone can only consume their endowment."""
        ntu = build_characteristic_game(aux, '1/2')
        for singleton in [(0,), (1,), (2,), (3,)]:
            assert ntu.generators[singleton].shape[0] == 1

    def test_every_admissible_coalition_has_generators(self, aux):
        """The game is defined on exactly the admissible coalitions."""
        ntu = build_characteristic_game(aux, '1/2')
        assert set(ntu.generators) == {c.members for c in aux.admissible}
        assert len(ntu.witnesses[(0, 1, 2, 3)]) == ntu.generators[(0, 1, 2, 3)].shape[0]

    def test_sampling_step_coarsens(self, aux):
        """A tight budget doubles the step up to the coalition's largest total."""
        pair = aux.coalition_for((1, 2), {0, 1})
        assert sampling_step(aux.problem, pair, Fraction(1, 2), 100) == Fraction(1, 2)
        assert sampling_step(aux.problem, pair, Fraction(1, 2), 3) == Fraction(2)

    def test_sample_budget_limits_generators(self, aux):
        """No coalition gets more than the budget plus its status quo."""
        ntu = build_characteristic_game(aux, '1/4', sample_budget=8, prune=False)
        assert all(rows.shape[0] <= 9 for rows in ntu.generators.values())

    def test_coalition_payoffs_of_nothing(self, aux):
        """An empty strategy batch has no rows."""
        assert coalition_payoffs(aux, aux.admissible[0], []).shape == (0, 4)


class TestLift:
    """Tests for lifting a core payoff back to the original economy."""

    def test_balancing_combination(self, aux):
        """The terminal collection is balanced and its mixed witnesses use exactly the endowment."""
        ntu = build_characteristic_game(aux, '1/2')
        point = scarf_core_point(ntu, achievable=lambda candidate: True)
        assert is_balanced_collection(point.collection.coalitions, point.collection.weights, aux.n)
        y = balancing_combination(aux, ntu, point)
        project_L(aux, y)
        assert np.allclose(sum(y.values), aux.endowments.sum(axis=0), atol=1e-9)
        payoffs = aux_payoffs(aux, y)
        for j in range(aux.n):
            if j not in point.slack_players:
                assert payoffs[j] >= point.payoffs[j] - 1e-9

    def test_status_quo_rows_for_other_coalitions(self, aux):
        """Giving non-admissible coalitions their status-quo payoffs keeps the point undominated."""
        ntu = build_characteristic_game(aux, '1/2')
        point = scarf_core_point(ntu, achievable=lambda candidate: True)
        autarky = aux_payoffs(aux, decompose(aux, aux.status_quo()))
        admissible = {c.members for c in aux.admissible}
        widened = NTUGame(aux.n)
        for members, rows in ntu.generators.items():
            for row in rows:
                widened.add_generator(members, row)
        added = 0
        for members in all_coalitions(aux.n):
            if members in admissible:
                continue
            row = np.zeros(aux.n)
            row[list(members)] = autarky[list(members)]
            widened.add_generator(members, row)
            added += 1
        assert added > 0
        assert widened.dominating_generator(point.payoffs) is None
        again = scarf_core_point(widened, achievable=lambda candidate: True)
        assert ntu.dominating_generator(again.payoffs) is None

    def test_lift_of_exact_payoff(self, aux, worked):
        """The witness's own payoffs lift with zero slack."""
        x = constant_profile(worked, (1.0, 1.0, 1.0))
        y = decompose(aux, x)
        lifted = lift_core_point(aux, aux_payoffs(aux, y), y)
        assert lifted.slack == pytest.approx(np.zeros(4))
        assert lifted.profile[1].ravel().tolist() == [1.0, 1.0]

    def test_short_witness_rejected(self, aux, worked):
        """A witness paying less than the core point is an error."""
        y = decompose(aux, constant_profile(worked, (1.0, 1.0, 1.0)))
        with pytest.raises(ValidationError) as raised:
            lift_core_point(aux, [2.0, 0.5, 0.0, 1.0], y)
        assert raised.value.violations and '(1,{a,b})' in raised.value.violations[0]

    def test_infeasible_witness_rejected(self, aux):
        """A witness using more than the aggregate endowment is an error."""
        y = Profile((
            np.full((2, 1), 2.0),
            np.array([[1.0], [0.0]]),
            np.array([[0.0], [1.0]]),
            np.full((2, 1), 1.0),
        ))
        with pytest.raises(ValidationError, match="not feasible"):
            lift_core_point(aux, np.zeros(4), y)


class TestSolveStage:
    """Tests for stage tagging."""

    def test_stage_recorded(self):
        """Errors leaving a stage carry its name."""
        with pytest.raises(StructuralError) as raised:
            with solve_stage('lift'):
                raise StructuralError("boom")
        assert raised.value.stage == 'lift'

    def test_inner_stage_wins(self):
        """Nested stages keep the innermost name."""
        with pytest.raises(StructuralError) as raised:
            with solve_stage('outer'), solve_stage('inner'):
                raise StructuralError("boom")
        assert raised.value.stage == 'inner'


@pytest.mark.slow
class TestSolvePipeline:
    """End-to-end solves on small economies."""

    def test_worked_economy(self, worked):
        """The worked economy is certified at step 1/2 on the first pivoting round."""
        report = solve_interim_core(worked, '1/2')
        assert report.admissible == 9
        assert report.conditions.ok
        assert report.certified
        assert report.rounds == 0
        assert report.certification_epsilon == 0.0
        assert validate_profile(worked, report.profile) == []
        assert np.all(report.slack >= -1e-7)
        assert report.generators and report.generators[0] > 0
        assert in_core(worked, report.profile, CoreConcept.interim()).member
        json.dumps(report.to_dict(worked))

    def test_conditions_checked_before_pivoting(self, random_economy, monkeypatch):
        """The balancedness check runs first and a failing check is reported, not fatal."""
        calls = []

        def conditions(*args, **kwargs):
            calls.append('conditions')
            return ScarfConditionsReport(balanced=False, failures=['forced'])

        def pivot(*args, **kwargs):
            calls.append('pivot')
            return scarf_core_point(*args, **kwargs)

        monkeypatch.setattr(derived, 'check_scarf_conditions', conditions)
        monkeypatch.setattr(derived, 'scarf_core_point', pivot)
        econ = random_economy(3, n_players=1, n_states=2)
        report = solve_interim_core(econ, '1/2', rounds=0)
        assert calls == ['conditions', 'pivot']
        assert not report.conditions.ok
        assert report.certified

    def test_single_player_economy(self, random_economy):
        """Alone, the only feasible profile is the endowment, which is certified."""
        econ = random_economy(3, n_players=1, n_states=2)
        report = solve_interim_core(econ, '1/2', rounds=0)
        assert report.certified
        assert np.allclose(report.profile[0], econ.endowments[0])
