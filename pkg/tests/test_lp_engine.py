"""
Tests for the linear-programming layer.
"""
import numpy as np
import pytest

import lp_engine
from games import Profile, validate_profile
from lp_engine import LinearProgram, convex_combination
from problem_file import load_problem


@pytest.fixture
def method_spy(monkeypatch):
    """Record the method of every linprog call."""
    seen = []
    real = lp_engine.linprog

    def spy(*args, **kwargs):
        seen.append(kwargs['method'])
        return real(*args, **kwargs)

    monkeypatch.setattr(lp_engine, 'linprog', spy)
    return seen


class TestLinearProgram:
    """Tests for the incremental model builder."""

    def test_maximize_under_bound(self):
        """max x + y with x + y <= 2 and x <= 1/2."""
        lp = LinearProgram()
        x, y = lp.add_variables(2)
        lp.add_le({x: 1.0, y: 1.0}, 2.0)
        lp.add_le({x: 1.0}, 0.5)
        lp.maximize(x)
        lp.maximize(y)
        result = lp.solve()
        assert result.feasible
        assert result.x[x] + result.x[y] == pytest.approx(2.0)
        assert result.objective == pytest.approx(-2.0)

    def test_infeasible_model(self):
        """Contradicting rows give an infeasible result, not an error."""
        lp = LinearProgram()
        x = lp.add_variable()
        lp.add_ge({x: 1.0}, 2.0)
        lp.add_le({x: 1.0}, 1.0)
        result = lp.solve()
        assert not result.feasible
        assert result.x is None


class TestConvexCombination:
    """Tests for the shared hull and domination query."""

    def test_dominating_combination(self):
        """The midpoint of (3,1) and (1,3) reaches (2,2) and nothing beyond."""
        weights = convex_combination([[3.0, 1.0], [1.0, 3.0]], [2.0, 2.0])
        assert weights == pytest.approx([0.5, 0.5], abs=1e-9)
        assert convex_combination([[3.0, 1.0], [1.0, 3.0]], [2.5, 2.5]) is None

    def test_tolerance_relaxes_target(self):
        """Targets within the tolerance above the hull still count."""
        points = [[3.0, 1.0], [1.0, 3.0]]
        assert convex_combination(points, [2.0 + 1e-10, 2.0], tolerance=1e-9) is not None

    def test_exact_hull_membership(self):
        """Exact mode asks for equality with the target."""
        square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        weights = convex_combination(square, [0.5, 0.25], exact=True)
        assert weights.sum() == pytest.approx(1.0)
        assert square.T @ weights == pytest.approx([0.5, 0.25], abs=1e-9)
        assert convex_combination(square, [0.0, 0.0], exact=False) is not None
        assert convex_combination(square, [1.5, 0.0], exact=True) is None

    def test_no_points(self):
        """An empty point set reaches nothing."""
        assert convex_combination(np.zeros((0, 2)), [0.0, 0.0]) is None

    def test_configured_method_is_used(self, override_config, method_spy):
        """The solver method comes from solver_options.lp_method."""
        override_config('highs-ds', 'solver_options', 'lp_method')
        assert convex_combination([[3.0, 1.0], [1.0, 3.0]], [2.0, 2.0]) is not None
        assert method_spy == ['highs-ds']

    def test_action_hull_check_uses_configured_method(self, override_config, method_spy, problems_dir):
        """Game profile validation goes through the same LP layer."""
        game = load_problem(problems_dir / 'entry_game.yaml')
        override_config('highs-ipm', 'solver_options', 'lp_method')
        assert validate_profile(game, Profile.constant(game, [[0.5], [0.25]])) == []
        assert method_spy
        assert set(method_spy) == {'highs-ipm'}
