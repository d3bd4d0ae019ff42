"""Dataset-quality diagnostics: bonus DP, relative uncertainty, coverage."""

import numpy as np
import pytest

import pmvi
from pmvi import (
    ConfigError,
    MarkovPolicy,
    OfflineDataset,
    balanced_schedule,
    bonus_value_dp,
    collect_behavior,
    collect_predetermined,
    coverage_sufficient_check,
    expected_feature_outer,
    relative_uncertainty,
    well_explored_check,
)
from oracles import brute_force_max_total


def uniform_pair(game):
    return MarkovPolicy.uniform(game, 1), MarkovPolicy.uniform(game, 2)


def uniform_bandit_data(n_per_cell):
    game = pmvi.cyclic_bandit()
    schedule = balanced_schedule(9 * n_per_cell, 3, 3)
    return game, collect_predetermined(game, schedule, np.random.default_rng(0))


def concatenate(d1: OfflineDataset, d2: OfflineDataset) -> OfflineDataset:
    return OfflineDataset(
        states=np.vstack([d1.states, d2.states]),
        actions_p1=np.vstack([d1.actions_p1, d2.actions_p1]),
        actions_p2=np.vstack([d1.actions_p2, d2.actions_p2]),
        rewards=np.vstack([d1.rewards, d2.rewards]),
        next_states=np.vstack([d1.next_states, d2.next_states]),
        provenance=d1.provenance,
    )


class TestBonusValueDP:
    @pytest.mark.parametrize("fixed_player,seed", [(1, 0), (2, 1)])
    def test_matches_exhaustive_search(self, fixed_player, seed):
        game = pmvi.three_state_game()
        rng = np.random.default_rng(seed)
        tables = rng.uniform(0, 1, size=(3, 3, 2, 2))
        fixed = MarkovPolicy(
            rng.dirichlet(np.ones(2), size=(3, 3)), player=fixed_player
        )
        value, roaming = bonus_value_dp(game, tables, fixed)
        assert value == pytest.approx(
            float(brute_force_max_total(game, tables, fixed)), abs=1e-12
        )
        # the returned pure policy realises the optimum
        pair = (roaming, fixed) if fixed_player == 2 else (fixed, roaming)
        assert pmvi.expected_total(game, pair[0], pair[1], tables) == pytest.approx(
            value, abs=1e-12
        )

    def test_ties_resolve_to_smallest_action(self):
        game = pmvi.three_state_game()
        value, roaming = bonus_value_dp(game, np.full((3, 3, 2, 2), 0.25), uniform_pair(game)[0])
        assert value == pytest.approx(0.75, abs=1e-12)
        assert np.all(roaming.probs[..., 0] == 1.0)

    def test_shape_check(self):
        game = pmvi.three_state_game()
        with pytest.raises(ConfigError, match="tables shape"):
            bonus_value_dp(game, np.zeros((3, 3, 2)), uniform_pair(game)[0])


class TestRelativeUncertainty:
    def test_empty_dataset_saturates_at_horizon(self):
        game = pmvi.three_state_game()
        data = collect_behavior(game, *uniform_pair(game), 0, np.random.default_rng(0))
        report = relative_uncertainty(game, data)
        assert report.ru == pytest.approx(3.0, abs=1e-12)
        assert report.ru == max(report.ru_max_side, report.ru_min_side)

    @pytest.mark.parametrize("n", [0, 4, 25])
    def test_uniformly_filled_bandit_closed_form(self, n):
        game, data = uniform_bandit_data(n)
        report = relative_uncertainty(game, data)
        assert report.ru == pytest.approx((1.0 + n) ** -0.5, abs=1e-12)
        assert report.ru_max_side == pytest.approx(report.ru_min_side, abs=1e-12)

    def test_more_data_never_hurts(self):
        game = pmvi.three_state_game()
        d1 = collect_behavior(game, *uniform_pair(game), 30, np.random.default_rng(1))
        d2 = collect_behavior(game, *uniform_pair(game), 30, np.random.default_rng(2))
        ru_single = relative_uncertainty(game, d1).ru
        ru_double = relative_uncertainty(game, concatenate(d1, d2)).ru
        assert ru_double <= ru_single + 1e-12

    def test_extra_equilibrium_pairs_only_tighten(self):
        game = pmvi.mixed_bandit()
        data = collect_behavior(game, *uniform_pair(game), 40, np.random.default_rng(3))
        base = relative_uncertainty(game, data)
        nash = pmvi.exact_nash_values(game)
        multi = relative_uncertainty(
            game,
            data,
            ne_pairs=[(nash.policy_max, nash.policy_min), uniform_pair(game)],
        )
        assert multi.ru <= base.ru + 1e-12
        assert multi.ne_index in (0, 1)
        # repeat call is bit-for-bit stable
        assert relative_uncertainty(game, data).ru == base.ru

    def test_pair_validation(self):
        game = pmvi.cyclic_bandit()
        data = collect_behavior(game, *uniform_pair(game), 5, np.random.default_rng(0))
        with pytest.raises(ConfigError, match="at least one"):
            relative_uncertainty(game, data, ne_pairs=[])
        p1, p2 = uniform_pair(game)
        with pytest.raises(ConfigError, match="max-player, min-player"):
            relative_uncertainty(game, data, ne_pairs=[(p2, p1)])


class TestCoverage:
    def test_uniform_bandit_margins(self):
        n = 6
        game, data = uniform_bandit_data(n)
        good = coverage_sufficient_check(game, data, c1=1.0 / 9.0)
        assert good.ok
        assert good.margin == pytest.approx(2.0 * n / 3.0, abs=1e-9)
        assert good.n_policies_checked == 6
        bad = coverage_sufficient_check(game, data, c1=1.0)
        assert not bad.ok
        assert bad.margin == pytest.approx(-2.0 * n, abs=1e-9)

    def test_limit_guard(self):
        game = pmvi.three_state_game()
        data = collect_behavior(game, *uniform_pair(game), 10, np.random.default_rng(0))
        with pytest.raises(ConfigError, match="limit"):
            coverage_sufficient_check(game, data, c1=0.1, limit=100)

    def test_c1_must_be_positive(self):
        game, data = uniform_bandit_data(1)
        with pytest.raises(ConfigError, match="c1"):
            coverage_sufficient_check(game, data, c1=0.0)


class TestWellExplored:
    def test_uniform_play_on_bandit(self):
        game = pmvi.cyclic_bandit()
        ok, lams = well_explored_check(game, *uniform_pair(game), threshold=1.0 / 9.0)
        assert ok
        assert lams.shape == (1,)
        assert lams[0] == pytest.approx(1.0 / 9.0, abs=1e-12)

    def test_pure_play_is_degenerate(self):
        game = pmvi.cyclic_bandit()
        pair = (MarkovPolicy.pure(game, 1, 0), MarkovPolicy.pure(game, 2, 0))
        ok, lams = well_explored_check(game, *pair, threshold=0.01)
        assert not ok
        assert lams[0] == pytest.approx(0.0, abs=1e-12)
        ok_zero, _ = well_explored_check(game, *pair, threshold=0.0)
        assert ok_zero


class TestExpectedFeatureOuter:
    @pytest.mark.parametrize("seed", range(3))
    def test_unit_trace_and_psd_for_indicator_features(self, seed):
        game = pmvi.three_state_game()
        rng = np.random.default_rng(seed)
        pol_max = MarkovPolicy(rng.dirichlet(np.ones(2), size=(3, 3)), player=1)
        pol_min = MarkovPolicy(rng.dirichlet(np.ones(2), size=(3, 3)), player=2)
        outer = expected_feature_outer(game, pol_max, pol_min)
        assert outer.shape == (3, 12, 12)
        for h in range(3):
            assert np.trace(outer[h]) == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(outer[h])[0] >= -1e-12

    def test_player_order_enforced(self):
        game = pmvi.three_state_game()
        p1, p2 = uniform_pair(game)
        with pytest.raises(ConfigError, match="order"):
            expected_feature_outer(game, p2, p1)
