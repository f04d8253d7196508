"""Episode simulators, failure estimation, classifiers, opacity choice."""

import math

import numpy as np
import pytest

from opacitylab.models import (CoordinationGame, ExtractionModel,
                               ObservationChannel, SweepCell, SweepResult)
from opacitylab.equilibrium import solve_threshold, one_step_failure_prob
from opacitylab.survival import TriggerPolicy
from opacitylab.sweeps import (INCONCLUSIVE, NON_VIABLE, VIABLE, SweepGrid,
                               choose_opacity, classify_limit_viability,
                               coordination_episodes, derive_cell_seed,
                               estimate_failure_prob, extraction_episodes,
                               opacity_monotonicity_check, run_sweep,
                               simulate_episode, verdicts_monotone_in_lambda,
                               wilson_halfwidth, wilson_interval)


@pytest.fixture
def benchmark_eq(benchmark_game, benchmark_channel):
    return solve_threshold(benchmark_game, benchmark_channel)


class TestSeedsAndIntervals:
    def test_cell_seed_is_stable(self):
        # frozen so that accidental changes to the derivation break loudly
        assert derive_cell_seed(0, 0, 0, 1) == 434089692465467812
        assert derive_cell_seed(7, 2, 1, 5) != derive_cell_seed(7, 1, 2, 5)

    def test_wilson_halfwidth_positive_at_zero(self):
        assert wilson_halfwidth(0.0, 10 ** 6) > 0

    def test_wilson_interval_contains_estimate(self):
        lo, hi = wilson_interval(0.3, 1000)
        assert lo < 0.3 < hi

    def test_wilson_coverage_on_known_cell(self, benchmark_game,
                                           benchmark_channel, benchmark_eq):
        # one-round cell with closed-form failure probability
        q = benchmark_game.q
        p_true = q * one_step_failure_prob(benchmark_eq, 1) \
            + (1 - q) * one_step_failure_prob(benchmark_eq, 0)
        n, hits = 10 ** 4, 0
        for rep in range(100):
            p_hat, _ = estimate_failure_prob(
                benchmark_game, benchmark_channel, benchmark_eq, 0, n,
                seed=1000 + rep)
            lo, hi = wilson_interval(p_hat, n)
            hits += lo <= p_true <= hi
        assert hits >= 90


class TestCoordinationEpisodes:
    def test_all_continue_pays_geometric_sum(self, benchmark_game,
                                             opaque_channel):
        eq = solve_threshold(benchmark_game, opaque_channel)
        T = 7
        failed, tau, payoff = coordination_episodes(benchmark_game, eq, T,
                                                    5000, seed=3)
        assert not failed.any()
        geom = benchmark_game.R * sum(benchmark_game.delta ** t
                                      for t in range(T + 1))
        theta1 = payoff > 0
        assert np.allclose(payoff[theta1], geom)
        assert np.all(payoff[~theta1] == 0.0)

    def test_all_withdraw_fails_at_zero_with_zero_payoff(self,
                                                         opaque_channel):
        game = CoordinationGame(q=0.4, R=1.0, delta=0.9, w=0.4)
        eq = solve_threshold(game, opaque_channel)
        failed, tau, payoff = coordination_episodes(game, eq, 5, 100,
                                                    seed=3)
        assert failed.all()
        assert np.all(tau == 0)
        assert np.all(payoff == 0.0)

    def test_first_round_failure_matches_closed_form(self, benchmark_game,
                                                     benchmark_channel,
                                                     benchmark_eq):
        n = 400_000
        p_hat, _ = estimate_failure_prob(benchmark_game, benchmark_channel,
                                         benchmark_eq, 0, n, seed=17)
        q = benchmark_game.q
        p_true = q * one_step_failure_prob(benchmark_eq, 1) \
            + (1 - q) * one_step_failure_prob(benchmark_eq, 0)
        se = math.sqrt(p_true * (1 - p_true) / n)
        assert abs(p_hat - p_true) <= 3 * se

    def test_multi_round_failure_matches_compounded_hazard(
            self, benchmark_game, benchmark_channel, benchmark_eq):
        # independent recursion oracle: per-state hazards compound over the
        # T+1 rounds and mix through the prior
        T, n = 5, 400_000
        p_hat, hw = estimate_failure_prob(benchmark_game, benchmark_channel,
                                          benchmark_eq, T, n, seed=19)
        q = benchmark_game.q
        h1 = one_step_failure_prob(benchmark_eq, 1)
        h0 = one_step_failure_prob(benchmark_eq, 0)
        p_true = q * (1 - (1 - h1) ** (T + 1)) \
            + (1 - q) * (1 - (1 - h0) ** (T + 1))
        assert abs(p_hat - p_true) <= 3 * hw

    def test_deterministic_given_seed(self, benchmark_game,
                                      benchmark_channel, benchmark_eq):
        a = coordination_episodes(benchmark_game, benchmark_eq, 3, 1000,
                                  seed=5)
        b = coordination_episodes(benchmark_game, benchmark_eq, 3, 1000,
                                  seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_simulate_episode_scalar(self, benchmark_game, opaque_channel):
        eq = solve_threshold(benchmark_game, opaque_channel)
        out = simulate_episode(benchmark_game, opaque_channel, eq, 5,
                               seed=1)
        assert not out.failed and out.tau_f is None


class TestExtractionEpisodes:
    def test_safe_policy_never_fails(self):
        # no extraction, tiny shocks, start far above the threshold
        m = ExtractionModel(alpha=0.1, x_max=0.5, s_fail=0.2,
                            shock_std=0.001, sigma0=0.1, s0=0.9)
        pol = TriggerPolicy(b_dagger=0.5, x_high=0.0, x_low=0.0)
        failed, tau, payoff = extraction_episodes(m, pol, 0.1, 5, 20_000,
                                                  seed=9)
        assert failed.mean() < 1e-3
        assert np.all(payoff == 0.0)  # pi(0) = 0 flows

    def test_flows_accrue_while_alive(self):
        m = ExtractionModel(alpha=0.01, x_max=0.5, s_fail=0.2,
                            shock_std=0.001, sigma0=0.1, s0=0.9)
        pol = TriggerPolicy(b_dagger=0.05, x_high=0.3, x_low=0.0)
        failed, tau, payoff = extraction_episodes(m, pol, 0.1, 4, 1000,
                                                  seed=9)
        assert np.allclose(payoff[~failed], 4 * m.pi(0.3))

    def test_opacity_widens_stopping_margin(self):
        # the sweep example regime: noisier observation -> larger filter
        # variance -> the trigger statistic turns extraction off farther
        # from the failure threshold -> higher survival
        m = ExtractionModel(alpha=0.06, x_max=1.0, s_fail=0.2,
                            shock_std=0.02, sigma0=0.3, b_dagger=0.7,
                            s0=0.5)
        pol = TriggerPolicy(b_dagger=0.7, x_high=1.0, x_low=0.0)
        rates = []
        for lam in (1.0, 4.0, 16.0):
            failed, _, _ = extraction_episodes(
                m, pol, m.obs_std(1.0, lam), 10, 100_000, seed=11)
            rates.append(failed.mean())
        assert rates[0] > rates[1] > rates[2]


class TestEstimateFailure:
    def test_opaque_cell_is_exactly_zero(self, benchmark_game,
                                         opaque_channel):
        p_hat, hw = estimate_failure_prob(benchmark_game, opaque_channel,
                                          None, 5, 10 ** 4, seed=2)
        assert p_hat == 0.0
        assert hw > 0

    def test_requires_positive_n(self, benchmark_game, benchmark_channel,
                                 benchmark_eq):
        with pytest.raises(ValueError, match="n"):
            estimate_failure_prob(benchmark_game, benchmark_channel,
                                  benchmark_eq, 1, 0, seed=2)


def synthetic_sweep(p_of_eps, ladder=(0.1, 0.05, 0.025, 0.0125),
                    lam=1.0, horizons=(1,), n=10 ** 5, seed=0):
    """Cells with binomially sampled failure rates around a known law."""
    rng = np.random.default_rng(seed)
    cells = []
    for eps in ladder:
        for T in horizons:
            p = p_of_eps(eps)
            k = rng.binomial(n, p)
            p_hat = k / n
            cells.append(SweepCell(
                epsilon=eps, lam=lam, horizon=T, failure_prob=p_hat,
                ci_halfwidth=wilson_halfwidth(p_hat, n), n_samples=n,
                seed=seed))
    return SweepResult(cells=cells, base_seed=seed)


class TestViabilityClassifier:
    def test_vanishing_family_classifies_viable(self):
        # square-root decay on a deep ladder: the final rate falls below
        # the resolution of its own confidence interval
        sweep = synthetic_sweep(lambda eps: 0.01 * math.sqrt(eps),
                                ladder=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5))
        verdict = classify_limit_viability(sweep, 1.0)
        assert verdict.classification == VIABLE

    def test_bounded_family_classifies_non_viable(self):
        sweep = synthetic_sweep(lambda eps: 0.3)
        assert classify_limit_viability(sweep, 1.0).classification \
            == NON_VIABLE

    def test_identically_zero_is_viable(self):
        sweep = synthetic_sweep(lambda eps: 0.0)
        assert classify_limit_viability(sweep, 1.0).classification == VIABLE

    def test_identically_one_is_non_viable(self):
        sweep = synthetic_sweep(lambda eps: 1.0)
        assert classify_limit_viability(sweep, 1.0).classification \
            == NON_VIABLE

    def test_blip_trend_is_inconclusive(self):
        # a clean endpoint but a non-decreasing excursion along the ladder:
        # neither verdict's evidence pattern
        sweep = synthetic_sweep(lambda eps: 0.05 if eps == 0.05 else 0.0)
        assert classify_limit_viability(sweep, 1.0).classification \
            == INCONCLUSIVE

    def test_requires_four_ladder_points(self):
        sweep = synthetic_sweep(lambda eps: 0.0, ladder=(0.1, 0.05))
        with pytest.raises(ValueError, match="4"):
            classify_limit_viability(sweep, 1.0)

    def test_missing_lambda_rejected(self):
        sweep = synthetic_sweep(lambda eps: 0.0)
        with pytest.raises(KeyError):
            classify_limit_viability(sweep, 3.0)


class TestSweepAndMonotonicity:
    @pytest.fixture
    def mini_grid(self):
        # small-noise regime: the informative cells' failure rates are
        # state-driven and flat across lambda, so survival is weakly
        # increasing in lambda (at moderate epsilon the re-solved cutoffs
        # make it non-monotone; see the theorem1 preset notes)
        return SweepGrid(epsilon_ladder=(0.001, 0.0005, 0.00025, 0.000125),
                         lambda_grid=(1.0, 4.0, 1e6), horizons=(1,),
                         n_samples=10 ** 4, base_seed=5)

    def test_grid_validation(self):
        with pytest.raises(ValueError, match="decreasing"):
            SweepGrid(epsilon_ladder=(0.1, 0.2), lambda_grid=(1.0, 2.0),
                      horizons=(1,))
        with pytest.raises(ValueError, match="increasing"):
            SweepGrid(epsilon_ladder=(0.2, 0.1), lambda_grid=(2.0, 1.0),
                      horizons=(1,))
        with pytest.raises(ValueError, match="n_samples"):
            SweepGrid(epsilon_ladder=(0.2, 0.1), lambda_grid=(1.0, 2.0),
                      horizons=(1,), n_samples=100)

    def test_sweep_reproducible_and_resumable(self, benchmark_game,
                                              benchmark_channel, mini_grid):
        a = run_sweep(benchmark_game, mini_grid, benchmark_channel)
        b = run_sweep(benchmark_game, mini_grid, benchmark_channel)
        assert a.cells == b.cells
        # resuming from a partial cell set reproduces the same result
        partial = {(0, 0, 1): a.cells[0], (0, 1, 1): a.cells[1]}
        c = run_sweep(benchmark_game, mini_grid, benchmark_channel,
                      completed=partial)
        assert c.cells == a.cells

    def test_threads_do_not_change_results(self, benchmark_game,
                                           benchmark_channel, mini_grid):
        a = run_sweep(benchmark_game, mini_grid, benchmark_channel)
        b = run_sweep(benchmark_game, mini_grid, benchmark_channel,
                      threads=4)
        assert a.cells == b.cells

    def test_benchmark_monotone_and_verdicts_ordered(self, benchmark_game,
                                                     benchmark_channel,
                                                     mini_grid):
        result = run_sweep(benchmark_game, mini_grid, benchmark_channel)
        report = opacity_monotonicity_check(result, 1)
        assert report.passed
        assert verdicts_monotone_in_lambda(result.verdicts)

    def test_flat_profile_trivially_monotone(self):
        cells = [SweepCell(epsilon=0.1, lam=lam, horizon=1,
                           failure_prob=0.0, ci_halfwidth=1e-4,
                           n_samples=10 ** 4, seed=0)
                 for lam in (1.0, 2.0, 4.0)]
        result = SweepResult(cells=cells)
        assert opacity_monotonicity_check(result, 1).passed

    def test_violation_reported_with_magnitude(self):
        cells = [SweepCell(epsilon=0.1, lam=lam, horizon=1,
                           failure_prob=p, ci_halfwidth=0.001,
                           n_samples=10 ** 4, seed=0)
                 for lam, p in ((1.0, 0.1), (2.0, 0.3), (4.0, 0.3))]
        report = opacity_monotonicity_check(SweepResult(cells=cells), 1)
        assert not report.passed
        assert report.violations[0].magnitude \
            == pytest.approx(0.2 - 0.002, abs=1e-12)


class TestChooseOpacity:
    def test_single_lambda_is_argmax(self, benchmark_game,
                                     benchmark_channel):
        out = choose_opacity(benchmark_game, benchmark_channel, [2.0], 3,
                             10 ** 4, seed=4)
        assert out.lambda_star == 2.0
        assert not out.lambda_star_gt_min

    def test_tie_breaks_toward_smaller_lambda(self, benchmark_game):
        # a channel family whose equilibria are all-continue everywhere:
        # payoffs independent of lambda, so the tie resolves conservatively
        game = CoordinationGame(q=0.4, R=1.0, delta=0.9, w=0.0)
        channel = ObservationChannel(epsilon=0.04, lam=1.0, lam_max=1e6)
        out = choose_opacity(game, channel, [1.0, 4.0, 16.0], 3, 10 ** 4,
                             seed=4)
        assert out.statistically_tied
        assert out.lambda_star == 1.0
        assert not out.lambda_star_gt_min

    def test_collapse_regime_prefers_opacity(self, benchmark_game):
        channel = ObservationChannel(epsilon=0.04, lam=1.0, lam_max=1e6)
        out = choose_opacity(benchmark_game, channel, [1.0, 1e6], 10,
                             10 ** 5, seed=4)
        assert out.lambda_star == 1e6
        assert out.lambda_star_gt_min
        assert out.separation > 3 * out.separation_ci
