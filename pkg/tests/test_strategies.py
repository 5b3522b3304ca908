import math

import numpy as np
import pytest
from scipy.linalg import solve_triangular
from scipy.stats import beta as beta_dist

from oim.graph import FeatureMap, laplacian_features, load_edge_list_text
from oim.strategies import (BetaPrior, BetaThompson, Cucb, EdgeStats,
                            EpsilonGreedy, ExploitMean, ExploreRand, ImLinUcb,
                            LinearModelState, LinThompson, LinThompsonUcb,
                            RandomSeeds, RandPlusMean, TrueProbabilities,
                            beta_posterior, beta_ts_sample, cucb_estimate,
                            empirical_mean, epsilon_greedy_estimate,
                            linthompson_sample, linthompson_ucb_estimate,
                            linucb_estimate, random_explore)


def stats_with(t_counts, n_counts):
    s = EdgeStats(len(t_counts))
    s.t_count = np.array(t_counts, dtype=np.int64)
    s.n_count = np.array(n_counts, dtype=np.int64)
    return s


def toy_features(edge_count=3, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    node_emb = rng.uniform(-1, 1, size=(edge_count + 1, dim))
    edge_feat = rng.uniform(-1, 1, size=(edge_count, dim))
    return FeatureMap(dimension=dim, node_embedding=node_emb, edge_feature=edge_feat)


class TestEdgeStats:
    def test_update_accumulates(self):
        s = EdgeStats(4)
        s.update(np.array([0, 2, 2]), np.array([1, 0, 1]))
        assert s.t_count.tolist() == [1, 0, 2, 0]
        assert s.n_count.tolist() == [1, 0, 1, 0]

    def test_counts_monotone_and_consistent(self):
        rng = np.random.default_rng(0)
        s = EdgeStats(6)
        for _ in range(50):
            prev_t, prev_n = s.t_count.copy(), s.n_count.copy()
            k = int(rng.integers(0, 5))
            eids = rng.integers(0, 6, size=k)
            bits = rng.integers(0, 2, size=k)
            s.update(eids, bits)
            assert np.all(s.t_count >= prev_t)
            assert np.all(s.n_count >= prev_n)
            assert np.all(s.n_count <= s.t_count)
            assert np.all((s.t_count - prev_t) >= (s.n_count - prev_n))

    def test_invalid_bits_rejected(self):
        s = EdgeStats(2)
        with pytest.raises(ValueError):
            s.update(np.array([0]), np.array([2]))


class TestEmpiricalMean:
    def test_three_of_four(self):
        assert empirical_mean(stats_with([4], [3]))[0] == pytest.approx(0.75)

    def test_unobserved_default(self):
        assert empirical_mean(stats_with([0], [0]), 0.5)[0] == pytest.approx(0.5)

    def test_zero_successes(self):
        assert empirical_mean(stats_with([7], [0]))[0] == pytest.approx(0.0)


class TestRandomExplore:
    def test_bounds_narrow_range(self):
        vals = random_explore(1000, 0.0, 0.01, np.random.default_rng(0))
        assert vals.min() >= 0.0
        assert vals.max() < 0.01

    def test_full_range_variant(self):
        vals = random_explore(1000, 0.0, 1.0, np.random.default_rng(0))
        assert vals.max() > 0.9
        assert vals.min() < 0.1

    def test_invalid_range_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            random_explore(3, 0.5, 0.5, rng)
        with pytest.raises(ValueError):
            random_explore(3, -0.1, 0.5, rng)
        with pytest.raises(ValueError):
            random_explore(3, 0.5, 1.5, rng)

    def test_deterministic_given_seed(self):
        a = random_explore(10, 0.0, 0.01, np.random.default_rng(4))
        b = random_explore(10, 0.0, 0.01, np.random.default_rng(4))
        assert np.array_equal(a, b)


class TestCucb:
    def test_unobserved_optimistic(self):
        assert cucb_estimate(stats_with([0], [0]), t=5)[0] == pytest.approx(1.0)

    def test_bonus_vanishes_with_data(self):
        big = 10**9
        est = cucb_estimate(stats_with([big], [big // 2]), t=100)[0]
        assert abs(est - 0.5) < 1e-3

    def test_hand_computed_bonus_clamps(self):
        # mean 0.5 plus sqrt(3 * ln(e^2) / (2 * 2)) = 0.5 + sqrt(1.5) > 1
        t = math.e ** 2
        est = cucb_estimate(stats_with([2], [1]), t=t, exploration_coeff=1.0)[0]
        assert est == pytest.approx(1.0)
        # with a small coefficient the bonus stays unclamped and exact
        est = cucb_estimate(stats_with([2], [1]), t=t, exploration_coeff=0.1)[0]
        assert est == pytest.approx(0.5 + 0.1 * math.sqrt(1.5))

    def test_round_index_validated(self):
        with pytest.raises(ValueError):
            cucb_estimate(stats_with([1], [1]), t=0)


class TestEpsilonGreedy:
    def test_explore_frequency_matches_c_over_t(self):
        stats = stats_with([10, 10], [5, 5])
        rng = np.random.default_rng(0)
        trials = 20_000
        explored = 0
        for _ in range(trials):
            est = epsilon_greedy_estimate(stats, t=1, c=0.1, rng=rng)
            if not np.allclose(est, 0.5):
                explored += 1
        se = math.sqrt(0.1 * 0.9 / trials)
        assert abs(explored / trials - 0.1) <= 4 * se

    def test_large_c_always_explores(self):
        stats = stats_with([10], [5])
        rng = np.random.default_rng(1)
        vals = [epsilon_greedy_estimate(stats, t=1, c=10.0, rng=rng)[0]
                for _ in range(50)]
        assert any(abs(v - 0.5) > 1e-9 for v in vals)
        assert all(0.0 <= v <= 1.0 for v in vals)

    def test_decay_with_round(self):
        stats = stats_with([10], [5])
        rng = np.random.default_rng(2)
        explored = sum(
            not np.allclose(epsilon_greedy_estimate(stats, t=10, c=0.1, rng=rng), 0.5)
            for _ in range(20_000))
        assert explored / 20_000 < 0.02

    def test_validation(self):
        with pytest.raises(ValueError):
            epsilon_greedy_estimate(stats_with([1], [0]), t=1, c=0.0,
                                    rng=np.random.default_rng(0))


class TestBetaThompsonSampling:
    def test_posterior_parameters_exact(self):
        prior = BetaPrior(1.0, 1.0)
        a, b = beta_posterior(stats_with([5], [2]), prior)
        assert a[0] == pytest.approx(3.0)
        assert b[0] == pytest.approx(4.0)

    def test_posterior_mean_three_sigma(self):
        prior = BetaPrior(1.0, 1.0)
        stats = stats_with([5], [2])
        rng = np.random.default_rng(3)
        draws = np.array([beta_ts_sample(stats, prior, rng)[0]
                          for _ in range(100_000)])
        mean, var = 3 / 7, (3 * 4) / (49 * 8)
        assert abs(draws.mean() - mean) <= 3 * math.sqrt(var / draws.size)

    def test_flat_prior_no_data_is_uniform(self):
        prior = BetaPrior(1.0, 1.0)
        stats = EdgeStats(1)
        rng = np.random.default_rng(4)
        draws = np.array([beta_ts_sample(stats, prior, rng)[0]
                          for _ in range(20_000)])
        assert abs(draws.mean() - 0.5) < 0.01
        assert abs(draws.var() - 1 / 12) < 0.005

    def test_concentration_with_massive_successes(self):
        big = 10**6
        prior = BetaPrior(1.0, 1.0)
        stats = stats_with([big], [big])
        # posterior quantile oracle: essentially all mass above 0.99
        assert beta_dist.ppf(1e-9, big + 1, 1) > 0.99
        rng = np.random.default_rng(5)
        draws = beta_ts_sample(stats_with([big] * 10_000, [big] * 10_000),
                               prior, rng)
        assert draws.min() > 0.99

    def test_marginal_means_converge_to_truth(self):
        rng = np.random.default_rng(6)
        truth = np.array([0.1, 0.4, 0.8])
        trials = 4000
        stats = EdgeStats(3)
        for _ in range(trials):
            bits = (rng.random(3) < truth).astype(int)
            stats.update(np.arange(3), bits)
        draws = np.array([beta_ts_sample(stats, BetaPrior(), rng)
                          for _ in range(3000)])
        post_sd = np.sqrt(truth * (1 - truth) / trials)
        assert np.all(np.abs(draws.mean(axis=0) - truth) <= 3 * post_sd + 0.01)

    def test_prior_validation(self):
        with pytest.raises(ValueError):
            BetaPrior(0.0, 1.0)


class TestLinearModelState:
    def test_scalar_ridge_hand_computation(self):
        state = LinearModelState(dim=1, ridge_lambda=1.0)
        state.update(np.array([[2.0]]), np.array([1.0]))
        assert state.gram[0, 0] == pytest.approx(5.0)
        assert state.response[0] == pytest.approx(2.0)
        assert state.theta_hat[0] == pytest.approx(0.4)

    def test_no_observations_leaves_state_unchanged(self):
        state = LinearModelState(dim=3)
        gram, resp = state.gram.copy(), state.response.copy()
        state.update(np.zeros((0, 3)), np.zeros(0))
        assert np.array_equal(state.gram, gram)
        assert np.array_equal(state.response, resp)

    def test_dimension_mismatch_rejected(self):
        state = LinearModelState(dim=3)
        with pytest.raises(ValueError):
            state.update(np.ones((1, 2)), np.ones(1))
        with pytest.raises(ValueError):
            state.update(np.ones((2, 3)), np.ones(3))

    def test_recovery_and_independent_normal_equations(self):
        d = 10
        rng = np.random.default_rng(7)
        theta_star = rng.uniform(0.02, 0.08, d)
        state = LinearModelState(dim=d, ridge_lambda=1.0)
        gram_ref = np.eye(d)
        resp_ref = np.zeros(d)
        for _ in range(100):
            X = rng.uniform(0, 1, size=(100, d))
            w = (rng.random(100) < X @ theta_star).astype(float)
            state.update(X, w)
            gram_ref += X.T @ X
            resp_ref += X.T @ w
        # independent normal-equations solver agrees
        assert np.allclose(state.theta_hat, np.linalg.solve(gram_ref, resp_ref),
                           atol=1e-8)
        assert np.linalg.norm(state.theta_hat - theta_star) < 0.1
        assert state.residual() < 1e-8

    def test_residual_invariant_random_updates(self):
        rng = np.random.default_rng(8)
        state = LinearModelState(dim=4)
        for _ in range(30):
            X = rng.normal(size=(int(rng.integers(1, 6)), 4))
            w = rng.random(X.shape[0])
            state.update(X, w)
            assert state.residual() < 1e-8

    def test_log_det_nondecreasing_so_radius_nondecreasing(self):
        rng = np.random.default_rng(9)
        state = LinearModelState(dim=3, delta=0.05)
        prev_logdet = state.log_det_gram
        prev_beta = state.confidence_radius()
        for _ in range(20):
            state.update(rng.normal(size=(2, 3)), rng.random(2))
            assert state.log_det_gram >= prev_logdet - 1e-12
            beta = state.confidence_radius()
            assert beta >= prev_beta - 1e-12
            prev_logdet, prev_beta = state.log_det_gram, beta


class TestLinUcbEstimate:
    def test_initial_state_unit_feature(self):
        # det V = lambda^d and delta = 1 zero the log term, so beta = sqrt(lambda);
        # a unit-norm feature then has width 1 and the estimate clamps at 1.
        state = LinearModelState(dim=2, ridge_lambda=1.0)
        fm = FeatureMap(2, np.zeros((1, 2)), np.array([[1.0, 0.0]]))
        est = linucb_estimate(state, fm, delta=1.0)
        assert est[0] == pytest.approx(1.0)
        assert state.confidence_radius(1.0) == pytest.approx(1.0)

    def test_zero_feature_gives_zero(self):
        state = LinearModelState(dim=2)
        fm = FeatureMap(2, np.zeros((1, 2)), np.zeros((1, 2)))
        assert linucb_estimate(state, fm)[0] == pytest.approx(0.0)

    def test_argmax_of_linear_term_stable_under_data_doubling(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(40, 3))
        w = rng.random(40)
        fm = FeatureMap(3, np.zeros((1, 3)), rng.normal(size=(8, 3)))
        once = LinearModelState(dim=3, ridge_lambda=1e-8)
        once.update(X, w)
        twice = LinearModelState(dim=3, ridge_lambda=1e-8)
        twice.update(np.vstack([X, X]), np.concatenate([w, w]))
        assert (np.argmax(fm.edge_feature @ once.theta_hat)
                == np.argmax(fm.edge_feature @ twice.theta_hat))

    def test_estimates_clamped(self):
        rng = np.random.default_rng(11)
        state = LinearModelState(dim=3)
        state.update(rng.normal(size=(50, 3)), rng.random(50) * 3)
        fm = FeatureMap(3, np.zeros((1, 3)), rng.normal(size=(20, 3)) * 5)
        est = linucb_estimate(state, fm)
        assert est.min() >= 0.0
        assert est.max() <= 1.0


class TestLinThompson:
    def test_zero_scale_degenerates_to_mean(self):
        rng = np.random.default_rng(12)
        state = LinearModelState(dim=2)
        state.update(rng.normal(size=(10, 2)), rng.random(10))
        fm = FeatureMap(2, np.zeros((1, 2)), rng.normal(size=(5, 2)))
        est = linthompson_sample(state, fm, t=3, rng=rng, scale=0.0)
        assert np.allclose(est, np.clip(fm.edge_feature @ state.theta_hat, 0, 1))

    def test_sampled_coefficient_variance(self):
        state = LinearModelState(dim=1, ridge_lambda=1.0)
        state.update(np.array([[math.sqrt(3.0)]]), np.array([0.0]))  # gram = 4
        assert state.gram[0, 0] == pytest.approx(4.0)
        state.response[:] = 0.0
        state.theta_hat[:] = 0.0
        rng = np.random.default_rng(13)
        draws = np.array([state.sample_coefficients(rng, 1.0)[0]
                          for _ in range(100_000)])
        target = 0.25  # v^2 / gram
        se = target * math.sqrt(2 / draws.size)
        assert abs(draws.var() - target) <= 3 * se
        assert abs(draws.mean()) <= 3 * math.sqrt(target / draws.size)

    def test_reproducible_given_stream(self):
        rng_a, rng_b = np.random.default_rng(14), np.random.default_rng(14)
        state = LinearModelState(dim=3)
        fm = toy_features(4, 3, seed=1)
        a = linthompson_sample(state, fm, t=2, rng=rng_a)
        b = linthompson_sample(state, fm, t=2, rng=rng_b)
        assert np.array_equal(a, b)

    def test_ts_scale_formula(self):
        state = LinearModelState(dim=4, noise_scale=0.5, delta=0.05)
        t = 7
        expect = 0.5 * math.sqrt(9 * 4 * math.log(t / 0.05))
        assert state.ts_scale(t) == pytest.approx(expect)


class TestLinThompsonUcb:
    def test_zero_scale_equals_linucb(self):
        rng = np.random.default_rng(15)
        state = LinearModelState(dim=3, delta=0.05)
        state.update(rng.normal(size=(20, 3)), rng.random(20))
        fm = toy_features(6, 3, seed=2)
        ts = linthompson_ucb_estimate(state, fm, t=4, rng=rng, scale=0.0)
        ucb = linucb_estimate(state, fm)
        assert np.allclose(ts, ucb)

    def test_zero_scale_zero_feature_pure_mean(self):
        state = LinearModelState(dim=2)
        fm = FeatureMap(2, np.zeros((1, 2)), np.zeros((3, 2)))
        est = linthompson_ucb_estimate(state, fm, t=2,
                                       rng=np.random.default_rng(0), scale=0.0)
        assert np.allclose(est, 0.0)

    def test_initial_state_closed_form(self):
        # fresh state: estimate = x . (v/sqrt(lambda)) z + beta ||x|| / sqrt(lambda)
        lam, delta, dim = 2.0, 0.5, 3
        fm = toy_features(5, dim, seed=3)
        state = LinearModelState(dim=dim, ridge_lambda=lam, delta=delta)
        seed = 99
        got = linthompson_ucb_estimate(state, fm, t=3, rng=np.random.default_rng(seed))
        # independent evaluation, replaying the same normal draw
        z = np.random.default_rng(seed).standard_normal(dim)
        v = 0.5 * math.sqrt(9 * dim * math.log(3 / delta))
        theta = v * z / math.sqrt(lam)
        beta_r = math.sqrt(lam) + math.sqrt(-2 * math.log(delta))
        widths = np.linalg.norm(fm.edge_feature, axis=1) / math.sqrt(lam)
        expect = np.clip(fm.edge_feature @ theta + beta_r * widths, 0, 1)
        assert np.allclose(got, expect)


class TestStrategyObjects:
    @pytest.fixture()
    def setup(self):
        g = load_edge_list_text("0 1\n1 2\n2 0\n0 2")
        fm = laplacian_features(g, 2)
        return g, fm

    def test_all_estimates_in_unit_interval(self, setup):
        g, fm = setup
        m = g.edge_count
        rng = np.random.default_rng(16)
        strategies = [
            ExploitMean(m), ExploreRand(m), RandPlusMean(m), Cucb(m),
            EpsilonGreedy(m), BetaThompson(m),
            TrueProbabilities(np.full(m, 0.3)),
            ImLinUcb(fm), LinThompson(fm), LinThompsonUcb(fm),
        ]
        for t in range(1, 8):
            eids = rng.integers(0, m, size=3)
            bits = rng.integers(0, 2, size=3)
            for s in strategies:
                est = s.estimate(t, rng)
                assert est.shape == (m,)
                assert est.min() >= 0.0
                assert est.max() <= 1.0
                s.observe(eids, bits, rng)

    def test_random_seeds_strategy(self, setup):
        g, _ = setup
        s = RandomSeeds()
        assert s.selects_seeds_directly
        seeds = s.select_seeds(g, 2, np.random.default_rng(0))
        assert len(seeds) == 2
        with pytest.raises(RuntimeError):
            s.estimate(1, np.random.default_rng(0))

    def test_rand_plus_mean_combines_terms(self, setup):
        g, _ = setup
        s = RandPlusMean(g.edge_count, default=0.0, lo=0.0, hi=0.01)
        rng = np.random.default_rng(17)
        est = s.estimate(1, rng)
        assert est.max() < 0.01  # nothing observed: uniform term only
        s.observe(np.array([0, 0, 0, 0]), np.array([1, 1, 1, 1]), rng)
        est = s.estimate(2, rng)
        assert est[0] == pytest.approx(1.0)  # mean 1 clamps the sum

    def test_linthompson_ucb_regression_target_variants(self, setup):
        g, fm = setup
        rng = np.random.default_rng(18)
        sampled = LinThompsonUcb(fm, regress_on="posterior-sample")
        raw = LinThompsonUcb(fm, regress_on="bit")
        eids = np.array([0, 1, 2])
        bits = np.array([1, 0, 1])
        sampled.observe(eids, bits, rng)
        raw.observe(eids, bits, rng)
        X = fm.edge_feature[eids]
        assert np.allclose(raw.state.response, X.T @ bits.astype(float))
        assert not np.allclose(sampled.state.response, X.T @ bits.astype(float))
        with pytest.raises(ValueError):
            LinThompsonUcb(fm, regress_on="bogus")

    def test_gram_all_edges_variant(self, setup):
        g, fm = setup
        rng = np.random.default_rng(19)
        s = ImLinUcb(fm, gram_all_edges=True)
        s.observe(np.array([], dtype=np.int64), np.array([], dtype=np.int64), rng)
        # gram grows by the full-edge outer-product sum even without feedback
        expect = np.eye(2) + fm.edge_feature.T @ fm.edge_feature
        assert np.allclose(s.state.gram, expect)
        assert np.allclose(s.state.response, 0.0)
