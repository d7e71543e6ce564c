"""Selection-rule components: CDF, prior, posterior, gain estimates, selection."""

import math

import numpy as np
import pytest

from aucns.data import InteractionDataset, PopularityProfile
from aucns.errors import (
    ConfigError,
    DegenerateDatasetError,
    NumericalDegeneracyError,
    SamplerError,
)
from aucns.mf import FactorModel
from aucns.rule import (
    AucnsBatchSampler,
    CandidateEvaluation,
    SamplerConfig,
    aucns_select,
    delta_minus,
    delta_minus_exact,
    delta_plus,
    delta_plus_exact,
    empirical_cdf,
    info_minus_sum,
    info_plus_sum,
    posterior_tn,
    prior_tn,
    top_gamma_count,
    top_gamma_scores,
)
from aucns.samplers import SamplerContext


def _sig(t):
    return 1.0 / (1.0 + math.exp(-t))


# ---------------------------------------------------------------------------
# Config and evaluation record
# ---------------------------------------------------------------------------


def test_sampler_config_validation():
    SamplerConfig().validate()
    bad = [
        dict(alpha=0.49), dict(alpha=1.01), dict(beta=-0.1),
        dict(gamma=0.0), dict(gamma=1.1), dict(n_mc=0), dict(m_candidates=0),
        dict(epsilon_prior=0.0), dict(epsilon_prior=0.5),
        dict(dns_candidate_count=0),
    ]
    for kw in bad:
        with pytest.raises(ConfigError):
            SamplerConfig(**kw).validate()


def test_sampler_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown keys"):
        SamplerConfig.from_dict({"alpha": 0.75, "temperature": 2.0})


def test_candidate_evaluation_objective_formula():
    ev = CandidateEvaluation(item=3, score=0.1, cdf=0.4, tau_neg=0.6,
                             posterior_tn=0.25, delta_plus=2.0, delta_minus=0.5)
    assert abs(ev.objective - (2.0 * 0.25 - 0.5 * 0.75)) < 1e-15


# ---------------------------------------------------------------------------
# Empirical CDF: binary search must equal the linear scan exactly
# ---------------------------------------------------------------------------


def test_empirical_cdf_equals_linear_scan_on_1000_inputs():
    rng = np.random.default_rng(0)
    pop = np.sort(np.concatenate([
        rng.normal(size=200),
        np.repeat(rng.normal(size=19), 3),  # deliberate duplicates
    ]))
    n = pop.size
    queries = np.concatenate([
        rng.uniform(pop.min() - 1, pop.max() + 1, size=600),
        rng.choice(pop, size=200),                      # exact members
        rng.choice(pop, size=200) + rng.choice([-1e-12, 1e-12], size=200),
    ])
    assert queries.size == 1000
    for x in queries:
        linear = float(np.sum(pop <= x)) / n
        assert empirical_cdf(pop, float(x)) == linear  # exact, no tolerance
    # vectorized form agrees elementwise
    vec = empirical_cdf(pop, queries)
    assert np.array_equal(vec, np.array([np.sum(pop <= x) / n for x in queries]))


def test_empirical_cdf_empty_population_raises():
    with pytest.raises(SamplerError, match="empty"):
        empirical_cdf(np.array([]), 0.0)


# ---------------------------------------------------------------------------
# Popularity prior
# ---------------------------------------------------------------------------


def test_prior_tn_matches_clipped_power_oracle():
    eps = 0.01
    for beta in (0.0, 0.0005, 0.01, 0.1, 1.0, 2.0):
        for pop in (0, 1, 5, 50, 100):
            got = prior_tn(pop, 100, beta, eps)
            raw = (pop / 100.0) ** beta
            want = min(max(raw, eps), 1.0 - eps)
            assert abs(got - want) < 1e-15


def test_prior_tn_zero_popularity_floors_at_epsilon():
    assert prior_tn(0, 10, 0.5, 0.01) == 0.01


def test_prior_tn_array_input():
    tau = prior_tn(np.array([0, 5, 10]), 10, 1.0, 0.05)
    assert np.allclose(tau, [0.05, 0.5, 0.95])


def test_prior_tn_errors():
    with pytest.raises(ConfigError):
        prior_tn(1, 10, -0.5, 0.01)
    with pytest.raises(ConfigError):
        prior_tn(1, 10, 0.5, 0.6)
    with pytest.raises(DegenerateDatasetError):
        prior_tn(1, 0, 0.5, 0.01)


# ---------------------------------------------------------------------------
# Posterior: limits, monotonicity, independent mixture oracle
# ---------------------------------------------------------------------------

TAU_GRID = (0.01, 0.2, 0.5, 0.8, 0.99)
PHI_GRID = tuple(np.linspace(0.0, 1.0, 21))


def test_posterior_alpha_half_returns_prior():
    for tau in TAU_GRID:
        for phi in PHI_GRID:
            assert abs(posterior_tn(phi, 0.5, tau) - tau) < 1e-9


def test_posterior_alpha_one_top_of_ranking_vanishes():
    for tau in TAU_GRID:
        assert abs(posterior_tn(1.0, 1.0, tau)) < 1e-9


def test_posterior_alpha_one_bottom_of_ranking_is_certain():
    for tau in TAU_GRID:
        assert abs(posterior_tn(0.0, 1.0, tau) - 1.0) < 1e-9


def test_posterior_matches_two_component_mixture_oracle():
    # density of the rank position under each label:
    #   TN: a*(1-phi) + (1-a)*phi      FN: a*phi + (1-a)*(1-phi)
    # posterior = tau * f_tn / (tau * f_tn + (1 - tau) * f_fn)
    for alpha in (0.5, 0.6, 0.75, 0.9, 1.0):
        for tau in TAU_GRID:
            for phi in PHI_GRID:
                f_tn = alpha * (1 - phi) + (1 - alpha) * phi
                f_fn = alpha * phi + (1 - alpha) * (1 - phi)
                denom = tau * f_tn + (1 - tau) * f_fn
                if denom <= 1e-12:
                    continue
                want = tau * f_tn / denom
                assert abs(posterior_tn(phi, alpha, tau) - want) < 1e-12


def test_posterior_non_increasing_in_rank_position():
    for alpha in (0.55, 0.75, 1.0):
        for tau in TAU_GRID:
            post = [posterior_tn(phi, alpha, tau) for phi in PHI_GRID]
            assert all(b <= a + 1e-12 for a, b in zip(post, post[1:]))


def test_posterior_broadcasts_over_arrays():
    phi = np.array([0.0, 0.5, 1.0])
    post = posterior_tn(phi, 0.75, 0.5)
    assert post.shape == (3,)
    assert post[0] > post[1] > post[2]


def test_posterior_errors():
    with pytest.raises(ConfigError):
        posterior_tn(0.5, 0.4, 0.5)
    with pytest.raises(NumericalDegeneracyError):
        posterior_tn(1.0, 1.0, 1.0)  # unclipped prior of 1 collapses the mixture


# ---------------------------------------------------------------------------
# Gain estimates
# ---------------------------------------------------------------------------


def test_info_sums_match_hand_loops():
    pos = [0.5, -1.0, 2.0]
    neg = [0.1, 0.3]
    x = 0.4
    want_plus = sum(1.0 - _sig(s - x) for s in pos)
    want_minus = sum(1.0 - _sig(x - s) for s in neg)
    assert abs(info_plus_sum(np.array(pos), x) - want_plus) < 1e-12
    assert abs(info_minus_sum(np.array(neg), x) - want_minus) < 1e-12


def test_top_gamma_count_floors_at_one():
    assert top_gamma_count(100, 0.006) == 1
    assert top_gamma_count(1000, 0.006) == 6
    assert top_gamma_count(10, 1.0) == 10
    assert top_gamma_count(5, 0.05) == 1


def test_top_gamma_scores_descending_prefix():
    rng = np.random.default_rng(1)
    s = rng.normal(size=40)
    top = top_gamma_scores(s, 0.1)
    assert top.shape == (4,)
    assert np.array_equal(top, np.sort(s)[::-1][:4])


def _tiny_world(seed=2, n_items=10, dim=3):
    rng = np.random.default_rng(seed)
    model = FactorModel(rng.normal(size=(1, dim)), rng.normal(size=(n_items, dim)))
    return model


def test_delta_plus_exact_matches_hand_loop():
    model = _tiny_world()
    positives = np.array([0, 2, 5])
    x = 0.3
    want = sum(
        1.0 - _sig(float(model.item_factors[i] @ model.user_factors[0]) - x)
        for i in positives
    )
    got = delta_plus_exact(model, 0, positives, x)
    assert abs(got - want) < 1e-12


def test_delta_minus_exact_matches_hand_loop():
    model = _tiny_world()
    pool = np.array([1, 3, 4, 6, 7, 8, 9])
    x, gamma = -0.2, 0.3
    scores = sorted(
        (float(model.item_factors[i] @ model.user_factors[0]) for i in pool),
        reverse=True,
    )
    k = max(1, int(math.floor(gamma * len(pool))))  # = 2
    want = sum(1.0 - _sig(x - s) for s in scores[:k])
    got = delta_minus_exact(model, 0, pool, x, gamma)
    assert abs(got - want) < 1e-12


def test_delta_plus_monte_carlo_is_unbiased():
    model = _tiny_world(seed=3)
    positives = np.array([0, 1, 2, 4, 7, 9])
    x = 0.1
    exact = delta_plus_exact(model, 0, positives, x)
    rng = np.random.default_rng(4)
    estimates = np.array([
        delta_plus(model, 0, positives, x, n_mc=2, rng=rng) for _ in range(4000)
    ])
    sem = estimates.std(ddof=1) / math.sqrt(estimates.size)
    assert abs(estimates.mean() - exact) < 4 * sem + 1e-12


def test_delta_plus_uses_supplied_draws():
    model = _tiny_world(seed=5)
    positives = np.array([0, 1, 2])
    draws = np.array([2, 2])
    got = delta_plus(model, 0, positives, 0.0, n_mc=2,
                     rng=np.random.default_rng(0), draws=draws)
    g2 = float(model.item_factors[2] @ model.user_factors[0])
    assert abs(got - 3.0 * (1.0 - _sig(g2))) < 1e-12


def test_delta_minus_full_budget_equals_exact_at_gamma_one():
    model = _tiny_world(seed=6)
    pool = np.array([1, 3, 4, 6, 8])
    x = 0.25
    got = delta_minus(model, 0, pool, x, n_mc=9, gamma=1.0,
                      rng=np.random.default_rng(7))
    want = delta_minus_exact(model, 0, pool, x, gamma=1.0)
    assert abs(got - want) < 1e-10


def test_delta_estimators_reject_empty_inputs():
    model = _tiny_world()
    empty = np.array([], dtype=np.int64)
    rng = np.random.default_rng(0)
    with pytest.raises(SamplerError):
        delta_plus(model, 0, empty, 0.0, 2, rng)
    with pytest.raises(SamplerError):
        delta_plus_exact(model, 0, empty, 0.0)
    with pytest.raises(SamplerError):
        delta_minus(model, 0, empty, 0.0, 2, 0.5, rng)
    with pytest.raises(SamplerError):
        delta_minus_exact(model, 0, empty, 0.0, 0.5)


# ---------------------------------------------------------------------------
# Selection: independent replay of the documented draw order
# ---------------------------------------------------------------------------


def _replay_selection(seed, model, pool, pops, cfg):
    """Re-derive aucns_select from scratch: same rng consumption order,
    all quantities recomputed with plain python/math."""
    rng = np.random.default_rng(seed)
    u = model.user_factors[0]
    V = model.item_factors
    n_items = V.shape[0]
    positives = np.setdiff1d(np.arange(n_items), pool)
    pool_scores = np.sort(V[pool] @ u)

    cand = pool[rng.integers(0, pool.size, size=cfg.m_candidates)]
    pos_draws = positives[rng.integers(0, positives.size, size=cfg.n_mc)]
    neg_draws = rng.choice(pool, size=min(cfg.n_mc, pool.size), replace=False)

    pop_max = int(pops.max())
    best_obj, best_item = -math.inf, None
    for item in cand:
        x = float(V[item] @ u)
        phi = float(np.sum(pool_scores <= x)) / pool_scores.size
        raw = (pops[item] / pop_max) ** cfg.beta
        tau = min(max(raw, cfg.epsilon_prior), 1.0 - cfg.epsilon_prior)
        f_tn = cfg.alpha * (1 - phi) + (1 - cfg.alpha) * phi
        f_fn = cfg.alpha * phi + (1 - cfg.alpha) * (1 - phi)
        post = tau * f_tn / (tau * f_tn + (1 - tau) * f_fn)
        dp = positives.size * np.mean(
            [1.0 - _sig(float(V[j] @ u) - x) for j in pos_draws]
        )
        dm = cfg.gamma * pool.size * np.mean(
            [1.0 - _sig(x - float(V[j] @ u)) for j in neg_draws]
        )
        obj = dp * post - dm * (1.0 - post)
        if obj > best_obj:
            best_obj, best_item = obj, int(item)
    return best_item


def test_aucns_select_matches_independent_replay():
    master = np.random.default_rng(8)
    for trial in range(40):
        n_items = int(master.integers(8, 16))
        dim = int(master.integers(2, 5))
        model = FactorModel(
            master.normal(size=(1, dim)), master.normal(size=(n_items, dim))
        )
        pool_size = int(master.integers(3, n_items - 1))
        pool = np.sort(master.choice(n_items, size=pool_size, replace=False))
        pops = master.integers(0, 50, size=n_items)
        pops[int(master.integers(0, n_items))] = 50  # ensure pop_max > 0
        profile = PopularityProfile(
            pop=pops.copy(), pop_max=50, hot_set=frozenset({0}), hot_quantile=0.25
        )
        cfg = SamplerConfig(
            alpha=float(master.uniform(0.55, 0.95)),
            beta=float(master.uniform(0.0, 2.0)),
            gamma=float(master.choice([0.25, 0.5, 1.0])),
            n_mc=int(master.integers(1, 5)),
            m_candidates=int(master.integers(1, 7)),
        )
        seed = int(master.integers(0, 2**31))
        ctx = SamplerContext(0, -1, pool, np.random.default_rng(seed))
        got = aucns_select(ctx, model, profile, cfg)
        want = _replay_selection(seed, model, pool, pops, cfg)
        assert got == want, f"trial {trial}: {got} != {want}"


def test_aucns_select_empty_pool_raises():
    model = _tiny_world()
    profile = PopularityProfile(np.ones(10, dtype=np.int64), 1,
                                frozenset({0}), 0.25)
    ctx = SamplerContext(0, 1, np.array([], dtype=np.int64),
                         np.random.default_rng(0))
    with pytest.raises(SamplerError, match="empty"):
        aucns_select(ctx, model, profile, SamplerConfig())


# ---------------------------------------------------------------------------
# Batch implementation internals
# ---------------------------------------------------------------------------


def _batch_sampler(dataset, profile, model, cfg=None, seed=9):
    sampler = AucnsBatchSampler(dataset, profile, cfg or SamplerConfig(),
                                np.random.default_rng(seed))
    sampler.begin_epoch(model.user_factors, model.item_factors)
    return sampler


def test_batch_cdf_matches_per_user_linear_scan(toy_dataset, toy_profile, toy_model):
    sampler = _batch_sampler(toy_dataset, toy_profile, toy_model)
    scores_full = toy_model.user_factors @ toy_model.item_factors.T
    users = np.array([0, 3, 7, 12, 24])

    # per user: one exact member score, one midpoint, and both extremes
    x_hat = np.empty((users.size, 4))
    for r, u in enumerate(users):
        pool = toy_dataset.neg_items(u)
        pop = np.sort(scores_full[u, pool])
        x_hat[r] = (pop[len(pop) // 2], (pop[0] + pop[1]) / 2.0, -1e6, 1e6)

    got = sampler._cdf(users, x_hat)
    for r, u in enumerate(users):
        pool = toy_dataset.neg_items(u)
        pop = np.sort(scores_full[u, pool])
        for c in range(4):
            q = min(max(x_hat[r, c], -sampler.B), sampler.B)
            want = float(np.sum(pop <= q)) / pop.size
            assert got[r, c] == want
    assert np.all(got[:, 2] == 0.0) and np.all(got[:, 3] == 1.0)


def test_batch_distinct_draws_stay_in_pool(toy_dataset, toy_profile, toy_model):
    sampler = _batch_sampler(toy_dataset, toy_profile, toy_model)
    users = np.arange(toy_dataset.num_users)
    items, w = sampler._draw_distinct_negatives(users, 4)
    assert items.shape == (users.size, 4) and w.shape == items.shape
    assert np.allclose(w.sum(axis=1), 1.0)
    for r, u in enumerate(users):
        assert not toy_dataset.train_mask[u, items[r]].any()
        assert len(set(items[r].tolist())) == 4  # pools here all exceed budget


def test_batch_small_pool_enumerates_exactly():
    # user 0 trains on 3 of 5 items -> pool {3, 4} smaller than the budget
    ds = InteractionDataset(
        num_users=1, num_items=5,
        train_pos=(np.array([0, 1, 2]),),
        test_pos=(np.array([], dtype=np.int64),),
    )
    profile = PopularityProfile(np.array([3, 2, 1, 0, 0]), 3,
                                frozenset({0}), 0.25)
    rng = np.random.default_rng(10)
    model = FactorModel(rng.normal(size=(1, 3)), rng.normal(size=(5, 3)))
    sampler = _batch_sampler(ds, profile, model, SamplerConfig(n_mc=5))
    items, w = sampler._draw_distinct_negatives(np.array([0]), 5)
    assert set(items[0, :2].tolist()) == {3, 4}
    assert np.allclose(w[0], [0.5, 0.5, 0.0, 0.0, 0.0])
    neg = sampler.sample(np.array([0]), np.array([1]))
    assert neg[0] in (3, 4)
