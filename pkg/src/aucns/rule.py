"""Partial-AUC-optimal negative selection.

An un-interacted item x of user u is either a true negative (TN) or a false
negative (an item the user would actually like). Selection combines two
signals:

* sample information: the empirical CDF Phi_n of the candidate's score among
  the user's un-interacted items, weighted by a confidence alpha in [0.5, 1]
  (the encoder's macro-AUC);
* prior information: a popularity prior tau^- = clip((pop/pop_max)^beta),
  encoding that popular un-interacted items are more likely true negatives.

The two combine into a posterior P(TN|x) via a two-sample order-statistics
mixture, and the sampler picks the candidate maximizing the expected gain of
the partial AUC at FPR range [0, gamma]:

    argmax_x  Delta_x+ * P(TN|x) - Delta_x- * P(FN|x)

where Delta_x+ sums positive-side surrogate losses 1 - sigma(g(x+) - g(x))
and Delta_x- sums 1 - sigma(g(x) - g(x-)) over the top-gamma negatives.
Monte-Carlo forms estimate both sums with N uniform draws.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import (
    ConfigError,
    DegenerateDatasetError,
    NumericalDegeneracyError,
    SamplerError,
    reject_unknown_keys,
)
from .mathutil import sigmoid


@dataclass
class SamplerConfig:
    """Knobs for all samplers; alpha/beta/gamma/n_mc/m_candidates drive aucns.

    alpha: confidence of sample information (empirical macro-AUC), in [0.5, 1].
    beta: prior concentration on popularity, >= 0.
    gamma: FPR range of the partial AUC objective, in (0, 1].
    n_mc: Monte-Carlo draws N for each Delta estimate.
    m_candidates: candidate set size |M| per selection.
    epsilon_prior: symmetric clipping for tau^-.
    dns_candidate_count / dns_argmax: knobs for the DNS baseline only.
    """

    alpha: float = 0.75
    beta: float = 0.01
    gamma: float = 0.006
    n_mc: int = 5
    m_candidates: int = 6
    epsilon_prior: float = 0.01
    dns_candidate_count: int = 16
    dns_argmax: bool = False

    def validate(self):
        if not 0.5 <= self.alpha <= 1.0:
            raise ConfigError(f"sampler.alpha must be in [0.5, 1], got {self.alpha}")
        if self.beta < 0:
            raise ConfigError(f"sampler.beta must be >= 0, got {self.beta}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"sampler.gamma must be in (0, 1], got {self.gamma}")
        if self.n_mc < 1:
            raise ConfigError(f"sampler.n_mc must be >= 1, got {self.n_mc}")
        if self.m_candidates < 1:
            raise ConfigError(
                f"sampler.m_candidates must be >= 1, got {self.m_candidates}"
            )
        if not 0.0 < self.epsilon_prior < 0.5:
            raise ConfigError(
                f"sampler.epsilon_prior must be in (0, 0.5), got {self.epsilon_prior}"
            )
        if self.dns_candidate_count < 1:
            raise ConfigError(
                f"sampler.dns_candidate_count must be >= 1, got {self.dns_candidate_count}"
            )
        return self

    @classmethod
    def from_dict(cls, d):
        allowed = [f.name for f in fields(cls)]
        reject_unknown_keys(d, allowed, "sampler_config")
        return cls(**d).validate()


@dataclass(frozen=True)
class CandidateEvaluation:
    """Per-candidate quantities behind one selection decision."""

    item: int
    score: float
    cdf: float
    tau_neg: float
    posterior_tn: float
    delta_plus: float
    delta_minus: float

    @property
    def objective(self):
        return self.delta_plus * self.posterior_tn - self.delta_minus * (
            1.0 - self.posterior_tn
        )


def empirical_cdf(user_scores, x_hat):
    """Phi_n(x_hat) = (1/n) * #{scores <= x_hat} over a sorted score array.

    user_scores must be sorted ascending (rebuilt once per epoch by the
    training loop); lookup is a binary search, so per-candidate cost is
    O(log n). x_hat may be a scalar or an array.
    """
    user_scores = np.asarray(user_scores)
    if user_scores.size == 0:
        raise SamplerError("empirical_cdf: empty score population")
    count = np.searchsorted(user_scores, x_hat, side="right")
    result = count / user_scores.size
    return float(result) if np.isscalar(x_hat) else result


def prior_tn(pop_i, pop_max, beta, epsilon_prior):
    """tau^- = clip((pop_i / pop_max)^beta, eps, 1 - eps). Scalar or array."""
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if not 0.0 < epsilon_prior < 0.5:
        raise ConfigError(f"epsilon_prior must be in (0, 0.5), got {epsilon_prior}")
    if pop_max <= 0:
        raise DegenerateDatasetError(
            f"prior_tn needs pop_max > 0, got {pop_max} (no training interactions?)"
        )
    ratio = np.asarray(pop_i, dtype=np.float64) / float(pop_max)
    tau = np.clip(ratio**beta, epsilon_prior, 1.0 - epsilon_prior)
    return float(tau) if np.isscalar(pop_i) else tau


def posterior_tn(cdf, alpha, tau_neg):
    """P(TN | x) from the order-statistics mixture.

        P(TN|x) = [a*t- + (1-2a)*Phi*t-] /
                  [a*t- + (1-a)*t+ + (1-2a)*Phi*(t- - t+)],   t+ = 1 - t-

    At alpha = 0.5 this collapses to the prior tau^-; at alpha = 1, Phi = 1 it
    vanishes. Inputs may be scalars or broadcastable arrays.
    """
    if not 0.5 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0.5, 1], got {alpha}")
    cdf_a = np.asarray(cdf, dtype=np.float64)
    tau_n = np.asarray(tau_neg, dtype=np.float64)
    tau_p = 1.0 - tau_n
    numer = alpha * tau_n + (1.0 - 2.0 * alpha) * cdf_a * tau_n
    denom = alpha * tau_n + (1.0 - alpha) * tau_p + (1.0 - 2.0 * alpha) * cdf_a * (
        tau_n - tau_p
    )
    if np.any(np.abs(denom) <= 1e-12):
        raise NumericalDegeneracyError(
            f"posterior_tn denominator vanished (alpha={alpha}, "
            f"cdf={cdf!r}, tau_neg={tau_neg!r})"
        )
    post = numer / denom
    if np.any(post < -1e-9) or np.any(post > 1.0 + 1e-9):
        raise NumericalDegeneracyError(
            f"posterior_tn outside [0,1] beyond tolerance: {post!r}"
        )
    post = np.clip(post, 0.0, 1.0)
    return float(post) if np.isscalar(cdf) and np.isscalar(tau_neg) else post


# ---------------------------------------------------------------------------
# Delta estimators. The *exact* forms sum over the full populations (used by
# the oracles); the Monte-Carlo forms draw N samples as in training.
# ---------------------------------------------------------------------------

def info_plus_sum(pos_scores, x_hat):
    """Sum over positives of 1 - sigma(g(x+) - x_hat)."""
    return float(np.sum(1.0 - sigmoid(np.asarray(pos_scores) - x_hat)))


def info_minus_sum(neg_scores, x_hat):
    """Sum over negatives of 1 - sigma(x_hat - g(x-))."""
    return float(np.sum(1.0 - sigmoid(x_hat - np.asarray(neg_scores))))


def top_gamma_count(n_negatives, gamma):
    """|N| = floor(gamma * n), but never below 1."""
    return max(1, int(np.floor(gamma * n_negatives)))


def top_gamma_scores(neg_scores, gamma):
    """The top-|N| negative scores in descending order."""
    neg_scores = np.sort(np.asarray(neg_scores, dtype=np.float64))[::-1]
    return neg_scores[: top_gamma_count(len(neg_scores), gamma)]


def delta_plus(model, user, positives, x_hat, n_mc, rng, draws=None):
    """Monte-Carlo Delta_x+ = |I_u^+| * mean_N[1 - sigma(g(x_j^+) - x_hat)].

    Draws n_mc positives uniformly with replacement from `positives`
    (the user's I_u^+ as item indices). A pre-drawn item array may be passed
    instead, letting one selection evaluate all its candidates against the
    same draws (common random numbers).
    """
    positives = np.asarray(positives)
    if positives.size == 0:
        raise SamplerError(f"delta_plus: user {user} has no positives")
    if draws is None:
        draws = positives[rng.integers(0, positives.size, size=n_mc)]
    g = model.item_factors[draws] @ model.user_factors[user]
    return positives.size * float(np.mean(1.0 - sigmoid(g - x_hat)))


def delta_plus_exact(model, user, positives, x_hat):
    """Exact Delta_x+ summed over all of I_u^+."""
    positives = np.asarray(positives)
    if positives.size == 0:
        raise SamplerError(f"delta_plus_exact: user {user} has no positives")
    g = model.item_factors[positives] @ model.user_factors[user]
    return info_plus_sum(g, x_hat)


def delta_minus(model, user, pool, x_hat, n_mc, gamma, rng, draws=None):
    """Monte-Carlo Delta_x- = gamma * |I_u^-| * mean_N[1 - sigma(x_hat - g(x_j^-))].

    Draws min(n_mc, |pool|) items uniformly WITHOUT replacement from the whole
    candidate pool I_u^- (not the top-gamma subset), so a draw budget covering
    the pool degenerates to the exact mean. gamma enters only as the scale,
    which makes the estimate biased for gamma < 1 — the known trade-off of
    the O(N) form. Pre-drawn items may be passed as with delta_plus.
    """
    pool = np.asarray(pool)
    if pool.size == 0:
        raise SamplerError(f"delta_minus: user {user} has an empty pool")
    if draws is None:
        draws = rng.choice(pool, size=min(n_mc, pool.size), replace=False)
    g = model.item_factors[draws] @ model.user_factors[user]
    return gamma * pool.size * float(np.mean(1.0 - sigmoid(x_hat - g)))


def delta_minus_exact(model, user, pool, x_hat, gamma):
    """Exact Delta_x- summed over the top-gamma scored subset of the pool."""
    pool = np.asarray(pool)
    if pool.size == 0:
        raise SamplerError(f"delta_minus_exact: user {user} has an empty pool")
    g = model.item_factors[pool] @ model.user_factors[user]
    return info_minus_sum(top_gamma_scores(g, gamma), x_hat)


def aucns_select(ctx, model, profile, config):
    """Pick one negative for ctx.user: argmax of the expected pAUC gain.

    Draws |M| candidates uniformly (with replacement) from ctx.candidate_pool,
    evaluates each, and returns the argmax item; ties resolve to the first
    candidate in draw order. The user's positives are the pool's complement.
    """
    pool = np.asarray(ctx.candidate_pool)
    if pool.size == 0:
        raise SamplerError(f"aucns_select: empty candidate pool for user {ctx.user}")
    num_items = model.item_factors.shape[0]
    positives = np.setdiff1d(np.arange(num_items), pool, assume_unique=False)
    if positives.size == 0:
        raise SamplerError(f"aucns_select: user {ctx.user} has no positives")
    uvec = model.user_factors[ctx.user]
    pool_scores = np.sort(model.item_factors[pool] @ uvec)

    cand = pool[ctx.rng.integers(0, pool.size, size=config.m_candidates)]
    # one draw set per selection, shared by every candidate
    pos_draws = positives[ctx.rng.integers(0, positives.size, size=config.n_mc)]
    neg_draws = ctx.rng.choice(pool, size=min(config.n_mc, pool.size), replace=False)
    evals = []
    for item in cand:
        x_hat = float(model.item_factors[item] @ uvec)
        cdf = empirical_cdf(pool_scores, x_hat)
        tau = prior_tn(int(profile.pop[item]), profile.pop_max, config.beta,
                       config.epsilon_prior)
        post = posterior_tn(cdf, config.alpha, tau)
        dp = delta_plus(model, ctx.user, positives, x_hat, config.n_mc, ctx.rng,
                        draws=pos_draws)
        dm = delta_minus(model, ctx.user, pool, x_hat, config.n_mc, config.gamma,
                         ctx.rng, draws=neg_draws)
        evals.append(CandidateEvaluation(int(item), x_hat, cdf, tau, post, dp, dm))
    best = int(np.argmax([e.objective for e in evals]))
    return evals[best].item


class AucnsBatchSampler:
    """Vectorized trainer-side implementation of aucns_select.

    begin_epoch snapshots per-user sorted negative-score arrays (the CDF
    population); per batch the live model scores candidates, so per positive
    the cost is O(|M| * (N + log|I_u^-|)) — linear in |I_u^-| only via the
    per-epoch sort, as the complexity contract requires.
    """

    def __init__(self, dataset, profile, config, rng):
        self.ds = dataset
        self.cfg = config
        self.rng = rng
        self.tau_item = prior_tn(
            profile.pop.astype(np.float64), profile.pop_max,
            config.beta, config.epsilon_prior,
        )
        counts = np.array([len(a) for a in dataset.train_pos], dtype=np.int64)
        if np.any(counts == dataset.num_items):
            raise SamplerError("a user has no un-interacted items to sample")
        self.n_pos = counts
        self.n_neg = dataset.num_items - counts
        self.pos_flat = np.concatenate(
            [np.asarray(a, dtype=np.int64) for a in dataset.train_pos]
        )
        self.pos_off = np.concatenate(([0], np.cumsum(counts)[:-1]))
        self.mask = dataset.train_mask
        self._users = np.arange(dataset.num_users)
        # users whose pool fits inside the draw budget get exact enumeration
        self._small_pool = {
            int(u): np.flatnonzero(~self.mask[u]).astype(np.int64)
            for u in np.flatnonzero(self.n_neg <= config.n_mc)
        }

    def begin_epoch(self, user_factors, item_factors):
        self.U = user_factors
        self.V = item_factors
        scores = user_factors @ item_factors.T
        scores[self.mask] = np.inf
        scores.sort(axis=1)  # training positives sort to the tail of each row
        keep = np.arange(self.ds.num_items)[None, :] < self.n_neg[:, None]
        flat = scores[keep]
        # shift each user's sorted block by 2B*u so one global sorted array
        # serves binary searches for every user at once
        self.B = float(np.max(np.abs(flat))) + 1.0
        self.flat_shifted = flat + 2.0 * self.B * np.repeat(self._users, self.n_neg)
        self.row_start = np.concatenate(([0], np.cumsum(self.n_neg)[:-1]))

    def _cdf(self, users, x_hat):
        q = np.clip(x_hat, -self.B, self.B) + 2.0 * self.B * users[:, None]
        count = np.searchsorted(self.flat_shifted, q.ravel(), side="right")
        count = count.reshape(x_hat.shape) - self.row_start[users][:, None]
        return count / self.n_neg[users][:, None]

    def _draw_negatives(self, users_full, shape):
        """Uniform draws from each row-user's I_u^- by rejection."""
        out = self.rng.integers(0, self.ds.num_items, size=shape)
        bad = self.mask[users_full, out]
        while bad.any():
            out[bad] = self.rng.integers(0, self.ds.num_items, size=int(bad.sum()))
            bad[bad] = self.mask[users_full[bad], out[bad]]
        return out

    def _draw_distinct_negatives(self, users, n_draws):
        """Per row: n_draws distinct items from I_u^-, with the exact pool
        (weighted accordingly) when it fits inside the budget.

        Returns (items (P, n), weights (P, n)); weights sum to 1 per row.
        """
        P = len(users)
        out = np.empty((P, n_draws), dtype=np.int64)
        w = np.full((P, n_draws), 1.0 / n_draws)
        big = self.n_neg[users] > n_draws
        big_users = users[big]
        if big_users.size:
            sub = np.empty((big_users.size, n_draws), dtype=np.int64)
            for j in range(n_draws):
                col = self.rng.integers(0, self.ds.num_items, size=big_users.size)
                bad = self.mask[big_users, col]
                for jj in range(j):
                    bad |= col == sub[:, jj]
                while bad.any():
                    col[bad] = self.rng.integers(0, self.ds.num_items,
                                                 size=int(bad.sum()))
                    redo = self.mask[big_users[bad], col[bad]]
                    for jj in range(j):
                        redo |= col[bad] == sub[bad, jj]
                    bad[bad] = redo
                sub[:, j] = col
            out[big] = sub
        for row in np.flatnonzero(~big):
            pool = self._small_pool[int(users[row])]
            k = pool.size
            out[row, :k] = pool
            out[row, k:] = pool[0]
            w[row] = 0.0
            w[row, :k] = 1.0 / k
        return out, w

    def sample(self, users, pos_items):
        cfg = self.cfg
        P, M, N = len(users), cfg.m_candidates, cfg.n_mc
        u_pm = np.broadcast_to(users[:, None], (P, M))
        cand = self._draw_negatives(u_pm, (P, M))
        uvec = self.U[users]  # (P, d)
        x_hat = np.einsum("pd,pmd->pm", uvec, self.V[cand])

        post = posterior_tn(self._cdf(users, x_hat), cfg.alpha, self.tau_item[cand])

        # one shared draw set per (user, positive) pair — every candidate of
        # the pair is scored against the same positives and negatives
        r = self.rng.random((P, N))
        idx = (r * self.n_pos[users][:, None]).astype(np.int64)
        pos_draw = self.pos_flat[self.pos_off[users][:, None] + idx]
        g_pos = np.einsum("pd,pnd->pn", uvec, self.V[pos_draw])
        d_plus = self.n_pos[users][:, None] * np.mean(
            1.0 - sigmoid(g_pos[:, None, :] - x_hat[:, :, None]), axis=-1
        )

        neg_draw, neg_w = self._draw_distinct_negatives(users, N)
        g_neg = np.einsum("pd,pnd->pn", uvec, self.V[neg_draw])
        info_n = 1.0 - sigmoid(x_hat[:, :, None] - g_neg[:, None, :])
        d_minus = cfg.gamma * self.n_neg[users][:, None] * np.einsum(
            "pmn,pn->pm", info_n, neg_w
        )

        objective = d_plus * post - d_minus * (1.0 - post)
        pick = np.argmax(objective, axis=1)  # first max wins ties
        return cand[np.arange(P), pick]
