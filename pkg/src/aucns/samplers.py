"""Negative samplers: uniform (rns), popularity (pns), dynamic (dns), aucns.

Each strategy exists in two shapes: a per-call functional op working on a
SamplerContext (the reference semantics, used by the oracle tests), and a
batch class with the trainer protocol

    begin_epoch(user_factors, item_factors)   # optional refresh hook
    sample(users, pos_items) -> negative items (len(users),)

make_batch_sampler() builds the right batch sampler from its registry name.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SamplerError
from .rule import SamplerConfig


@dataclass
class SamplerContext:
    """One sampling call: a user, the paired positive, and the user's pool.

    candidate_pool is I_u^- — every item the user has no *training*
    interaction with. Held-out test positives stay in the pool on purpose;
    how often they get drawn is exactly the sampled-false-negative telemetry.
    """

    user: int
    positive_item: int
    candidate_pool: np.ndarray
    rng: np.random.Generator


def rns_sample(ctx):
    """Uniform draw from the pool."""
    pool = np.asarray(ctx.candidate_pool)
    if pool.size == 0:
        raise SamplerError(f"rns_sample: empty candidate pool for user {ctx.user}")
    return int(pool[ctx.rng.integers(0, pool.size)])


def pns_sample(ctx, profile, exponent=0.75):
    """Draw proportional to pop^exponent over the pool.

    Zero-popularity items keep a tiny floor weight (1e-6) so they stay
    reachable.
    """
    pool = np.asarray(ctx.candidate_pool)
    if pool.size == 0:
        raise SamplerError(f"pns_sample: empty candidate pool for user {ctx.user}")
    w = profile.pop[pool].astype(np.float64) ** exponent
    w[profile.pop[pool] == 0] = 1e-6
    w /= w.sum()
    return int(ctx.rng.choice(pool, p=w))


def dns_sample(ctx, model, candidate_count=16, argmax=False):
    """Dynamic sampling: score `candidate_count` uniform candidates, then pick.

    Default picks with probability linear in score rank (weight c for the
    highest score down to 1 for the lowest, sums normalized); argmax=True is
    the hard variant. Ranking uses a stable sort, so equal scores keep draw
    order.
    """
    pool = np.asarray(ctx.candidate_pool)
    if pool.size == 0:
        raise SamplerError(f"dns_sample: empty candidate pool for user {ctx.user}")
    cand = pool[ctx.rng.integers(0, pool.size, size=candidate_count)]
    scores = model.item_factors[cand] @ model.user_factors[ctx.user]
    order = np.argsort(-scores, kind="stable")  # best first, ties by draw order
    if argmax:
        return int(cand[order[0]])
    weights = np.arange(candidate_count, 0, -1, dtype=np.float64)
    weights /= weights.sum()
    pick = order[ctx.rng.choice(candidate_count, p=weights)]
    return int(cand[pick])


# ---------------------------------------------------------------------------
# Batch samplers (vectorized over a whole training batch).
# ---------------------------------------------------------------------------

class _PoolDrawMixin:
    """Shared uniform-from-I_u^- rejection draw against the train mask."""

    def _draw_negatives(self, users_full, shape):
        out = self.rng.integers(0, self.num_items, size=shape)
        bad = self.mask[users_full, out]
        while bad.any():
            out[bad] = self.rng.integers(0, self.num_items, size=int(bad.sum()))
            bad[bad] = self.mask[users_full[bad], out[bad]]
        return out


class RnsBatch(_PoolDrawMixin):
    def __init__(self, dataset, rng):
        if any(len(a) == dataset.num_items for a in dataset.train_pos):
            raise SamplerError("a user has no un-interacted items to sample")
        self.num_items = dataset.num_items
        self.mask = dataset.train_mask
        self.rng = rng

    def begin_epoch(self, user_factors, item_factors):
        pass

    def sample(self, users, pos_items):
        return self._draw_negatives(users, users.shape)


class PnsBatch:
    """Popularity-weighted draws via global-weight rejection.

    Proposals come from the global pop^0.75 distribution; a proposal landing
    in the user's training set is rejected and redrawn, which leaves exactly
    the pool-restricted renormalized distribution.
    """

    def __init__(self, dataset, profile, rng, exponent=0.75):
        if any(len(a) == dataset.num_items for a in dataset.train_pos):
            raise SamplerError("a user has no un-interacted items to sample")
        self.num_items = dataset.num_items
        self.mask = dataset.train_mask
        self.rng = rng
        w = profile.pop.astype(np.float64) ** exponent
        w[profile.pop == 0] = 1e-6
        self.cum = np.cumsum(w)
        self.total = self.cum[-1]

    def begin_epoch(self, user_factors, item_factors):
        pass

    def _propose(self, n):
        return np.searchsorted(self.cum, self.rng.random(n) * self.total, side="right")

    def sample(self, users, pos_items):
        out = self._propose(users.size).reshape(users.shape)
        bad = self.mask[users, out]
        while bad.any():
            out[bad] = self._propose(int(bad.sum()))
            bad[bad] = self.mask[users[bad], out[bad]]
        return out


class DnsBatch(_PoolDrawMixin):
    def __init__(self, dataset, rng, candidate_count=16, argmax=False):
        if any(len(a) == dataset.num_items for a in dataset.train_pos):
            raise SamplerError("a user has no un-interacted items to sample")
        self.num_items = dataset.num_items
        self.mask = dataset.train_mask
        self.rng = rng
        self.c = candidate_count
        self.argmax = argmax
        w = np.arange(candidate_count, 0, -1, dtype=np.float64)
        self.cum_w = np.cumsum(w / w.sum())

    def begin_epoch(self, user_factors, item_factors):
        self.U = user_factors
        self.V = item_factors

    def sample(self, users, pos_items):
        P, c = len(users), self.c
        u_pc = np.broadcast_to(users[:, None], (P, c))
        cand = self._draw_negatives(u_pc, (P, c))
        scores = np.einsum("pd,pcd->pc", self.U[users], self.V[cand])
        order = np.argsort(-scores, axis=1, kind="stable")
        if self.argmax:
            pick = order[:, 0]
        else:
            ranks = np.searchsorted(self.cum_w, self.rng.random(P), side="right")
            pick = order[np.arange(P), ranks]
        return cand[np.arange(P), pick]


def make_batch_sampler(name, dataset, profile, sampler_config, rng):
    """Build a batch sampler by registry name: rns | pns | dns | aucns."""
    cfg = sampler_config if sampler_config is not None else SamplerConfig()
    if name == "rns":
        return RnsBatch(dataset, rng)
    if name == "pns":
        return PnsBatch(dataset, profile, rng)
    if name == "dns":
        return DnsBatch(dataset, rng, cfg.dns_candidate_count, cfg.dns_argmax)
    if name == "aucns":
        from .rule import AucnsBatchSampler

        return AucnsBatchSampler(dataset, profile, cfg, rng)
    raise SamplerError(
        f"unknown sampler {name!r}; expected one of rns, pns, dns, aucns"
    )
