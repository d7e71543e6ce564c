"""Ranking quality, popularity-bias rates, pooled FPR/FNR, MSE, partial AUC.

Users with an empty test set are not evaluable and are excluded everywhere.
Ranking metrics are averaged per evaluable user; the bias rates and FPR/FNR
are pooled globally over (user, item) pairs, which is what makes identities
like "OHR numerator + OCR numerator = FPR numerator" hold exactly.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UndefinedMetricError
from .mathutil import sigmoid
from .rng import substream
from .rule import top_gamma_scores

SCHEMA_VERSION = 1

REPORT_FIELDS = (
    "k", "precision", "recall", "f1", "ndcg",
    "ohr", "ocr", "uhr", "ucr", "uhr_alt", "ucr_alt",
    "fpr", "fnr", "mse", "pauc",
)


@dataclass(frozen=True)
class RecommendationList:
    """Top-k items of one user, descending score, training positives excluded."""

    user: int
    items: np.ndarray


def topk(model, dataset, user, k):
    """k highest-scored items from I_u^-; ties broken by ascending item index."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    scores = model.score_all(user)
    pool = dataset.neg_items(user)
    order = np.argsort(-scores[pool], kind="stable")  # pool is ascending → stable ties
    return RecommendationList(user=user, items=pool[order[: min(k, pool.size)]])


def topk_all(model, dataset, k, users=None):
    """topk for many users at once (one matrix product + one masked argsort)."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if users is None:
        users = np.arange(dataset.num_users)
    scores = model.user_factors[users] @ model.item_factors.T
    sub = dataset.train_mask[users]
    scores[sub] = -np.inf
    order = np.argsort(-scores, axis=1, kind="stable")
    out = []
    for row, u in enumerate(users):
        n = min(k, dataset.num_items - int(sub[row].sum()))
        out.append(RecommendationList(user=int(u), items=order[row, :n].copy()))
    return out


@dataclass(frozen=True)
class RankingMetrics:
    precision: float
    recall: float
    f1: float
    ndcg: float
    evaluable_users: int


def _dcg_weights(n):
    # positions are 1-indexed: weight of position p is 1/log2(p+1)
    return 1.0 / np.log2(np.arange(2, n + 2))


def ranking_metrics(rec_lists, test_sets, k):
    """Mean precision/recall/F1/NDCG@k over users with non-empty test sets.

    rec_lists and test_sets are parallel sequences; per user, precision uses
    the fixed denominator k, f1 is computed from that user's own P and R
    before averaging, and NDCG uses binary gains with IDCG over
    min(k, |test_u|) ideal hits.
    """
    p_sum = r_sum = f_sum = n_sum = 0.0
    evaluable = 0
    for rec, test in zip(rec_lists, test_sets):
        test = np.asarray(test)
        if test.size == 0:
            continue
        evaluable += 1
        hit_at = np.isin(rec.items, test)
        hits = int(hit_at.sum())
        p = hits / k
        r = hits / test.size
        p_sum += p
        r_sum += r
        if p + r > 0:
            f_sum += 2.0 * p * r / (p + r)
        w = _dcg_weights(len(rec.items))
        dcg = float(w[hit_at].sum())
        idcg = float(_dcg_weights(min(k, test.size)).sum())
        n_sum += dcg / idcg
    if evaluable == 0:
        raise UndefinedMetricError("no users have test interactions")
    return RankingMetrics(
        precision=p_sum / evaluable,
        recall=r_sum / evaluable,
        f1=f_sum / evaluable,
        ndcg=n_sum / evaluable,
        evaluable_users=evaluable,
    )


@dataclass(frozen=True)
class BiasMetrics:
    """Pooled over-/under-recommendation rates split by item popularity.

    ohr/ocr/uhr/ucr use the recommended-set denominators (|S_Rec ∩ X_Hot|,
    |S_Rec ∩ X_Cold|) throughout; with that reading UHR/UCR are ratios of an
    under-set to the recommendation pool and may exceed 1 when the test set
    is much larger than the hot slice of the recommendations. uhr_alt/ucr_alt
    use |S_Test ∩ X_Hot| / |S_Test ∩ X_Cold| denominators instead and are
    proper rates in [0, 1].
    """

    ohr: float
    ocr: float
    uhr: float
    ucr: float
    uhr_alt: float
    ucr_alt: float
    zero_denominator_flags: tuple = ()


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def bias_metrics(rec_lists, test_sets, hot_set):
    """Global set-expression rates over pooled (user, item) pairs.

    OHR = |{S_Rec−S_Test} ∩ Hot| / |S_Rec ∩ Hot|, OCR the cold analog;
    UHR = |{S_Test−S_Rec} ∩ Hot| / |S_Rec ∩ Hot|, UCR the cold analog.
    A zero denominator yields 0 and records a flag naming the rate.
    """
    hot = np.fromiter(hot_set, dtype=np.int64) if len(hot_set) else np.empty(0, np.int64)
    rec_hot = rec_cold = 0
    over_hot = over_cold = 0
    under_hot = under_cold = 0
    test_hot = test_cold = 0
    for rec, test in zip(rec_lists, test_sets):
        test = np.asarray(test)
        rec_is_hot = np.isin(rec.items, hot)
        rec_in_test = np.isin(rec.items, test)
        test_is_hot = np.isin(test, hot)
        test_in_rec = np.isin(test, rec.items)
        rec_hot += int(rec_is_hot.sum())
        rec_cold += int((~rec_is_hot).sum())
        over_hot += int((~rec_in_test & rec_is_hot).sum())
        over_cold += int((~rec_in_test & ~rec_is_hot).sum())
        under_hot += int((~test_in_rec & test_is_hot).sum())
        under_cold += int((~test_in_rec & ~test_is_hot).sum())
        test_hot += int(test_is_hot.sum())
        test_cold += int((~test_is_hot).sum())
    flags = []
    return BiasMetrics(
        ohr=_ratio(over_hot, rec_hot, "ohr", flags),
        ocr=_ratio(over_cold, rec_cold, "ocr", flags),
        uhr=_ratio(under_hot, rec_hot, "uhr", flags),
        ucr=_ratio(under_cold, rec_cold, "ucr", flags),
        uhr_alt=_ratio(under_hot, test_hot, "uhr_alt", flags),
        ucr_alt=_ratio(under_cold, test_cold, "ucr_alt", flags),
        zero_denominator_flags=tuple(flags),
    )


def fpr_fnr(rec_lists, test_sets):
    """Pooled FPR = |S_Rec−S_Test|/|S_Rec| and FNR = |S_Test−S_Rec|/|S_Test|."""
    n_rec = n_test = fp = fn = 0
    for rec, test in zip(rec_lists, test_sets):
        test = np.asarray(test)
        n_rec += len(rec.items)
        n_test += test.size
        fp += int((~np.isin(rec.items, test)).sum())
        fn += int((~np.isin(test, rec.items)).sum())
    if n_test == 0:
        raise UndefinedMetricError("FNR undefined: pooled test set is empty")
    if n_rec == 0:
        raise UndefinedMetricError("FPR undefined: no recommendations pooled")
    return fp / n_rec, fn / n_test


def mse_metric(model, dataset, rng):
    """Pooled squared error of sigmoid(z-scored scores) against 0/1 labels.

    Per evaluable user, scores over I_u^- are z-normalized and squashed;
    label-1 points are the test positives, label-0 points are an equal-size
    uniform sample (without replacement) from I_u^- minus the test set.
    Users whose pool scores have zero variance are skipped and counted.

    Returns (mse, skipped_users).
    """
    total = 0.0
    n_points = 0
    skipped = 0
    for user in range(dataset.num_users):
        test = dataset.test_pos[user]
        if test.size == 0:
            continue
        pool = dataset.neg_items(user)
        scores = model.score_all(user)[pool]
        sd = float(scores.std())
        if sd <= 1e-12:
            skipped += 1
            continue
        p = sigmoid((scores - float(scores.mean())) / sd)
        in_test = np.isin(pool, test)
        p_pos = p[in_test]
        negatives = np.flatnonzero(~in_test)
        take = min(test.size, negatives.size)
        p_neg = p[rng.choice(negatives, size=take, replace=False)]
        total += float(np.sum((p_pos - 1.0) ** 2)) + float(np.sum(p_neg**2))
        n_points += p_pos.size + p_neg.size
    if n_points == 0:
        raise UndefinedMetricError("MSE undefined: no evaluation points")
    return total / n_points, skipped


def partial_auc(pos_scores, neg_scores, gamma):
    """pAUC over the top-⌊γ·|neg|⌋ negatives (minimum 1); ties count 0.5.

    At gamma = 1 this is exactly the rank-sum (Mann–Whitney) AUC.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    if pos.size == 0 or np.asarray(neg_scores).size == 0:
        raise UndefinedMetricError("partial_auc needs non-empty score sets")
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must be in (0, 1], got {gamma}")
    top = top_gamma_scores(neg_scores, gamma)
    gt = pos[:, None] > top[None, :]
    eq = pos[:, None] == top[None, :]
    return float((gt.sum() + 0.5 * eq.sum()) / (pos.size * top.size))


@dataclass(frozen=True)
class EvalReport:
    """One evaluation: ranking quality @k plus the bias/error metric suite."""

    k: int
    precision: float
    recall: float
    f1: float
    ndcg: float
    ohr: float
    ocr: float
    uhr: float
    ucr: float
    uhr_alt: float
    ucr_alt: float
    fpr: float
    fnr: float
    mse: float
    pauc: float
    evaluable_users: int = 0
    mse_skipped_users: int = 0
    zero_denominator_flags: tuple = ()

    def to_dict(self):
        d = {"schema_version": SCHEMA_VERSION}
        for name in REPORT_FIELDS:
            d[name] = getattr(self, name)
        d["evaluable_users"] = self.evaluable_users
        d["mse_skipped_users"] = self.mse_skipped_users
        d["zero_denominator_flags"] = list(self.zero_denominator_flags)
        return d

    def write_csv(self, path):
        """Flat one-row CSV with a schema_version column."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("schema_version",) + REPORT_FIELDS)
            writer.writerow([SCHEMA_VERSION] + [getattr(self, n) for n in REPORT_FIELDS])


def evaluate(model, dataset, profile, k, gamma, seed):
    """Full metric suite over all evaluable users at one cutoff k."""
    users = [u for u in range(dataset.num_users) if dataset.test_pos[u].size > 0]
    if not users:
        raise UndefinedMetricError("no users have test interactions")
    rec_lists = topk_all(model, dataset, k, users=np.asarray(users))
    test_sets = [dataset.test_pos[u] for u in users]

    ranking = ranking_metrics(rec_lists, test_sets, k)
    bias = bias_metrics(rec_lists, test_sets, profile.hot_set)
    fpr, fnr = fpr_fnr(rec_lists, test_sets)
    mse, skipped = mse_metric(model, dataset, substream(seed, "eval"))

    pauc_sum = 0.0
    pauc_users = 0
    for u in users:
        test = dataset.test_pos[u]
        pool = dataset.neg_items(u)
        rest = np.setdiff1d(pool, test, assume_unique=True)
        if rest.size == 0:
            continue
        scores = model.score_all(u)
        pauc_sum += partial_auc(scores[test], scores[rest], gamma)
        pauc_users += 1
    if pauc_users == 0:
        raise UndefinedMetricError("pAUC undefined: no user has held-out negatives")

    return EvalReport(
        k=k,
        precision=ranking.precision,
        recall=ranking.recall,
        f1=ranking.f1,
        ndcg=ranking.ndcg,
        ohr=bias.ohr,
        ocr=bias.ocr,
        uhr=bias.uhr,
        ucr=bias.ucr,
        uhr_alt=bias.uhr_alt,
        ucr_alt=bias.ucr_alt,
        fpr=fpr,
        fnr=fnr,
        mse=mse,
        pauc=pauc_sum / pauc_users,
        evaluable_users=ranking.evaluable_users,
        mse_skipped_users=skipped,
        zero_denominator_flags=bias.zero_denominator_flags,
    )
