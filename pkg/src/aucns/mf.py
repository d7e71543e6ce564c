"""Matrix-factorization recommender trained on sampled pairwise ranking loss.

The model scores g(u, i) = p_u . q_i. Each training pair (u, i+, i-) incurs

    L = -ln sigma(g(u,i+) - g(u,i-)) + l2 * (|p_u|^2 + |q_i+|^2 + |q_i-|^2)

optimized by plain SGD; a batch is `batch_size` pairs whose gradients are
summed into one parameter step. The negative i- comes from the configured
sampler, redrawn fresh every epoch.
"""

import json
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, TrainingError, reject_unknown_keys
from .mathutil import sigmoid, softplus
from .rng import substream
from .rule import SamplerConfig
from .samplers import make_batch_sampler


@dataclass
class FactorModel:
    user_factors: np.ndarray
    item_factors: np.ndarray

    @property
    def num_users(self):
        return self.user_factors.shape[0]

    @property
    def num_items(self):
        return self.item_factors.shape[0]

    @property
    def dim(self):
        return self.user_factors.shape[1]

    def score(self, user, item):
        if not 0 <= user < self.num_users:
            raise IndexError(f"user {user} out of range [0, {self.num_users})")
        if not 0 <= item < self.num_items:
            raise IndexError(f"item {item} out of range [0, {self.num_items})")
        return float(self.user_factors[user] @ self.item_factors[item])

    def score_all(self, user):
        """Scores of every item for one user, shape (num_items,)."""
        return self.item_factors @ self.user_factors[user]


@dataclass(frozen=True)
class LrDecay:
    factor: float = 0.1
    epochs: tuple = (20, 60, 80)


@dataclass
class TrainConfig:
    dim: int = 10
    learning_rate: float = 0.1
    l2_reg: float = 1e-4
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    sampler: str = "aucns"
    sampler_config: SamplerConfig = field(default_factory=SamplerConfig)
    lr_decay: LrDecay = field(default_factory=LrDecay)

    def validate(self):
        if self.dim < 1:
            raise ConfigError(f"train.dim must be >= 1, got {self.dim}")
        if self.learning_rate <= 0:
            raise ConfigError(
                f"train.learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.l2_reg < 0:
            raise ConfigError(f"train.l2_reg must be >= 0, got {self.l2_reg}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")
        if self.sampler not in ("rns", "pns", "dns", "aucns"):
            raise ConfigError(
                f"train.sampler must be one of rns, pns, dns, aucns; "
                f"got {self.sampler!r}"
            )
        if not 0.0 < self.lr_decay.factor <= 1.0:
            raise ConfigError(
                f"train.lr_decay.factor must be in (0, 1], got {self.lr_decay.factor}"
            )
        return self

    @classmethod
    def from_dict(cls, d):
        allowed = [f.name for f in fields(cls)]
        reject_unknown_keys(d, allowed, "train_config")
        d = dict(d)
        if "sampler_config" in d and isinstance(d["sampler_config"], dict):
            d["sampler_config"] = SamplerConfig.from_dict(d["sampler_config"])
        if "lr_decay" in d and isinstance(d["lr_decay"], dict):
            reject_unknown_keys(d["lr_decay"], ("factor", "epochs"), "train.lr_decay")
            d["lr_decay"] = LrDecay(
                factor=d["lr_decay"].get("factor", 0.1),
                epochs=tuple(d["lr_decay"].get("epochs", (20, 60, 80))),
            )
        return cls(**d).validate()


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    mean_loss: float
    learning_rate: float
    sampled_popular_item_rate: float
    sampled_false_negative_rate: float


@dataclass
class TrainResult:
    model: FactorModel
    epoch_logs: list
    sampled_popular_item_rate: float  # aggregate over all epochs
    sampled_false_negative_rate: float


def init_model(num_users, num_items, dim, seed):
    """Factors ~ i.i.d. Normal(0, (0.1/sqrt(dim))^2)."""
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    rng = substream(seed, "init")
    scale = 0.1 / np.sqrt(dim)
    return FactorModel(
        user_factors=rng.normal(0.0, scale, size=(num_users, dim)),
        item_factors=rng.normal(0.0, scale, size=(num_items, dim)),
    )


def bpr_step(model, user, pos_item, neg_item, learning_rate, l2_reg):
    """One SGD step on a single (u, i+, i-) pair. Returns the pre-step loss."""
    p = model.user_factors[user]
    qp = model.item_factors[pos_item]
    qn = model.item_factors[neg_item]
    margin = float(p @ (qp - qn))
    loss = float(softplus(-margin)) + l2_reg * float(p @ p + qp @ qp + qn @ qn)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss on pair ({user}, {pos_item}, {neg_item})")
    coef = 1.0 - sigmoid(margin)
    g_p = -coef * (qp - qn) + 2.0 * l2_reg * p
    g_qp = -coef * p + 2.0 * l2_reg * qp
    g_qn = coef * p + 2.0 * l2_reg * qn
    model.user_factors[user] -= learning_rate * g_p
    model.item_factors[pos_item] -= learning_rate * g_qp
    model.item_factors[neg_item] -= learning_rate * g_qn
    return loss


def _bpr_batch(model, users, pos_items, neg_items, learning_rate, l2_reg):
    """Summed-gradient step over a batch of pairs. Returns summed pre-step loss."""
    U, V = model.user_factors, model.item_factors
    p = U[users]
    qp = V[pos_items]
    qn = V[neg_items]
    margin = np.einsum("bd,bd->b", p, qp - qn)
    loss = float(
        np.sum(softplus(-margin))
        + l2_reg * np.sum(p * p + qp * qp + qn * qn)
    )
    if not np.isfinite(loss):
        raise TrainingError("non-finite batch loss; try a smaller learning rate")
    coef = (1.0 - sigmoid(margin))[:, None]
    g_p = -coef * (qp - qn) + 2.0 * l2_reg * p
    g_qp = -coef * p + 2.0 * l2_reg * qp
    g_qn = coef * p + 2.0 * l2_reg * qn
    np.add.at(U, users, -learning_rate * g_p)
    np.add.at(V, pos_items, -learning_rate * g_qp)
    np.add.at(V, neg_items, -learning_rate * g_qn)
    return loss


def train(dataset, profile, config):
    """Full training run; returns the final-epoch model plus per-epoch logs."""
    config.validate()
    model = init_model(dataset.num_users, dataset.num_items, config.dim, config.seed)
    shuffle_rng = substream(config.seed, "shuffle")
    sampler = make_batch_sampler(
        config.sampler, dataset, profile, config.sampler_config,
        substream(config.seed, "sampler"),
    )
    all_users, all_pos = dataset.train_pairs
    n_pairs = all_users.size
    hot_mask = profile.hot_mask
    test_mask = dataset.test_mask

    lr = config.learning_rate
    logs = []
    total_hot = total_fn = 0
    for epoch in range(1, config.epochs + 1):
        if epoch in config.lr_decay.epochs:
            lr *= config.lr_decay.factor
        sampler.begin_epoch(model.user_factors, model.item_factors)
        order = shuffle_rng.permutation(n_pairs)
        loss_sum = 0.0
        hot = fn = 0
        for start in range(0, n_pairs, config.batch_size):
            sel = order[start : start + config.batch_size]
            users, pos = all_users[sel], all_pos[sel]
            neg = sampler.sample(users, pos)
            hot += int(hot_mask[neg].sum())
            fn += int(test_mask[users, neg].sum())
            loss_sum += _bpr_batch(model, users, pos, neg, lr, config.l2_reg)
        if not (np.all(np.isfinite(model.user_factors))
                and np.all(np.isfinite(model.item_factors))):
            raise TrainingError(f"non-finite factors after epoch {epoch}")
        logs.append(EpochLog(
            epoch=epoch,
            mean_loss=loss_sum / n_pairs,
            learning_rate=lr,
            sampled_popular_item_rate=hot / n_pairs,
            sampled_false_negative_rate=fn / n_pairs,
        ))
        total_hot += hot
        total_fn += fn
    total = n_pairs * config.epochs
    return TrainResult(
        model=model,
        epoch_logs=logs,
        sampled_popular_item_rate=total_hot / total,
        sampled_false_negative_rate=total_fn / total,
    )


def save_checkpoint(path, model, seed, config_hash):
    """npz holding both factor matrices plus a JSON metadata header."""
    header = json.dumps({
        "num_users": model.num_users,
        "num_items": model.num_items,
        "dim": model.dim,
        "seed": int(seed),
        "config_hash": config_hash,
    }, sort_keys=True)
    np.savez(
        path,
        user_factors=model.user_factors,
        item_factors=model.item_factors,
        header=np.array(header),
    )


def load_checkpoint(path):
    """Returns (FactorModel, header dict). Shape/header mismatches raise."""
    with np.load(path, allow_pickle=False) as z:
        model = FactorModel(
            user_factors=np.array(z["user_factors"], dtype=np.float64),
            item_factors=np.array(z["item_factors"], dtype=np.float64),
        )
        header = json.loads(str(z["header"]))
    if header["num_users"] != model.num_users or header["num_items"] != model.num_items:
        raise TrainingError(
            f"checkpoint header disagrees with factor shapes in {path}"
        )
    if header["dim"] != model.dim:
        raise TrainingError(f"checkpoint header dim mismatch in {path}")
    return model, header
