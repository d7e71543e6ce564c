"""Shared fixtures: synthetic interaction worlds and the bundled ratings file."""

from pathlib import Path

import numpy as np
import pytest

from aucns.data import (
    RatingRecord,
    popularity_profile,
    to_implicit_and_split,
)
from aucns.mf import init_model

REPO_ROOT = Path(__file__).resolve().parent.parent
ML100K_PATH = REPO_ROOT / "data" / "ml-100k" / "u.data"


def toy_records(num_users=25, num_items=18, seed=0):
    """Synthetic implicit interactions with a skewed item popularity curve.

    Every user gets at least 5 items so the 0.8 split leaves a test positive.
    """
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, num_items + 1, dtype=np.float64)
    item_p = (1.0 / ranks) / np.sum(1.0 / ranks)
    records = []
    for u in range(num_users):
        n = int(rng.integers(5, max(6, num_items - 2)))
        items = rng.choice(num_items, size=min(n, num_items), replace=False, p=item_p)
        for i in sorted(int(x) for x in items):
            records.append(RatingRecord(u, i, float(rng.integers(1, 6)), None))
    return records


@pytest.fixture(scope="session")
def toy_dataset():
    return to_implicit_and_split(toy_records(), split_ratio=0.8, seed=0)


@pytest.fixture(scope="session")
def toy_profile(toy_dataset):
    return popularity_profile(toy_dataset, hot_quantile=0.25)


@pytest.fixture()
def toy_model(toy_dataset):
    return init_model(toy_dataset.num_users, toy_dataset.num_items, dim=6, seed=3)


@pytest.fixture(scope="session")
def ml100k_path():
    if not ML100K_PATH.exists():
        pytest.skip(f"bundled ratings file missing: {ML100K_PATH}")
    return ML100K_PATH


def write_ratings_file(path, rows, sep="\t", with_ts=True):
    """Serialize (user, item, rating[, ts]) rows in a loader format."""
    lines = []
    for r in rows:
        parts = [str(r[0]), str(r[1]), str(r[2])]
        if with_ts:
            parts.append(str(r[3] if len(r) > 3 else 0))
        lines.append(sep.join(parts))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


@pytest.fixture(scope="session")
def real_run(ml100k_path, tmp_path_factory):
    """Memoized full-length training runs on the bundled ratings file.

    Returns a callable ``get(sampler, seed, alpha=.., beta=..)`` yielding a
    ``(RunResult, elapsed_seconds)`` pair.  Runs are cached for the whole
    session so every test that needs the same configuration shares one
    training run.
    """
    import time

    from aucns.experiment import ExperimentConfig, run_experiment
    from aucns.mf import TrainConfig
    from aucns.rule import SamplerConfig

    root = tmp_path_factory.mktemp("real-runs")
    cache = {}

    def build_config(sampler, seed, alpha, beta, out):
        return ExperimentConfig(
            dataset_path=str(ml100k_path),
            dataset_format="ml100k",
            train=TrainConfig(
                dim=10,
                learning_rate=0.1,
                l2_reg=1e-4,
                batch_size=128,
                epochs=100,
                seed=seed,
                sampler=sampler,
                sampler_config=SamplerConfig(alpha=alpha, beta=beta),
            ),
            split_ratio=0.8,
            hot_quantile=0.15,
            seed=seed,
            eval_k=(5,),
            output_dir=str(out),
        )

    def fresh(sampler, seed, alpha=0.75, beta=0.01, tag="fresh"):
        """Force a brand-new run of the same configuration (no cache)."""
        out = root / f"{sampler}_s{seed}_a{alpha:g}_b{beta:g}_{tag}"
        config = build_config(sampler, seed, alpha, beta, out)
        start = time.perf_counter()
        result = run_experiment(config)
        return result, time.perf_counter() - start

    def get(sampler, seed, alpha=0.75, beta=0.01):
        key = (sampler, seed, alpha, beta)
        if key not in cache:
            out = root / f"{sampler}_s{seed}_a{alpha:g}_b{beta:g}"
            config = build_config(sampler, seed, alpha, beta, out)
            start = time.perf_counter()
            result = run_experiment(config)
            cache[key] = (result, time.perf_counter() - start)
        return cache[key]

    get.fresh = fresh
    return get
