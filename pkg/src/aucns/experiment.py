"""Config-driven end-to-end runs: load → split → train → evaluate → artifacts.

A run directory receives report.json (all metrics at every k, deterministic
bytes for a fixed config+seed), metrics_k{K}.csv (one flat row per cutoff),
training_log.csv (per-epoch loss and sampler telemetry), and manifest.json
(config hash, seed, content hash of the dataset file, package version).
"""

import hashlib
import json
import shutil
from dataclasses import dataclass, replace
from importlib import metadata
from pathlib import Path

from .data import (
    _FORMATS,
    load_ratings,
    popularity_profile,
    to_implicit_and_split,
)
from .errors import AucnsError, ConfigError, ExperimentError, reject_unknown_keys
from .metrics import evaluate
from .mf import TrainConfig, train

SWEEP_PARAMS = ("alpha", "beta", "gamma")


@dataclass
class ExperimentConfig:
    dataset_path: str
    dataset_format: str
    train: TrainConfig
    split_ratio: float = 0.8
    hot_quantile: float = 0.15
    seed: int = 0
    eval_k: tuple = (5, 10, 20)
    output_dir: str = "run"

    def validate(self):
        if self.dataset_format not in _FORMATS:
            raise ConfigError(
                f"dataset.format must be one of {', '.join(sorted(_FORMATS))}; "
                f"got {self.dataset_format!r}"
            )
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if not 0.0 < self.hot_quantile <= 1.0:
            raise ConfigError(
                f"hot_quantile must be in (0, 1], got {self.hot_quantile}"
            )
        if len(self.eval_k) == 0:
            raise ConfigError("eval_k must list at least one cutoff")
        if any(k < 1 for k in self.eval_k):
            raise ConfigError(f"eval_k entries must be >= 1, got {list(self.eval_k)}")
        if len(set(self.eval_k)) != len(self.eval_k):
            raise ConfigError(f"eval_k entries must be unique, got {list(self.eval_k)}")
        self.train.validate()
        return self

    @classmethod
    def from_dict(cls, d):
        """Parse the JSON config schema; unknown keys anywhere are rejected.

        The experiment seed is the single source of randomness, so a `seed`
        inside the train block is rejected; the sampler block lives at the
        top level as `sampler_config`.
        """
        allowed = ("dataset", "split_ratio", "hot_quantile", "seed", "eval_k",
                   "output_dir", "train", "sampler_config")
        reject_unknown_keys(d, allowed, "config")
        if "dataset" not in d:
            raise ConfigError("config.dataset is required (path + format)")
        reject_unknown_keys(d["dataset"], ("path", "format"), "config.dataset")
        if "path" not in d["dataset"] or "format" not in d["dataset"]:
            raise ConfigError("config.dataset needs both path and format")

        seed = int(d.get("seed", 0))
        train_dict = dict(d.get("train", {}))
        for banned, hint in (
            ("seed", "config.seed is the single randomness source"),
            ("sampler_config", "move it to the top level"),
        ):
            if banned in train_dict:
                raise ConfigError(f"config.train.{banned} is not allowed; {hint}")
        train_dict["seed"] = seed
        if "sampler_config" in d:
            train_dict["sampler_config"] = dict(d["sampler_config"])
        train_cfg = TrainConfig.from_dict(train_dict)

        return cls(
            dataset_path=str(d["dataset"]["path"]),
            dataset_format=str(d["dataset"]["format"]),
            train=train_cfg,
            split_ratio=float(d.get("split_ratio", 0.8)),
            hot_quantile=float(d.get("hot_quantile", 0.15)),
            seed=seed,
            eval_k=tuple(int(k) for k in d.get("eval_k", (5, 10, 20))),
            output_dir=str(d.get("output_dir", "run")),
        ).validate()

    def to_canonical_dict(self):
        """Everything that defines the run's outcome (output_dir excluded)."""
        sc = self.train.sampler_config
        return {
            "dataset": {"path": self.dataset_path, "format": self.dataset_format},
            "split_ratio": self.split_ratio,
            "hot_quantile": self.hot_quantile,
            "seed": self.seed,
            "eval_k": list(self.eval_k),
            "train": {
                "dim": self.train.dim,
                "learning_rate": self.train.learning_rate,
                "l2_reg": self.train.l2_reg,
                "batch_size": self.train.batch_size,
                "epochs": self.train.epochs,
                "sampler": self.train.sampler,
                "lr_decay": {
                    "factor": self.train.lr_decay.factor,
                    "epochs": list(self.train.lr_decay.epochs),
                },
            },
            "sampler_config": {
                "alpha": sc.alpha,
                "beta": sc.beta,
                "gamma": sc.gamma,
                "n_mc": sc.n_mc,
                "m_candidates": sc.m_candidates,
                "epsilon_prior": sc.epsilon_prior,
                "dns_candidate_count": sc.dns_candidate_count,
                "dns_argmax": sc.dns_argmax,
            },
        }


def config_hash(config):
    payload = json.dumps(config.to_canonical_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def git_blob_sha1(path):
    """sha1 of b'blob <len>\\0' + contents — matches `git hash-object`."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(b"blob %d\x00" % len(data))
    h.update(data)
    return h.hexdigest()


def _package_version():
    try:
        return metadata.version("aucns")
    except metadata.PackageNotFoundError:
        return "0.1.0"


@dataclass
class RunResult:
    config_hash: str
    reports: dict  # k -> EvalReport
    train_result: object
    output_dir: Path


def run_experiment(config):
    """One deterministic end-to-end run; returns a RunResult.

    Any package error is re-raised as ExperimentError carrying the stage name
    (load / split / popularity / train / evaluate / write); files written so
    far are removed first so a failed run leaves no partial artifacts.
    """
    config.validate()
    stage = "load"
    written = []
    out_dir = Path(config.output_dir)
    try:
        ratings = load_ratings(config.dataset_path, config.dataset_format)
        stage = "split"
        dataset = to_implicit_and_split(ratings.records, config.split_ratio,
                                        config.seed)
        stage = "popularity"
        profile = popularity_profile(dataset, config.hot_quantile)
        stage = "train"
        result = train(dataset, profile, config.train)
        stage = "evaluate"
        gamma = config.train.sampler_config.gamma
        reports = {
            k: evaluate(result.model, dataset, profile, k, gamma, config.seed)
            for k in config.eval_k
        }
        stage = "write"
        out_dir.mkdir(parents=True, exist_ok=True)
        chash = config_hash(config)

        report_doc = {
            "schema_version": 1,
            "config": config.to_canonical_dict(),
            "config_hash": chash,
            "dataset": {
                "num_users": dataset.num_users,
                "num_items": dataset.num_items,
                "train_interactions": dataset.n_train_total,
                "test_interactions": dataset.n_test_total,
                "dropped_unseen_test": dataset.dropped_unseen_test,
            },
            "telemetry": {
                "sampled_popular_item_rate": result.sampled_popular_item_rate,
                "sampled_false_negative_rate": result.sampled_false_negative_rate,
            },
            "final_mean_loss": result.epoch_logs[-1].mean_loss,
            "reports": {str(k): reports[k].to_dict() for k in config.eval_k},
        }
        report_path = out_dir / "report.json"
        report_path.write_text(json.dumps(report_doc, sort_keys=True, indent=2))
        written.append(report_path)

        for k in config.eval_k:
            p = out_dir / f"metrics_k{k}.csv"
            reports[k].write_csv(p)
            written.append(p)

        log_path = out_dir / "training_log.csv"
        with open(log_path, "w") as fh:
            fh.write("epoch,mean_loss,learning_rate,"
                     "sampled_popular_item_rate,sampled_false_negative_rate\n")
            for row in result.epoch_logs:
                fh.write(f"{row.epoch},{row.mean_loss!r},{row.learning_rate!r},"
                         f"{row.sampled_popular_item_rate!r},"
                         f"{row.sampled_false_negative_rate!r}\n")
        written.append(log_path)

        manifest_path = out_dir / "manifest.json"
        manifest_path.write_text(json.dumps({
            "config_hash": chash,
            "seed": config.seed,
            "dataset_sha1": git_blob_sha1(config.dataset_path),
            "package_version": _package_version(),
        }, sort_keys=True, indent=2))
        written.append(manifest_path)

        return RunResult(config_hash=chash, reports=reports,
                         train_result=result, output_dir=out_dir)
    except AucnsError as err:
        for p in written:
            p.unlink(missing_ok=True)
        if isinstance(err, ExperimentError):
            raise
        raise ExperimentError(stage, str(err)) from err


def sweep(config, param, values):
    """One run per value with a shared seed; writes sweep_{param}.csv.

    Each point runs in its own subdirectory of config.output_dir. The sweep
    table mirrors the per-point report at k=5 (the cutoff is added to eval_k
    when missing) plus the run-level sampler telemetry.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(
            f"sweep parameter must be one of {', '.join(SWEEP_PARAMS)}, got {param!r}"
        )
    if len(values) == 0:
        raise ConfigError("sweep needs at least one value")
    base = Path(config.output_dir)
    rows = []
    for v in values:
        sc = replace(config.train.sampler_config, **{param: float(v)}).validate()
        point = ExperimentConfig(
            dataset_path=config.dataset_path,
            dataset_format=config.dataset_format,
            train=replace(config.train, sampler_config=sc),
            split_ratio=config.split_ratio,
            hot_quantile=config.hot_quantile,
            seed=config.seed,
            eval_k=config.eval_k if 5 in config.eval_k else (5,) + tuple(config.eval_k),
            output_dir=str(base / f"{param}_{v:g}"),
        )
        rows.append((float(v), run_experiment(point)))

    base.mkdir(parents=True, exist_ok=True)
    table = base / f"sweep_{param}.csv"
    with open(table, "w") as fh:
        fh.write("value,precision_at_5,ohr,"
                 "sampled_popular_item_rate,sampled_false_negative_rate\n")
        for v, rr in rows:
            rep = rr.reports[5]
            tr = rr.train_result
            fh.write(f"{v:g},{rep.precision!r},{rep.ohr!r},"
                     f"{tr.sampled_popular_item_rate!r},"
                     f"{tr.sampled_false_negative_rate!r}\n")
    return rows


def remove_run_dir(path):
    """Utility for callers that want a clean slate before re-running."""
    shutil.rmtree(path, ignore_errors=True)
