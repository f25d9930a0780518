"""Seeded random hyperparameter search and configuration transfer.

The search draws ``budget`` configurations from the declared space,
scores each with a caller-supplied objective (train, then dev accuracy),
and keeps the full trial log. Ties on dev accuracy go to the earlier
trial. A failing objective marks its trial and the search continues.

The sampler is deliberately a plain seeded random search so the whole
log is reproducible from (space, budget, seed); anything smarter can be
swapped in behind run_search's signature.

transfer_and_train reuses a configuration chosen on one stream to train
the final probes on another, clamping the PCA dimension when the target
stream is narrower.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .probes import TrainConfig, train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchSpace:
    delta_max: float = 5.0
    delta_zero_prob: float = 0.25  # atom at exactly 0 keeps the plain average reachable
    delta_log_floor: float = 1e-2
    d_pca_range: tuple[int, int] = (2, 512)
    batch_range: tuple[int, int] = (8, 256)
    lr_range: tuple[float, float] = (1e-4, 1e-1)
    epochs_range: tuple[int, int] = (10, 300)
    d_hidden_range: tuple[int, int] = (8, 256)

    def __post_init__(self):
        for name in ("d_pca_range", "batch_range", "epochs_range", "d_hidden_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be an ordered positive range, got {lo}..{hi}")
        if not 0 < self.lr_range[0] <= self.lr_range[1]:
            raise ValueError(f"lr_range must be ordered and positive, got {self.lr_range}")

    def _sample_delta(self, rng: np.random.Generator) -> float:
        if rng.random() < self.delta_zero_prob:
            return 0.0
        lo, hi = math.log(self.delta_log_floor), math.log(self.delta_max)
        return float(math.exp(rng.uniform(lo, hi)))

    def sample(self, rng: np.random.Generator, kind: str) -> dict:
        params = {
            "delta_f": self._sample_delta(rng),
            "delta_b": self._sample_delta(rng),
            "d_pca": int(rng.integers(self.d_pca_range[0], self.d_pca_range[1] + 1)),
            "batch_size": int(
                round(
                    math.exp(
                        rng.uniform(
                            math.log(self.batch_range[0]), math.log(self.batch_range[1])
                        )
                    )
                )
            ),
            "learning_rate": float(
                math.exp(
                    rng.uniform(math.log(self.lr_range[0]), math.log(self.lr_range[1]))
                )
            ),
            "epochs": int(rng.integers(self.epochs_range[0], self.epochs_range[1] + 1)),
        }
        if kind == "nonlinear":
            params["d_hidden"] = int(
                rng.integers(self.d_hidden_range[0], self.d_hidden_range[1] + 1)
            )
        return params

    def contains(self, params: dict) -> bool:
        def delta_ok(v):
            return v == 0.0 or self.delta_log_floor * 0.999 <= v <= self.delta_max

        checks = [
            delta_ok(params["delta_f"]),
            delta_ok(params["delta_b"]),
            self.d_pca_range[0] <= params["d_pca"] <= self.d_pca_range[1],
            self.batch_range[0] <= params["batch_size"] <= self.batch_range[1],
            self.lr_range[0] <= params["learning_rate"] <= self.lr_range[1],
            self.epochs_range[0] <= params["epochs"] <= self.epochs_range[1],
        ]
        if "d_hidden" in params:
            checks.append(
                self.d_hidden_range[0] <= params["d_hidden"] <= self.d_hidden_range[1]
            )
        return all(checks)


@dataclass
class TrialRecord:
    trial_id: int
    params: dict
    dev_accuracy: float | None
    train_loss: float | None
    seed: int
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "params": self.params,
            "dev_accuracy": self.dev_accuracy,
            "train_loss": self.train_loss,
            "seed": self.seed,
            "error": self.error,
        }


def run_search(
    space: SearchSpace,
    budget: int,
    objective,
    seed: int = 0,
    kind: str = "linear",
) -> tuple[TrialRecord, list[TrialRecord]]:
    """Evaluate ``budget`` sampled configurations and return (best, log).

    ``objective(params, trial_seed)`` returns (dev_accuracy, train_loss).
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    log: list[TrialRecord] = []
    best: TrialRecord | None = None
    for trial_id in range(budget):
        params = space.sample(rng, kind)
        record = TrialRecord(
            trial_id=trial_id, params=params, dev_accuracy=None,
            train_loss=None, seed=seed,
        )
        try:
            dev_acc, train_loss = objective(params, seed)
            if not 0.0 <= dev_acc <= 1.0:
                raise ValueError(f"objective returned accuracy {dev_acc}")
            record.dev_accuracy = float(dev_acc)
            record.train_loss = None if train_loss is None else float(train_loss)
        except Exception as exc:  # noqa: BLE001 - a bad trial must not kill the search
            record.error = f"{type(exc).__name__}: {exc}"
            logger.warning("trial %d failed: %s", trial_id, record.error)
        log.append(record)
        if record.dev_accuracy is not None and (
            best is None or record.dev_accuracy > best.dev_accuracy
        ):
            best = record
    if best is None:
        raise RuntimeError(f"all {budget} trials failed; last: {log[-1].error}")
    return best, log


def save_trials(log: list[TrialRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in log:
            fh.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")


def load_trials(path: str | os.PathLike) -> list[TrialRecord]:
    log = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            log.append(
                TrialRecord(
                    trial_id=obj["trial_id"],
                    params=obj["params"],
                    dev_accuracy=obj["dev_accuracy"],
                    train_loss=obj["train_loss"],
                    seed=obj["seed"],
                    error=obj.get("error"),
                )
            )
    return log


def clamp_d_pca(params: dict, stream_dim: int) -> dict:
    """Cap d_pca at the target stream's dimensionality, warning when it bites."""
    if params["d_pca"] <= stream_dim:
        return dict(params)
    logger.warning(
        "d_pca %d exceeds stream dim %d; clamping", params["d_pca"], stream_dim
    )
    out = dict(params)
    out["d_pca"] = stream_dim
    return out


def transfer_and_train(
    params: dict,
    feature_cache,
    kind: str,
    seed: int,
    n_probes: int = 3,
):
    """Train ``n_probes`` independent probes (seeds seed, seed+1, ...) with a
    configuration chosen elsewhere.

    ``feature_cache`` supplies ``dim`` and
    ``features(delta_f, delta_b, d_pca)``; see experiment.PooledFeatureCache.
    Returns (clamped params, feature bundle, list of (probe, loss curve)).
    """
    params = clamp_d_pca(params, feature_cache.dim)
    bundle = feature_cache.features(
        params["delta_f"], params["delta_b"], params["d_pca"]
    )
    y_train, labels_train = bundle.split("train")
    runs = []
    for i in range(n_probes):
        cfg = TrainConfig(
            learning_rate=params["learning_rate"],
            batch_size=params["batch_size"],
            epochs=params["epochs"],
            seed=seed + i,
        )
        probe, losses = train(
            kind, y_train, labels_train, bundle.n_classes, cfg,
            d_hidden=params.get("d_hidden"),
        )
        runs.append((probe, losses))
    return params, bundle, runs
