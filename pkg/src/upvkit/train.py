"""Mini-batch training with early stopping, plus per-label threshold tuning.

The loss per instance is its tier weight times the sum of binary
cross-entropies over the model's active levels; weights are per-instance
multipliers, never renormalised, so dropping a slice of the data leaves every
other instance's loss untouched.  Early stopping watches the development
loss, keeps a snapshot of the best parameters, and restores them at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus
from .model import Model
from .neuralcore import AdamState, NonFiniteError, adam_step, backward, weighted_bce, zero_grads
from .sampler import TrainingInstance, expand_real_simulation
from .taxonomy import Taxonomy

_LEVEL_INDEX = {"t3": 0, "t2": 1, "t1": 2}


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 70
    patience: int = 5
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.batch_size, self.max_epochs, self.patience) <= 0:
            raise ValueError("batch_size, max_epochs and patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_loss: float
    dev_f1: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [(e.epoch, e.train_loss, e.dev_loss, e.dev_f1) for e in self.epochs]


def _instance_arrays(instances: Sequence[TrainingInstance], levels: Sequence[str]):
    tokens = [list(i.tokens) for i in instances]
    labels = [i.label for i in instances]
    weights = np.array([i.weight for i in instances])
    targets = {
        level: np.array([i.targets[_LEVEL_INDEX[level]] for i in instances], dtype=float)
        for level in levels
    }
    return tokens, labels, weights, targets


def instance_losses(
    scores: dict[str, np.ndarray],
    targets: dict[str, np.ndarray],
    weights: np.ndarray,
) -> np.ndarray:
    """Per-instance weighted multi-level BCE, computed outside the graph."""
    clamp = 1e-12
    total = np.zeros_like(weights, dtype=float)
    for level, p in scores.items():
        p = np.clip(p, clamp, 1.0 - clamp)
        y = targets[level]
        total += -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return weights * total


def evaluate_dev(model: Model, instances: Sequence[TrainingInstance]) -> tuple[float, float]:
    """(mean weighted loss, binary T3 F1 at 0.5) on an instance set."""
    tokens, labels, weights, targets = _instance_arrays(instances, model.config.levels)
    scores = model.score_pairs(list(zip(tokens, labels)))
    losses = instance_losses(scores, targets, weights)
    preds = scores["t3"] >= 0.5
    gold = targets["t3"] >= 0.5
    tp = int(np.sum(preds & gold))
    fp = int(np.sum(preds & ~gold))
    fn = int(np.sum(~preds & gold))
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return float(losses.mean()), f1


def train(
    model: Model,
    train_instances: Sequence[TrainingInstance],
    dev_instances: Sequence[TrainingInstance],
    cfg: TrainConfig,
    dev_eval: Callable[[Model, int], tuple[float, float]] | None = None,
    on_epoch: Callable[[Model, EpochStats], None] | None = None,
) -> TrainHistory:
    """Train in place; parameters end at the best-dev-loss epoch.

    ``dev_eval`` overrides the development evaluation (model, epoch) ->
    (loss, f1); tests use it to drive the stopping rule with crafted loss
    sequences.  ``on_epoch`` observes each epoch after its stats are final.
    """
    if not train_instances:
        raise ValueError("no training instances")
    levels = model.config.levels
    tokens, labels, weights, targets = _instance_arrays(train_instances, levels)
    n = len(train_instances)
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    adam = AdamState(params=params, lr=cfg.learning_rate)
    history = TrainHistory()
    best_loss = np.inf
    best_snapshot: list[np.ndarray] | None = None
    non_improving = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch_tokens = [tokens[i] for i in idx]
            batch_labels = [labels[i] for i in idx]
            try:
                scores = model.forward_batch(batch_tokens, batch_labels, mode="train", rng=rng)
                loss = None
                for level in levels:
                    term = weighted_bce(scores[level], targets[level][idx], weights[idx])
                    loss = term if loss is None else loss + term
                zero_grads(params)
                backward(loss)
                adam_step(adam)
            except NonFiniteError as exc:
                raise TrainingDiverged(
                    f"non-finite value at epoch {epoch}, batch {start // cfg.batch_size}: {exc}"
                ) from exc
            loss_sum += loss.item() * len(idx)
        train_loss = loss_sum / n
        if not np.isfinite(train_loss):
            raise TrainingDiverged(f"train loss diverged at epoch {epoch}")

        if dev_eval is not None:
            dev_loss, dev_f1 = dev_eval(model, epoch)
        else:
            dev_loss, dev_f1 = evaluate_dev(model, dev_instances)
        stats = EpochStats(epoch=epoch, train_loss=train_loss, dev_loss=dev_loss, dev_f1=dev_f1)
        history.epochs.append(stats)
        if on_epoch is not None:
            on_epoch(model, stats)

        if dev_loss < best_loss:
            best_loss = dev_loss
            history.best_epoch = epoch
            best_snapshot = [p.data.copy() for p in params]
            non_improving = 0
        else:
            non_improving += 1
            if non_improving >= cfg.patience:
                history.stopped_epoch = epoch
                break
    else:
        history.stopped_epoch = cfg.max_epochs

    if best_snapshot is not None:
        for p, saved in zip(params, best_snapshot):
            p.data = saved
    model.metadata.update(
        {
            "seed": cfg.seed,
            "epochs_run": history.stopped_epoch,
            "best_epoch": history.best_epoch,
            "best_dev_loss": best_loss if np.isfinite(best_loss) else None,
        }
    )
    return history


THRESHOLD_GRID = np.round(np.arange(1, 100) / 100.0, 2)


def tune_thresholds(
    model: Model,
    dev_corpus: Corpus,
    tax: Taxonomy,
    grid: np.ndarray = THRESHOLD_GRID,
) -> dict[str, float]:
    """Per-label decision thresholds maximising dev F1 under full expansion.

    Ties break toward 0.5; labels without dev positives stay at 0.5.
    """
    labels = model.trained_labels
    instances = expand_real_simulation(dev_corpus, tax, labels)
    scores = model.score_pairs([(list(i.tokens), i.label) for i in instances])["t3"]
    gold = np.array([i.targets[0] for i in instances], dtype=bool)
    label_arr = np.array([i.label for i in instances])

    thresholds: dict[str, float] = {}
    for label in labels:
        sel = label_arr == label
        p = scores[sel]
        y = gold[sel]
        if not y.any():
            thresholds[label] = 0.5
            continue
        best_f1 = -1.0
        best_t = 0.5
        for t in grid:
            preds = p >= t
            tp = int(np.sum(preds & y))
            fp = int(np.sum(preds & ~y))
            fn = int(np.sum(~preds & y))
            f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
            better = f1 > best_f1 + 1e-15
            tie = abs(f1 - best_f1) <= 1e-15 and (abs(t - 0.5), t) < (abs(best_t - 0.5), best_t)
            if better or tie:
                best_f1 = f1
                best_t = float(t)
        thresholds[label] = best_t
    return thresholds
