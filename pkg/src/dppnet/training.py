"""The learning loop: mini-batch gradient steps on the tower with Adam.

One iteration is one epoch (a full pass over the training baskets).  Each
mini-batch step materializes the whole embedding matrix with a forward pass
(the normalizer gradient touches every row; this is the scaling bottleneck),
backpropagates the batch loss into the network, and applies Adam.
Convergence is declared when the relative change of the validation
log-likelihood between checks falls below the configured threshold.

With ``worker_count > 1`` training runs lock-free: every worker computes
gradients against the shared parameter arrays and applies updates in place
without synchronization.  Torn reads and writes are tolerated; results for
that mode are only ever compared statistically.
"""

from __future__ import annotations

import csv
import itertools
import logging
import threading
from dataclasses import dataclass, field

import numpy as np

from .datasets import DatasetSplit
from .errors import ConfigError
from .network import (
    AdamConfig,
    AdamState,
    Architecture,
    NetworkParams,
    adam_step,
    backward,
    init_params,
    materialize_embeddings,
)
from .objective import batch_loss_and_embedding_grad, item_counts, validation_log_likelihood
from .seeding import substream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float | None = None  # None resolves to 1.0 shallow, 0.0 deep
    batch_size: int = 200
    max_iterations: int = 1000
    convergence_rel_tol: float = 1e-4
    validation_check_period: int = 10
    seed: int = 0
    worker_count: int = 1
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if self.batch_size < 1 or self.max_iterations < 0:
            raise ConfigError("batch_size must be positive and max_iterations nonnegative")
        if self.convergence_rel_tol <= 0 or self.validation_check_period < 1:
            raise ConfigError("convergence tolerance and check period must be positive")
        if self.worker_count < 1 or self.learning_rate <= 0:
            raise ConfigError("worker_count and learning_rate must be positive")

    def resolve_alpha(self, arch: Architecture) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        return 0.0 if arch.hidden_widths else 1.0


@dataclass
class IterationRecord:
    iteration: int
    train_loss: float
    val_loglik: float | None = None


@dataclass
class TrainingLog:
    records: list[IterationRecord] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iteration", "train_loss", "val_loglik"])
            for record in self.records:
                val = "" if record.val_loglik is None else repr(record.val_loglik)
                writer.writerow([record.iteration, repr(record.train_loss), val])

    @classmethod
    def from_csv(cls, path) -> "TrainingLog":
        log = cls()
        with open(path, encoding="utf-8", newline="") as handle:
            for row in itertools.islice(csv.reader(handle), 1, None):
                val = None if row[2] == "" else float(row[2])
                log.records.append(IterationRecord(int(row[0]), float(row[1]), val))
        return log


class _Convergence:
    """Relative-change stopping rule on the validation log-likelihood."""

    def __init__(self, rel_tol: float):
        self.rel_tol = rel_tol
        self.previous: float | None = None
        self._lock = threading.Lock()

    def update(self, value: float) -> bool:
        with self._lock:
            previous, self.previous = self.previous, value
        if previous is None or not np.isfinite(value) or not np.isfinite(previous):
            return False
        return abs(value - previous) <= self.rel_tol * max(abs(previous), 1e-12)


def _drop_oversized(baskets, rank: int, name: str):
    kept = [b for b in baskets if len(b) <= rank]
    if len(kept) != len(baskets):
        logger.warning(
            "%d %s basket(s) exceed the embedding rank %d and are excluded",
            len(baskets) - len(kept),
            name,
            rank,
        )
    return kept


def train(
    data: DatasetSplit, arch: Architecture, cfg: TrainingConfig
) -> tuple[NetworkParams, np.ndarray, TrainingLog]:
    """Fit the tower to the training baskets; returns the final parameters,
    the materialized embedding matrix, and the per-epoch log."""
    if not data.train:
        raise ConfigError("training split is empty")
    if arch.catalog_size != data.catalog.size:
        raise ConfigError(
            f"architecture is for {arch.catalog_size} items, catalog has {data.catalog.size}"
        )
    features = data.features if arch.meta_width else None
    if arch.meta_width and (
        data.features is None or data.features.shape[1] != arch.meta_width
    ):
        raise ConfigError("architecture expects metadata features the dataset does not provide")

    max_size = max(len(b) for b in data.train)
    if max_size > arch.embedding_dim:
        logger.warning(
            "largest training basket (%d items) exceeds embedding rank %d",
            max_size,
            arch.embedding_dim,
        )
    train_baskets = _drop_oversized(data.train, arch.embedding_dim, "training")
    if not train_baskets:
        raise ConfigError("no training baskets fit within the embedding rank")
    val_baskets = _drop_oversized(data.validation, arch.embedding_dim, "validation")

    alpha = cfg.resolve_alpha(arch)
    counts = item_counts(train_baskets, data.catalog.size)
    params = init_params(arch, substream(cfg.seed, "init").integers(2**63))
    state = AdamState(params)
    adam_cfg = AdamConfig(learning_rate=cfg.learning_rate)
    log = TrainingLog()
    stopper = _Convergence(cfg.convergence_rel_tol)

    context = (params, state, adam_cfg, features, train_baskets, val_baskets, counts, alpha)
    if cfg.worker_count == 1:
        _run_sequential(cfg, context, log, stopper)
    else:
        _run_hogwild(cfg, context, log, stopper)

    V, _ = materialize_embeddings(params, features)
    return params, V, log


def _one_epoch(rng, cfg, context) -> float:
    """One shuffled pass over the training baskets; returns the mean batch loss."""
    params, state, adam_cfg, features, train_baskets, _, counts, alpha = context
    order = rng.permutation(len(train_baskets))
    losses = []
    for start in range(0, len(order), cfg.batch_size):
        batch = [train_baskets[i] for i in order[start : start + cfg.batch_size]]
        V, cache = materialize_embeddings(params, features)
        loss, grad_v = batch_loss_and_embedding_grad(
            V, batch, counts, alpha, batch_scale=len(batch)
        )
        grads = backward(params, cache, grad_v)
        adam_step(params, grads, state, adam_cfg)
        losses.append(loss)
    return float(np.mean(losses))


def _check_validation(epoch, cfg, context, stopper) -> tuple[float | None, bool]:
    params, _, _, features, _, val_baskets, _, _ = context
    if not val_baskets or epoch % cfg.validation_check_period != 0:
        return None, False
    V, _ = materialize_embeddings(params, features)
    value = validation_log_likelihood(V, val_baskets)
    return value, stopper.update(value)


def _run_sequential(cfg, context, log, stopper):
    rng = substream(cfg.seed, "batches")
    for epoch in range(1, cfg.max_iterations + 1):
        train_loss = _one_epoch(rng, cfg, context)
        val_value, converged = _check_validation(epoch, cfg, context, stopper)
        log.records.append(IterationRecord(epoch, train_loss, val_value))
        if converged:
            logger.info("converged after %d iteration(s)", epoch)
            break


def _run_hogwild(cfg, context, log, stopper):
    counter = itertools.count(1)
    counter_lock = threading.Lock()
    log_lock = threading.Lock()
    stop = threading.Event()

    def work(worker_id: int):
        rng = substream(cfg.seed, f"batches-worker{worker_id}")
        while not stop.is_set():
            with counter_lock:
                epoch = next(counter)
            if epoch > cfg.max_iterations:
                stop.set()
                return
            train_loss = _one_epoch(rng, cfg, context)
            val_value, converged = _check_validation(epoch, cfg, context, stopper)
            with log_lock:
                log.records.append(IterationRecord(epoch, train_loss, val_value))
            if converged:
                logger.info("converged after %d iteration(s)", epoch)
                stop.set()

    threads = [
        threading.Thread(target=work, args=(w,), name=f"trainer-{w}")
        for w in range(cfg.worker_count)
    ]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    log.records.sort(key=lambda record: record.iteration)
