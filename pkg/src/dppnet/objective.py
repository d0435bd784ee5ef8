"""Regularized DPP log-likelihood over basket mini-batches.

The batch loss is the negative log-likelihood restricted to the batch, with
the global normalizer reweighted so that summed batch losses over an epoch
match the full objective, plus a popularity-weighted ridge on the embedding
rows.  Gradients with respect to the embedding matrix are closed-form:

    d log det(V_A V_A^T) / d V_A = 2 (V_A V_A^T)^{-1} V_A
    d log det(V^T V + I) / d V   = 2 V (V^T V + I)^{-1}
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import scipy.linalg

from .catalog import Subset
from .kernel import SINGULAR_RTOL, check_embedding, log_normalizer, subset_logdet

logger = logging.getLogger(__name__)


def item_counts(baskets: Sequence[Subset], catalog_size: int) -> np.ndarray:
    """Occurrence count of every item across the training baskets."""
    counts = np.zeros(catalog_size)
    for basket in baskets:
        counts[list(basket)] += 1.0
    return counts


def batch_loss_and_embedding_grad(
    V: np.ndarray,
    batch: Sequence[Subset],
    counts: np.ndarray,
    alpha: float,
    batch_scale: float,
):
    """Loss and its gradient with respect to every embedding row.

    ``batch_scale`` multiplies the log-normalizer; the training loop passes
    the batch size so that batch losses summed over an epoch estimate the
    full-dataset objective.  Baskets with a singular Gram matrix (including
    any larger than the embedding rank) are skipped with a warning rather
    than sending the loss to infinity.
    """
    V = check_embedding(V)
    n, k = V.shape
    grad = np.zeros_like(V)
    loss = 0.0
    skipped = 0
    for basket in batch:
        members = list(basket)
        rows = V[members]
        gram = rows @ rows.T
        if len(members) > k:
            skipped += 1
            continue
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            skipped += 1
            continue
        pivots = np.diagonal(chol) ** 2
        if pivots.min() <= SINGULAR_RTOL * pivots.max():
            skipped += 1
            continue
        loss -= float(2.0 * np.sum(np.log(np.diagonal(chol))))
        solved = scipy.linalg.cho_solve((chol, True), rows)  # (V_A V_A^T)^{-1} V_A
        grad[members] -= 2.0 * solved
    if skipped:
        logger.warning("skipped %d degenerate basket(s) in batch of %d", skipped, len(batch))

    gram = V.T @ V + np.eye(k)
    chol = np.linalg.cholesky(gram)
    loss += batch_scale * float(2.0 * np.sum(np.log(np.diagonal(chol))))
    grad += batch_scale * 2.0 * scipy.linalg.cho_solve((chol, True), V.T).T

    if alpha != 0.0:
        weights = 1.0 / np.maximum(np.asarray(counts, dtype=np.float64), 1.0)
        loss += alpha * float(np.sum(weights * np.sum(V**2, axis=1)))
        grad += 2.0 * alpha * weights[:, None] * V
    return loss, grad


def validation_log_likelihood(V: np.ndarray, baskets: Sequence[Subset]) -> float:
    """Unregularized log-likelihood of the baskets; degenerate baskets
    contribute ``-inf`` (reported, never masked)."""
    V = check_embedding(V)
    total = sum(subset_logdet(V, basket) for basket in baskets)
    return float(total - len(baskets) * log_normalizer(V))
