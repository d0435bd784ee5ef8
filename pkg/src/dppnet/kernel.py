"""Exact low-rank DPP computations.

The kernel over an ``n``-item catalog is ``L = V V^T`` for an ``n x K``
embedding matrix ``V``.  Everything here works in ``K x K`` (or ``|A| x |A|``)
space; the full ``n x n`` kernel is never materialized, so the cost of every
operation is linear in the catalog size at fixed ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg

from .catalog import Subset, canonical_subset
from .errors import DegenerateSubsetError

# A symmetric PSD matrix counts as singular when its smallest Cholesky pivot
# (or eigenvalue) falls below this fraction of the largest.
SINGULAR_RTOL = 1e-10


def check_embedding(V: np.ndarray) -> np.ndarray:
    """Validate and return an embedding matrix as a float64 array."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
        raise ValueError(f"embedding matrix must be 2-D and nonempty, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise ValueError("embedding matrix contains non-finite entries")
    return V


def psd_logdet(gram: np.ndarray) -> float:
    """Log-determinant of a symmetric PSD matrix, ``-inf`` when singular.

    Uses a Cholesky factorization; rank deficiency shows up either as a
    failed factorization or as a pivot below ``SINGULAR_RTOL`` times the
    largest pivot.
    """
    if gram.shape[0] == 0:
        return 0.0
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return float("-inf")
    pivots = np.diagonal(chol) ** 2
    if pivots.min() <= SINGULAR_RTOL * pivots.max():
        return float("-inf")
    return float(2.0 * np.sum(np.log(np.diagonal(chol))))


def subset_logdet(V: np.ndarray, subset: Iterable[int]) -> float:
    """``log det(V_A V_A^T)`` for the rows of ``V`` indexed by ``subset``.

    Returns 0 for the empty subset (determinant of the empty matrix is 1)
    and ``-inf`` when the Gram matrix is singular, in particular whenever
    ``|A|`` exceeds the embedding rank.
    """
    V = check_embedding(V)
    members = canonical_subset(subset, V.shape[0])
    if not members:
        return 0.0
    if len(members) > V.shape[1]:
        return float("-inf")
    rows = V[list(members)]
    return psd_logdet(rows @ rows.T)


def log_normalizer(V: np.ndarray) -> float:
    """``log det(V^T V + I)``, equal to ``log det(V V^T + I)`` in K x K space."""
    V = check_embedding(V)
    k = V.shape[1]
    gram = V.T @ V + np.eye(k)
    chol = np.linalg.cholesky(gram)
    return float(2.0 * np.sum(np.log(np.diagonal(chol))))


def subset_log_prob(V: np.ndarray, subset: Iterable[int]) -> float:
    """Normalized log-probability of observing exactly ``subset``."""
    return subset_logdet(V, subset) - log_normalizer(V)


@dataclass(frozen=True)
class ConditionedKernel:
    """Dual kernel conditioned on a subset being present.

    ``projected_features`` is the ``K x n`` matrix of per-item feature
    columns after projecting out the span of the conditioned-on items;
    ``eigenvalues``/``eigenvectors`` diagonalize the conditioned dual
    kernel (eigenvalues clamped to be nonnegative).
    """

    base_subset: Subset
    projected_features: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def catalog_size(self) -> int:
        return self.projected_features.shape[1]


def condition(V: np.ndarray, subset: Iterable[int]) -> ConditionedKernel:
    """Condition the DPP on all items of ``subset`` being present.

    With ``B = V^T`` and ``B_A`` its column restriction to the subset, the
    projector ``Z = I - B_A (B_A^T B_A)^{-1} B_A^T`` annihilates the span of
    the conditioned items; the conditioned dual kernel is ``(Z B)(Z B)^T``.
    Raises :class:`DegenerateSubsetError` when the subset itself has zero
    probability (singular ``B_A^T B_A``).
    """
    V = check_embedding(V)
    n, k = V.shape
    members = canonical_subset(subset, n)
    if not members:
        raise DegenerateSubsetError("cannot condition on the empty subset")
    b_sub = V[list(members)].T  # K x |A|
    gram = b_sub.T @ b_sub
    if len(members) > k or not np.isfinite(psd_logdet(gram)):
        raise DegenerateSubsetError(
            f"subset {members} has a singular Gram matrix; conditioning is undefined"
        )
    solved = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram, lower=True), b_sub.T)
    projector = np.eye(k) - b_sub @ solved
    projected = projector @ V.T  # K x n
    conditioned = projected @ projected.T
    eigenvalues, eigenvectors = np.linalg.eigh(conditioned)
    eigenvalues = np.maximum(eigenvalues, 0.0)  # PSD up to roundoff
    return ConditionedKernel(
        base_subset=members,
        projected_features=projected,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
    )


def marginal_vector(ck: ConditionedKernel) -> np.ndarray:
    """Per-item conditional inclusion probabilities, one entry per catalog item.

    Each kept eigenpair contributes ``(lam/(lam+1)) * ((b_i . v)^2 / lam)``,
    i.e. ``(b_i . v)^2 / (lam + 1)``; eigenvalues below tolerance are skipped
    (their whitened projection is undefined).  Entries for the conditioned-on
    items are numerically zero because the projection annihilates them.
    """
    lam = ck.eigenvalues
    if lam.size == 0 or lam.max() <= 0.0:
        return np.zeros(ck.catalog_size)
    keep = lam > SINGULAR_RTOL * lam.max()
    proj = ck.eigenvectors[:, keep].T @ ck.projected_features  # kept x n
    probs = (proj**2 / (lam[keep] + 1.0)[:, None]).sum(axis=0)
    return np.clip(probs, 0.0, 1.0)


def next_item_marginals(ck: ConditionedKernel) -> dict[int, float]:
    """Conditional probability of each item outside the conditioned subset."""
    probs = marginal_vector(ck)
    members = set(ck.base_subset)
    return {i: float(probs[i]) for i in range(ck.catalog_size) if i not in members}
