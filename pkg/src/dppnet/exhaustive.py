"""Brute-force DPP oracles for small catalogs.

Everything here materializes the dense ``n x n`` kernel and enumerates the
power set, which is exactly what the main code path must never do; the two
routes share no linear algebra (LU-based determinants here, Cholesky in
K-space there), so their agreement is a meaningful check.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .catalog import canonical_subset
from .errors import CatalogTooLargeError
from .kernel import check_embedding

DEFAULT_MAX_ITEMS = 15


def _check_cap(n: int, max_items: int) -> None:
    if n > max_items:
        raise CatalogTooLargeError(
            f"power-set enumeration over {n} items exceeds the cap of {max_items}"
        )


def mask_members(mask: int) -> tuple[int, ...]:
    """Indices of the set bits of ``mask``, ascending."""
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def all_subset_logdets(V: np.ndarray, max_items: int = DEFAULT_MAX_ITEMS) -> np.ndarray:
    """``log det(L_A)`` for every subset mask ``A`` of ``0..2^n - 1``.

    Subsets whose determinant is nonpositive (rank-deficient up to roundoff)
    get ``-inf``.
    """
    V = check_embedding(V)
    n = V.shape[0]
    _check_cap(n, max_items)
    L = V @ V.T
    out = np.empty(1 << n)
    out[0] = 0.0  # determinant over the empty index set is 1
    for mask in range(1, 1 << n):
        members = list(mask_members(mask))
        sign, logdet = np.linalg.slogdet(L[np.ix_(members, members)])
        out[mask] = logdet if sign > 0 else -np.inf
    return out


def brute_force_log_normalizer(V: np.ndarray, max_items: int = DEFAULT_MAX_ITEMS) -> float:
    """``log`` of the sum of ``det(L_A)`` over every subset of the catalog."""
    return float(logsumexp(all_subset_logdets(V, max_items)))


def all_subset_log_probs(V: np.ndarray, max_items: int = DEFAULT_MAX_ITEMS) -> np.ndarray:
    """Exact log-probability of every subset mask; exponentials sum to 1."""
    logdets = all_subset_logdets(V, max_items)
    return logdets - logsumexp(logdets)


def brute_force_log_prob(
    V: np.ndarray, subset, max_items: int = DEFAULT_MAX_ITEMS
) -> float:
    """Exact subset log-probability by power-set enumeration."""
    V = check_embedding(V)
    members = canonical_subset(subset, V.shape[0])
    log_probs = all_subset_log_probs(V, max_items)
    mask = sum(1 << i for i in members)
    return float(log_probs[mask])


def brute_force_marginals(
    V: np.ndarray, subset, max_items: int = DEFAULT_MAX_ITEMS
) -> dict[int, float]:
    """Exact next-item conditionals ``Pr(A + {i} occurs | A occurs)``.

    "Occurs" means the drawn set contains the items, so both sides sum the
    determinants of every superset.
    """
    V = check_embedding(V)
    n = V.shape[0]
    members = canonical_subset(subset, n)
    logdets = all_subset_logdets(V, max_items)
    masks = np.arange(1 << n)
    base_mask = sum(1 << i for i in members)
    contains_base = (masks & base_mask) == base_mask
    denom = logsumexp(logdets[contains_base])
    out: dict[int, float] = {}
    for i in range(n):
        if i in members:
            continue
        with_i = contains_base & ((masks >> i & 1) == 1)
        numer = logsumexp(logdets[with_i])
        out[i] = float(np.exp(numer - denom))
    return out
