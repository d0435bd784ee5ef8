"""Synthetic basket generators with known ground truth.

Two flavors: an exact planted low-rank DPP (small catalogs only; subsets are
drawn from the exactly enumerated distribution) and an XOR co-occurrence
rule that no bilinear kernel represents cleanly, for probing nonlinear
interaction learning.
"""

from __future__ import annotations

import numpy as np

from .catalog import Subset
from .errors import CatalogTooLargeError, ConfigError
from .exhaustive import DEFAULT_MAX_ITEMS, all_subset_log_probs, mask_members


def generate_planted_dpp(
    n: int,
    rank: int,
    basket_count: int,
    seed: int,
    scale: float = 1.0,
) -> tuple[np.ndarray, list[Subset]]:
    """Draw a ground-truth embedding matrix and sample baskets from its DPP.

    Sampling enumerates all ``2^n`` subset probabilities exactly, so ``n`` is
    capped; empty draws are rejected and resampled.
    """
    if n > DEFAULT_MAX_ITEMS:
        raise CatalogTooLargeError(f"planted sampling caps the catalog at {DEFAULT_MAX_ITEMS}")
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, rank)) * scale
    probs = np.exp(all_subset_log_probs(V))
    probs /= probs.sum()
    baskets: list[Subset] = []
    while len(baskets) < basket_count:
        remaining = basket_count - len(baskets)
        draws = rng.choice(probs.size, size=max(remaining, 16), p=probs)
        baskets.extend(mask_members(int(m)) for m in draws[:remaining] if m != 0)
    return V, baskets


def _attribute_groups(attributes: np.ndarray) -> np.ndarray:
    return 2 * attributes[:, 0] + attributes[:, 1]


def xor_rule_holds(basket: Subset, attributes: np.ndarray) -> bool:
    """True when no three basket members share the same attribute pair.

    Two items share a pair exactly when both attribute XORs vanish, so this
    is the planted co-occurrence rule: crowds of lookalikes never appear
    together.
    """
    groups = _attribute_groups(attributes)[list(basket)]
    return int(np.bincount(groups, minlength=4).max()) <= 2


def generate_xor_cooccurrence(
    n: int,
    basket_count: int,
    seed: int,
    shuffle_attributes: bool = False,
) -> tuple[list[Subset], np.ndarray]:
    """Baskets constrained by an XOR rule over two hidden binary attributes.

    Each item carries attributes ``(a, b)``; a candidate pool is valid only
    when at most two members agree on both attributes (pairwise attribute
    XORs of ``(0, 0)`` are what the rule counts).  The pair-equality pattern
    is a XOR interaction of the attribute bits, so no kernel bilinear in the
    attributes separates it, while the induced triple-level structure is
    exactly representable by a DPP.  Baskets are uniform over valid pools of
    sizes 2..5 (rejection sampling).  Returns the baskets and the true
    ``n x 2`` attribute matrix.  With ``shuffle_attributes`` validity is
    checked against a shuffled copy of the attributes, producing a control
    stream whose baskets violate the true rule.
    """
    if n < 8:
        raise ConfigError("XOR generator needs at least 8 items")
    rng = np.random.default_rng(seed)
    # balanced assignment of the four (a, b) combinations, in random item order
    combos = np.array([[i % 2, (i // 2) % 2] for i in range(n)], dtype=np.int64)
    attributes = combos[rng.permutation(n)]
    sampling_attrs = attributes[rng.permutation(n)] if shuffle_attributes else attributes
    groups = _attribute_groups(sampling_attrs)
    baskets: list[Subset] = []
    while len(baskets) < basket_count:
        size = int(rng.integers(2, 6))
        members = rng.choice(n, size=size, replace=False)
        if np.bincount(groups[members], minlength=4).max() <= 2:
            baskets.append(tuple(sorted(int(i) for i in members)))
    return baskets, attributes
