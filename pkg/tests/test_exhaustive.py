import math

import numpy as np
import pytest

from dppnet.errors import CatalogTooLargeError
from dppnet.exhaustive import (
    all_subset_log_probs,
    brute_force_log_prob,
    brute_force_marginals,
    mask_members,
)
from dppnet.kernel import next_item_marginals, condition, subset_log_prob


def test_single_item_catalog():
    V = np.array([[1.0]])
    assert brute_force_log_prob(V, (0,)) == pytest.approx(math.log(0.5))
    assert brute_force_log_prob(V, ()) == pytest.approx(math.log(0.5))


def test_identity_two_items_equiprobable():
    probs = np.exp(all_subset_log_probs(np.eye(2)))
    assert probs == pytest.approx([0.25, 0.25, 0.25, 0.25])


def test_log_probs_normalize():
    V = np.random.default_rng(9).standard_normal((7, 3))
    assert np.exp(all_subset_log_probs(V)).sum() == pytest.approx(1.0, abs=1e-12)


def test_cap_enforced():
    V = np.zeros((16, 2))
    with pytest.raises(CatalogTooLargeError):
        brute_force_log_prob(V, (0,), max_items=15)


def test_mask_members_round_trip():
    assert mask_members(0) == ()
    assert mask_members(0b101001) == (0, 3, 5)


@pytest.mark.parametrize("seed", range(6))
def test_agrees_with_low_rank_path(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 13))
    k = int(rng.integers(1, 4))
    V = rng.standard_normal((n, k))
    for _ in range(5):
        size = int(rng.integers(0, min(k, n) + 1))
        members = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
        assert brute_force_log_prob(V, members) == pytest.approx(
            subset_log_prob(V, members), abs=1e-8
        )
    base = tuple(sorted(rng.choice(n, size=min(2, k), replace=False).tolist()))
    if np.isfinite(subset_log_prob(V, base)):
        oracle = brute_force_marginals(V, base)
        fast = next_item_marginals(condition(V, base))
        for i in oracle:
            assert fast[i] == pytest.approx(oracle[i], abs=1e-8)
