"""Basket and metadata ingestion, filtering, and train/validation/test splits.

Two basket file formats are supported: "lines" (one basket per line,
whitespace-separated external item ids) and "csv" (header row, columns
``basket_id,item_id``, one row per membership).  Baskets are sets, not
sequences; duplicate items within a basket are collapsed with a warning.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .catalog import Catalog, Subset
from .errors import ConfigError, ParseError
from .seeding import substream

logger = logging.getLogger(__name__)

DEFAULT_MAX_BASKET_SIZE = 100
DEFAULT_TEST_COUNT = 2000
DEFAULT_VALIDATION_COUNT = 300


@dataclass
class DatasetSplit:
    """Disjoint train/validation/test baskets over one catalog."""

    train: list[Subset]
    validation: list[Subset]
    test: list[Subset]
    catalog: Catalog
    features: np.ndarray | None = None


def _dedupe(items: Sequence[str], where: str) -> list[str]:
    seen: dict[str, None] = dict.fromkeys(items)
    dropped = len(items) - len(seen)
    if dropped:
        logger.warning("dropped %d duplicate item(s) in %s", dropped, where)
    return list(seen)


def load_baskets(path, fmt: str = "lines") -> tuple[Catalog, list[Subset]]:
    """Read baskets from ``path``; the catalog is the sorted union of ids."""
    if fmt == "lines":
        raw = _read_lines(path)
    elif fmt == "csv":
        raw = _read_csv(path)
    else:
        raise ConfigError(f"unknown basket format {fmt!r}")
    if not raw:
        raise ParseError(f"{path}: no baskets found")
    catalog = Catalog.from_ids(sorted({item for basket in raw for item in basket}))
    baskets = [catalog.to_indices(basket) for basket in raw]
    return catalog, baskets


def _read_lines(path) -> list[list[str]]:
    baskets = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            items = line.split()
            if not items:
                continue
            baskets.append(_dedupe(items, f"{path}:{lineno}"))
    return baskets


def _read_csv(path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        if "basket_id" not in reader.fieldnames or "item_id" not in reader.fieldnames:
            raise ParseError(f"{path}: header must include basket_id and item_id")
        memberships: dict[str, list[str]] = {}
        for lineno, row in enumerate(reader, start=2):
            basket_id, item_id = row.get("basket_id"), row.get("item_id")
            if not basket_id or not item_id:
                raise ParseError(f"{path}:{lineno}: missing basket_id or item_id")
            memberships.setdefault(basket_id, []).append(item_id)
    return [
        _dedupe(items, f"{path}: basket {basket_id}")
        for basket_id, items in memberships.items()
    ]


def write_baskets(path, catalog: Catalog, baskets: Sequence[Subset], fmt: str = "lines") -> None:
    """Inverse of :func:`load_baskets` for the same two formats."""
    if fmt == "lines":
        with open(path, "w", encoding="utf-8") as handle:
            for basket in baskets:
                handle.write(" ".join(catalog.to_ids(basket)) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["basket_id", "item_id"])
            for number, basket in enumerate(baskets, start=1):
                for item in catalog.to_ids(basket):
                    writer.writerow([number, item])
    else:
        raise ConfigError(f"unknown basket format {fmt!r}")


def filter_by_size(
    baskets: Sequence[Subset], max_size: int = DEFAULT_MAX_BASKET_SIZE
) -> tuple[list[Subset], int]:
    """Drop empty baskets and baskets above ``max_size``; returns the rest
    plus the number dropped."""
    kept = [b for b in baskets if 1 <= len(b) <= max_size]
    return kept, len(baskets) - len(kept)


def split_baskets(
    baskets: Sequence[Subset],
    catalog: Catalog,
    test_count: int = DEFAULT_TEST_COUNT,
    val_count: int = DEFAULT_VALIDATION_COUNT,
    seed: int = 0,
    features: np.ndarray | None = None,
    allow_downscale: bool = True,
) -> DatasetSplit:
    """Uniform random disjoint test/validation selection, rest is training.

    When the requested counts do not leave any training data and
    ``allow_downscale`` is set, both counts are scaled down proportionally so
    that at most half the baskets go to evaluation.
    """
    total = len(baskets)
    if test_count < 1 or val_count < 1:
        raise ConfigError("test and validation counts must be positive")
    if test_count + val_count >= total:
        if not allow_downscale:
            raise ConfigError(
                f"cannot split {total} baskets into test={test_count} + val={val_count}"
            )
        scale = (total // 2) / (test_count + val_count)
        test_count = max(1, math.floor(test_count * scale))
        val_count = max(1, math.floor(val_count * scale))
        if test_count + val_count >= total:
            raise ConfigError(f"too few baskets to split: {total}")
        logger.warning(
            "downscaled split to test=%d validation=%d for %d baskets",
            test_count,
            val_count,
            total,
        )
    order = substream(seed, "split").permutation(total)
    test = [baskets[i] for i in order[:test_count]]
    validation = [baskets[i] for i in order[test_count : test_count + val_count]]
    train = [baskets[i] for i in order[test_count + val_count :]]
    return DatasetSplit(
        train=train, validation=validation, test=test, catalog=catalog, features=features
    )


@dataclass
class FeatureColumn:
    name: str
    kind: str  # "numeric" or "text"
    mean: float = 0.0
    std: float = 1.0
    width: int = 1

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "mean": self.mean,
            "std": self.std,
            "width": self.width,
        }


@dataclass
class FeatureEncoder:
    """Column layout and standardization statistics of an encoded feature file."""

    columns: list[FeatureColumn] = field(default_factory=list)
    hash_width: int = 64

    @property
    def width(self) -> int:
        return sum(column.width for column in self.columns)

    def to_dict(self) -> dict:
        return {
            "hash_width": self.hash_width,
            "columns": [column.to_dict() for column in self.columns],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureEncoder":
        return cls(
            columns=[FeatureColumn(**column) for column in payload["columns"]],
            hash_width=payload["hash_width"],
        )


def hash_bag_of_words(text: str, width: int) -> np.ndarray:
    """Stable hashed token counts; identical across runs and processes."""
    vec = np.zeros(width)
    token = []
    for ch in text.lower() + " ":
        if ch.isalnum():
            token.append(ch)
        elif token:
            word = "".join(token)
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            vec[int.from_bytes(digest[:8], "little") % width] += 1.0
            token = []
    return vec


def load_item_features(
    path,
    catalog: Catalog,
    hash_width: int = 64,
    numeric_columns: Sequence[str] | None = None,
) -> tuple[np.ndarray, FeatureEncoder]:
    """Encode a per-item feature csv into an ``n x d`` matrix.

    Numeric columns are standardized to zero mean and unit variance over the
    items present in the file (zero variance guarded to zeros); text columns
    are hashed to bag-of-words counts of ``hash_width``.  Catalog items
    missing from the file get zero rows; ids not in the catalog are ignored.
    A column listed in ``numeric_columns`` must parse as numbers everywhere;
    otherwise the kind is inferred per column.
    """
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "item_id" not in reader.fieldnames:
            raise ParseError(f"{path}: header must include item_id")
        feature_names = [name for name in reader.fieldnames if name != "item_id"]
        rows: dict[str, dict[str, str]] = {}
        for lineno, row in enumerate(reader, start=2):
            item = row["item_id"]
            if item in rows:
                raise ParseError(f"{path}:{lineno}: duplicate item_id {item!r}")
            rows[item] = row

    unknown = sorted(set(rows) - set(catalog.ids))
    if unknown:
        logger.warning("%s: ignoring %d item(s) not in the catalog", path, len(unknown))
    missing = [item for item in catalog.ids if item not in rows]
    if missing:
        logger.warning("%s: %d catalog item(s) missing, using zero features", path, len(missing))

    forced_numeric = set(numeric_columns or ())
    bad = forced_numeric - set(feature_names)
    if bad:
        raise ConfigError(f"numeric columns not in file: {sorted(bad)}")

    encoder = FeatureEncoder(hash_width=hash_width)
    blocks: list[np.ndarray] = []
    present = [item for item in catalog.ids if item in rows]
    for name in feature_names:
        values = [rows[item][name] or "" for item in present]
        numeric = _parse_numeric(values)
        if numeric is None and name in forced_numeric:
            raise ParseError(f"{path}: non-numeric value in numeric column {name!r}")
        if numeric is not None:
            std = float(np.std(numeric))
            mean = float(np.mean(numeric))
            column = FeatureColumn(name=name, kind="numeric", mean=mean, std=std if std > 0 else 1.0)
            block = np.zeros((catalog.size, 1))
            if std > 0:
                for item, value in zip(present, numeric):
                    block[catalog.index[item], 0] = (value - mean) / std
            blocks.append(block)
        else:
            column = FeatureColumn(name=name, kind="text", width=hash_width)
            block = np.zeros((catalog.size, hash_width))
            for item in present:
                block[catalog.index[item]] = hash_bag_of_words(rows[item][name] or "", hash_width)
            blocks.append(block)
        encoder.columns.append(column)
    matrix = np.hstack(blocks) if blocks else np.zeros((catalog.size, 0))
    return matrix, encoder


def _parse_numeric(values: list[str]) -> list[float] | None:
    parsed = []
    for value in values:
        if value == "":
            parsed.append(0.0)
            continue
        try:
            parsed.append(float(value))
        except ValueError:
            return None
    return parsed
