import logging

import numpy as np
import pytest

from dppnet.datasets import (
    FeatureEncoder,
    filter_by_size,
    hash_bag_of_words,
    load_baskets,
    load_item_features,
    split_baskets,
    write_baskets,
)
from dppnet.errors import ConfigError, ParseError


class TestLoadBaskets:
    def test_lines_format(self, tmp_path):
        path = tmp_path / "baskets.txt"
        path.write_text("a b\nb c\n")
        catalog, baskets = load_baskets(path, "lines")
        assert catalog.ids == ("a", "b", "c")
        assert baskets == [(0, 1), (1, 2)]

    def test_csv_format_with_duplicate_warning(self, tmp_path, caplog):
        path = tmp_path / "baskets.csv"
        path.write_text("basket_id,item_id\n1,a\n1,a\n1,b\n")
        with caplog.at_level(logging.WARNING, logger="dppnet.datasets"):
            catalog, baskets = load_baskets(path, "csv")
        assert baskets == [(0, 1)]
        assert "duplicate" in caplog.text

    def test_round_trip_both_formats(self, tmp_path):
        path = tmp_path / "in.txt"
        path.write_text("x y z\nw\ny x\n")
        catalog, baskets = load_baskets(path, "lines")
        for fmt in ("lines", "csv"):
            out = tmp_path / f"out.{fmt}"
            write_baskets(out, catalog, baskets, fmt)
            catalog2, baskets2 = load_baskets(out, fmt)
            assert catalog2.ids == catalog.ids
            assert baskets2 == baskets

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(ParseError):
            load_baskets(path, "lines")

    def test_csv_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(ParseError):
            load_baskets(path, "csv")

    def test_csv_missing_value_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("basket_id,item_id\n1,a\n,b\n")
        with pytest.raises(ParseError, match=":3"):
            load_baskets(path, "csv")

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "x.txt"
        path.write_text("a\n")
        with pytest.raises(ConfigError):
            load_baskets(path, "parquet")


class TestFilterBySize:
    def test_drops_oversized(self):
        baskets = [(0,), (0, 1), (0, 1, 2)]
        kept, dropped = filter_by_size(baskets, max_size=2)
        assert kept == [(0,), (0, 1)]
        assert dropped == 1

    def test_identity_when_within_limit(self):
        baskets = [(0,), (1, 2)]
        kept, dropped = filter_by_size(baskets, max_size=100)
        assert kept == baskets and dropped == 0

    def test_drops_empty(self):
        kept, dropped = filter_by_size([(), (0,)], max_size=5)
        assert kept == [(0,)] and dropped == 1


class TestSplit:
    def _baskets(self, count):
        return [(i % 5,) for i in range(count)]

    def _catalog(self):
        from dppnet.catalog import Catalog

        return Catalog.from_ids([f"i{j}" for j in range(5)])

    def test_counts_and_disjointness(self):
        split = split_baskets(self._baskets(100), self._catalog(), 10, 5, seed=1)
        assert len(split.test) == 10
        assert len(split.validation) == 5
        assert len(split.train) == 85

    def test_same_seed_same_split(self):
        a = split_baskets(self._baskets(50), self._catalog(), 10, 5, seed=3)
        b = split_baskets(self._baskets(50), self._catalog(), 10, 5, seed=3)
        assert a.test == b.test and a.validation == b.validation and a.train == b.train

    def test_downscales_default_counts(self, caplog):
        with caplog.at_level(logging.WARNING, logger="dppnet.datasets"):
            split = split_baskets(self._baskets(100), self._catalog(), seed=0)
        assert "downscaled" in caplog.text
        # proportional to the 2000/300 defaults, at most half the data
        assert len(split.test) + len(split.validation) <= 50
        assert len(split.test) > len(split.validation)
        assert len(split.train) >= 50

    def test_insufficient_baskets(self):
        with pytest.raises(ConfigError):
            split_baskets(self._baskets(10), self._catalog(), 8, 4, seed=0, allow_downscale=False)
        with pytest.raises(ConfigError):
            split_baskets(self._baskets(2), self._catalog(), 1, 1, seed=0)


class TestItemFeatures:
    def _catalog(self, ids):
        from dppnet.catalog import Catalog

        return Catalog.from_ids(ids)

    def test_constant_numeric_column_becomes_zeros(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("item_id,price\na,5\nb,5\nc,5\n")
        matrix, encoder = load_item_features(path, self._catalog(["a", "b", "c"]))
        assert np.allclose(matrix, 0.0)
        assert encoder.columns[0].kind == "numeric"

    def test_standardization(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("item_id,price\na,1\nb,2\nc,3\n")
        matrix, _ = load_item_features(path, self._catalog(["a", "b", "c"]))
        assert np.mean(matrix[:, 0]) == pytest.approx(0.0, abs=1e-12)
        assert np.std(matrix[:, 0]) == pytest.approx(1.0, rel=1e-12)

    def test_missing_item_gets_zero_row(self, tmp_path, caplog):
        path = tmp_path / "features.csv"
        path.write_text("item_id,price\na,1\nb,3\n")
        with caplog.at_level(logging.WARNING, logger="dppnet.datasets"):
            matrix, _ = load_item_features(path, self._catalog(["a", "b", "c"]))
        assert np.allclose(matrix[2], 0.0)
        assert "missing" in caplog.text

    def test_unknown_item_warns(self, tmp_path, caplog):
        path = tmp_path / "features.csv"
        path.write_text("item_id,price\na,1\nzzz,9\nb,3\n")
        with caplog.at_level(logging.WARNING, logger="dppnet.datasets"):
            matrix, _ = load_item_features(path, self._catalog(["a", "b"]))
        assert "not in the catalog" in caplog.text
        assert matrix.shape == (2, 1)

    def test_text_column_hashed(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text('item_id,name\na,"red mug"\nb,"blue plate"\n')
        matrix, encoder = load_item_features(path, self._catalog(["a", "b"]), hash_width=32)
        assert encoder.columns[0].kind == "text"
        assert matrix.shape == (2, 32)
        assert not np.array_equal(matrix[0], matrix[1])

    def test_distinct_descriptions_hash_distinctly(self):
        descriptions = [
            "red ceramic mug",
            "blue dinner plate",
            "green tea kettle",
            "small wooden spoon",
            "large glass bowl",
            "vintage brass lamp",
            "striped cotton towel",
            "heavy iron skillet",
        ]
        vectors = [hash_bag_of_words(text, 64) for text in descriptions]
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                assert not np.array_equal(vectors[i], vectors[j])

    def test_forced_numeric_column_parse_error(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("item_id,price\na,1\nb,cheap\n")
        with pytest.raises(ParseError):
            load_item_features(path, self._catalog(["a", "b"]), numeric_columns=["price"])

    def test_encoder_round_trip(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text('item_id,price,name\na,1,"red mug"\nb,2,"blue plate"\n')
        _, encoder = load_item_features(path, self._catalog(["a", "b"]), hash_width=16)
        clone = FeatureEncoder.from_dict(encoder.to_dict())
        assert clone == encoder
        assert clone.width == 1 + 16
