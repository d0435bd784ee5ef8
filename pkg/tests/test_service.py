import csv
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dppnet.modelfile import load_model
from dppnet.service import create_app


@pytest.fixture()
def client():
    with TestClient(create_app()) as test_client:
        yield test_client


@pytest.fixture()
def planted_files(client, tmp_path):
    baskets = tmp_path / "baskets.txt"
    response = client.post(
        "/synthesize",
        json={
            "kind": "planted",
            "catalog_size": 10,
            "embedding_dim": 3,
            "basket_count": 500,
            "seed": 5,
            "output_path": str(baskets),
        },
    )
    assert response.status_code == 200
    return baskets


@pytest.fixture()
def trained_model(client, planted_files, tmp_path):
    model_path = tmp_path / "model.json"
    response = client.post(
        "/train",
        json={
            "baskets_path": str(planted_files),
            "embedding_dim": 3,
            "max_iterations": 5,
            "batch_size": 100,
            "learning_rate": 0.05,
            "seed": 3,
            "test_count": 50,
            "val_count": 25,
            "output_path": str(model_path),
        },
    )
    assert response.status_code == 200, response.text
    return model_path, response.json()


def test_health_reports_no_model(client):
    payload = client.get("/health").json()
    assert payload["status"] == "ok"
    assert payload["model_loaded"] is False


def test_synthesize_writes_baskets_and_truth(client, planted_files):
    assert planted_files.exists()
    truth = json.loads((planted_files.parent / "baskets.txt.truth.json").read_text())
    assert truth["kind"] == "planted"
    assert len(truth["embeddings"]) == 10
    lines = planted_files.read_text().splitlines()
    assert len(lines) == 500


def test_train_reports_split_sizes_and_writes_log(client, trained_model):
    model_path, payload = trained_model
    assert model_path.exists()
    assert payload["catalog_size"] == 10
    assert payload["train_baskets"] == 500 - 50 - 25
    assert payload["iterations"] == 5
    log_path = payload["log_path"]
    with open(log_path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["iteration", "train_loss", "val_loglik"]
    assert len(rows) == 6


def test_load_and_predict(client, trained_model):
    model_path, _ = trained_model
    info = client.post("/models/load", json={"model_path": str(model_path)}).json()
    assert info["catalog_size"] == 10
    assert client.get("/health").json()["model_loaded"] is True

    response = client.post("/predict", json={"basket": ["item0001", "item0003"], "top_k": 4})
    assert response.status_code == 200
    predictions = response.json()["predictions"]
    assert len(predictions) == 4
    probs = [row["probability"] for row in predictions]
    assert probs == sorted(probs, reverse=True)
    assert all(0.0 <= p <= 1.0 for p in probs)
    returned = {row["item_id"] for row in predictions}
    assert {"item0001", "item0003"}.isdisjoint(returned)


def test_predict_without_model_is_conflict(client):
    response = client.post("/predict", json={"basket": ["a"]})
    assert response.status_code == 409


def test_predict_unknown_item_names_offender(client, trained_model):
    model_path, _ = trained_model
    response = client.post(
        "/predict",
        json={"basket": ["item0001", "mystery"], "model_path": str(model_path)},
    )
    assert response.status_code == 400
    assert "mystery" in response.json()["detail"]


def test_predict_whole_catalog_returns_empty(client, trained_model):
    model_path, _ = trained_model
    basket = [f"item{i:04d}" for i in range(10)]
    response = client.post(
        "/predict", json={"basket": basket, "model_path": str(model_path), "top_k": 3}
    )
    assert response.status_code == 200
    assert response.json()["predictions"] == []


def test_predict_top_k_larger_than_candidates(client, trained_model):
    model_path, _ = trained_model
    response = client.post(
        "/predict",
        json={"basket": ["item0002", "item0004"], "model_path": str(model_path), "top_k": 50},
    )
    assert len(response.json()["predictions"]) == 8


def test_predict_degenerate_basket_is_explicit(client, trained_model):
    # rank-3 model cannot condition on more items than its rank
    model_path, _ = trained_model
    basket = [f"item{i:04d}" for i in range(8)]
    response = client.post(
        "/predict", json={"basket": basket, "model_path": str(model_path), "top_k": 5}
    )
    assert response.status_code == 400
    assert "singular" in response.json()["detail"]


def test_evaluate_writes_reports(client, trained_model, planted_files, tmp_path):
    model_path, _ = trained_model
    prefix = tmp_path / "reports"
    response = client.post(
        "/evaluate",
        json={
            "model_path": str(model_path),
            "baskets_path": str(planted_files),
            "metric": "both",
            "seed": 1,
            "output_prefix": str(prefix),
        },
    )
    assert response.status_code == 200
    payload = response.json()
    metrics = {report["metric"] for report in payload["reports"]}
    assert metrics == {"mpr", "auc"}
    for report in payload["reports"]:
        segments = [row["segment"] for row in report["segments"]]
        assert segments == ["overall", "small", "medium", "large"]
    assert len(payload["report_files"]) == 4
    for path in payload["report_files"]:
        assert json.loads(json.dumps(path))  # path strings
    mpr_csv = tmp_path / "reports.mpr.csv"
    assert mpr_csv.exists()


def test_evaluate_skips_unknown_items(client, trained_model, tmp_path):
    model_path, _ = trained_model
    baskets = tmp_path / "other.txt"
    baskets.write_text("item0001 item0002\nitem0003 notInCatalog\n")
    response = client.post(
        "/evaluate",
        json={"model_path": str(model_path), "baskets_path": str(baskets), "metric": "auc"},
    )
    payload = response.json()
    assert payload["skipped_baskets"] == 1
    assert payload["evaluated_baskets"] == 1


def test_export_round_trip(client, trained_model, tmp_path):
    model_path, _ = trained_model
    out = tmp_path / "embeddings.csv"
    response = client.post(
        "/export", json={"model_path": str(model_path), "output_path": str(out)}
    )
    payload = response.json()
    assert payload["rows"] == 10
    with open(out, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0][0] == "item_id"
    matrix = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    model = load_model(model_path)
    assert np.array_equal(matrix, model.embeddings)
    assert [row[0] for row in rows[1:]] == list(model.catalog.ids)


def test_missing_file_is_404(client):
    response = client.post(
        "/evaluate", json={"model_path": "/no/such/model.json", "baskets_path": "x"}
    )
    assert response.status_code == 404


def test_bad_basket_file_is_400(client, tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    response = client.post("/train", json={"baskets_path": str(path)})
    assert response.status_code == 400


def test_xor_synthesis(client, tmp_path):
    out = tmp_path / "xor.txt"
    response = client.post(
        "/synthesize",
        json={"kind": "xor", "catalog_size": 16, "basket_count": 200, "seed": 2,
              "output_path": str(out)},
    )
    assert response.status_code == 200
    truth = json.loads((tmp_path / "xor.txt.truth.json").read_text())
    assert truth["kind"] == "xor"
    assert len(truth["attributes"]) == 16
