import csv
import json

import numpy as np
import pytest

from dppnet.cli import main, read_config


@pytest.fixture()
def synth_baskets(tmp_path, capsys):
    out = tmp_path / "baskets.txt"
    assert (
        main(
            [
                "synth",
                "--kind",
                "planted",
                "--n",
                "10",
                "--k",
                "3",
                "--count",
                "400",
                "--seed",
                "7",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    capsys.readouterr()
    return out


def train_args(baskets, model, extra=()):
    return [
        "train",
        "--baskets",
        str(baskets),
        "--k",
        "3",
        "--max-iter",
        "4",
        "--batch-size",
        "100",
        "--lr",
        "0.05",
        "--seed",
        "1",
        "--test-count",
        "40",
        "--val-count",
        "20",
        "--out",
        str(model),
        *extra,
    ]


def test_synth_is_deterministic(tmp_path, capsys):
    out1, out2 = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (out1, out2):
        main(["synth", "--n", "9", "--count", "50", "--seed", "3", "--out", str(out)])
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()


def test_train_eval_predict_export_flow(tmp_path, capsys, synth_baskets):
    model = tmp_path / "model.json"
    assert main(train_args(synth_baskets, model)) == 0
    output = capsys.readouterr().out
    assert "final validation log-likelihood" in output
    assert model.exists()

    assert (
        main(
            [
                "eval",
                "--model",
                str(model),
                "--baskets",
                str(synth_baskets),
                "--metric",
                "both",
                "--seed",
                "2",
            ]
        )
        == 0
    )
    output = capsys.readouterr().out
    assert "mpr overall" in output and "auc overall" in output
    assert (tmp_path / "model.json.eval.mpr.json").exists()
    assert (tmp_path / "model.json.eval.auc.csv").exists()

    assert (
        main(["predict", "--model", str(model), "--basket", "item0001,item0004", "--top-k", "3"])
        == 0
    )
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    first_prob = float(lines[0].split("\t")[1])
    assert 0.0 <= first_prob <= 1.0

    export = tmp_path / "emb.csv"
    assert main(["export", "--model", str(model), "--out", str(export)]) == 0
    capsys.readouterr()
    with open(export, newline="") as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 11  # header + one row per item
    matrix = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    assert matrix.shape == (10, 3)


def test_train_is_deterministic(tmp_path, capsys, monkeypatch, synth_baskets):
    # identical flags in two fresh working directories: byte-identical model
    models = []
    for name in ("run1", "run2"):
        workdir = tmp_path / name
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        main(train_args(synth_baskets, "model.json"))
        models.append((workdir / "model.json").read_bytes())
    capsys.readouterr()
    assert models[0] == models[1]


def test_missing_required_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["train"])
    assert err.value.code == 2


def test_unknown_item_is_reported(tmp_path, capsys, synth_baskets):
    model = tmp_path / "model.json"
    main(train_args(synth_baskets, model))
    capsys.readouterr()
    with pytest.raises(SystemExit) as err:
        main(["predict", "--model", str(model), "--basket", "item0001,bogus"])
    assert err.value.code == 1
    assert "bogus" in capsys.readouterr().err


def test_config_file_defaults(tmp_path, capsys, synth_baskets):
    config = tmp_path / "run.cfg"
    config.write_text("k=3\nmax-iter=2\nbatch-size=100\ntest-count=40\nval-count=20\nseed=9\n")
    model = tmp_path / "model.json"
    assert (
        main(
            [
                "--config",
                str(config),
                "train",
                "--baskets",
                str(synth_baskets),
                "--out",
                str(model),
            ]
        )
        == 0
    )
    capsys.readouterr()
    payload = json.loads(model.read_text())
    assert payload["training_config"]["embedding_dim"] == 3
    assert payload["training_config"]["max_iterations"] == 2
    assert payload["training_config"]["seed"] == 9


def test_config_flag_override(tmp_path, capsys, synth_baskets):
    config = tmp_path / "run.cfg"
    config.write_text("k=3\nmax-iter=2\nbatch-size=100\ntest-count=40\nval-count=20\n")
    model = tmp_path / "model.json"
    main(
        [
            "--config",
            str(config),
            "train",
            "--baskets",
            str(synth_baskets),
            "--max-iter",
            "1",
            "--out",
            str(model),
        ]
    )
    capsys.readouterr()
    payload = json.loads(model.read_text())
    assert payload["training_config"]["max_iterations"] == 1


def test_config_rejects_unknown_keys(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("nonsense=1\n")
    with pytest.raises(SystemExit):
        read_config(str(config))


def test_xor_synth_sidecar(tmp_path, capsys):
    out = tmp_path / "xor.txt"
    main(["synth", "--kind", "xor", "--n", "12", "--count", "60", "--seed", "4", "--out", str(out)])
    capsys.readouterr()
    truth = json.loads((tmp_path / "xor.txt.truth.json").read_text())
    assert truth["kind"] == "xor"
    assert len(truth["attributes"]) == 12
