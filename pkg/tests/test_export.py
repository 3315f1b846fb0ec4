import json
import math

import numpy as np
import pandas as pd

from transientpy.io.export import (
    PROBABILITY_COLUMNS,
    dumps,
    write_curves,
    write_history,
    write_probabilities,
    write_report,
    write_sequences,
)
from transientpy.io.ingest import parse_table
from transientpy.nn.trainer import EpochRecord, TrainHistory
from transientpy.preprocess.pipeline import preprocess_dataset
from transientpy.stats.metrics import evaluate_predictions


def test_dumps_replaces_non_finite():
    text = dumps({"a": math.nan, "b": [np.float64(1.5), math.inf], "c": np.int64(3)})
    assert json.loads(text) == {"a": None, "b": [1.5, None], "c": 3}


def test_probability_columns():
    assert PROBABILITY_COLUMNS == (
        "p_s_like",
        "p_fast",
        "p_long",
        "p_periodic",
        "p_non_periodic",
    )


def test_write_probabilities(tmp_path):
    path = tmp_path / "probs.csv"
    probs = np.array([[0.2] * 5, [1 / 3, 1 / 6, 1 / 6, 1 / 6, 1 / 6]])
    write_probabilities([615, 713], probs, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "object_id,p_s_like,p_fast,p_long,p_periodic,p_non_periodic"
    assert lines[1] == "615,0.2,0.2,0.2,0.2,0.2"
    assert lines[2] == "713,0.333333333,0.166666667,0.166666667,0.166666667,0.166666667"


def _report():
    probs = np.array([[0.6, 0.4, 0, 0, 0], [0.3, 0.7, 0, 0, 0], [0.5, 0.5, 0, 0, 0]])
    return evaluate_predictions(probs, np.array([0, 1, 0]), horizon_days=10.0)


def test_write_report(tmp_path):
    path = tmp_path / "report.json"
    write_report(_report(), path)
    data = json.loads(path.read_text())
    assert data["horizon_days"] == 10.0
    assert data["counts"] == [2, 1, 0, 0, 0]
    assert data["auc_roc"][2] is None


def test_write_curves(tmp_path):
    path = tmp_path / "curves.csv"
    report = _report()
    write_curves(report.curves, path)
    df = pd.read_csv(path)
    assert list(df.columns) == ["class", "kind", "threshold", "x", "y"]
    assert set(df["class"]) == {"S-Like", "Fast"}
    assert set(df["kind"]) == {"roc", "pr"}
    assert len(df) == sum(len(c) for c in report.curves)


def test_write_history(tmp_path):
    history = TrainHistory(
        records=[EpochRecord(1, 1.5, 1.4, 0.5), EpochRecord(2, 1.2, 1.3, 0.6)], best_epoch=2
    )
    path = tmp_path / "history.jsonl"
    write_history(history, path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows[1] == {"epoch": 2, "train_loss": 1.2, "val_loss": 1.3, "val_acc": 0.6}


def test_write_sequences(tmp_path, table_bytes):
    seqs, _ = preprocess_dataset(parse_table(table_bytes))
    path = tmp_path / "seqs.parquet"
    write_sequences(seqs, path)
    df = pd.read_parquet(path)
    assert len(df) == 6 * 352
    assert df["mask"].sum() == 6
    first = df[df["object_id"] == 615].iloc[0]
    assert first["flux_err"] == 3.623
    assert first["label"] == 3
