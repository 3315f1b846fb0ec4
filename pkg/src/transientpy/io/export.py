import json
import logging
import math
import pathlib
from collections.abc import Iterable, Sequence
from typing import TYPE_CHECKING, Any

import fsspec
import numpy as np
import pandas as pd

from transientpy.io.ingest import CLASS_NAMES
from transientpy.preprocess.ops import FEATURES, PreprocessedSequence

if TYPE_CHECKING:
    from transientpy.nn.trainer import TrainHistory
    from transientpy.stats.metrics import CurvePoints, EvalReport

logger = logging.getLogger(__name__)

PROBABILITY_COLUMNS = tuple(
    "p_" + name.lower().replace("-", "_") for name in CLASS_NAMES
)
PROBABILITY_FORMAT = "%.9g"


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values and replace NaN/inf with None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj: Any, indent: int | None = 2) -> str:
    """JSON text with non-finite floats written as null."""
    return json.dumps(to_jsonable(obj), indent=indent, allow_nan=False)


def _write_text(text: str, urlpath: str | pathlib.Path, storage_options) -> None:
    if storage_options is None:
        storage_options = {}
    with fsspec.open(str(urlpath), mode="w", **storage_options) as f:
        f.write(text)


def write_json(
    obj: Any,
    urlpath: str | pathlib.Path,
    storage_options: dict[str, Any] | None = None,
) -> None:
    _write_text(dumps(obj) + "\n", urlpath, storage_options)


def write_report(
    report: "EvalReport",
    urlpath: str | pathlib.Path,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """Write an evaluation report as JSON; undefined AUCs become null."""
    write_json(report.to_dict(), urlpath, storage_options)
    logger.info(f"Wrote report to {urlpath}.")


def curves_frame(curves: Iterable["CurvePoints"]) -> pd.DataFrame:
    frames = [
        pd.DataFrame(
            {
                "class": CLASS_NAMES[c.class_index],
                "kind": c.kind.value,
                "threshold": c.thresholds,
                "x": c.x,
                "y": c.y,
            }
        )
        for c in curves
    ]
    if not frames:
        return pd.DataFrame(columns=["class", "kind", "threshold", "x", "y"])
    return pd.concat(frames, ignore_index=True)


def write_curves(
    curves: Iterable["CurvePoints"],
    urlpath: str | pathlib.Path,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """Write ROC/PR points as CSV with columns class, kind, threshold, x, y."""
    _write_text(curves_frame(curves).to_csv(index=False), urlpath, storage_options)
    logger.info(f"Wrote curves to {urlpath}.")


def probabilities_frame(object_ids: Sequence[int], probs: np.ndarray) -> pd.DataFrame:
    df = pd.DataFrame(np.asarray(probs), columns=list(PROBABILITY_COLUMNS))
    df.insert(0, "object_id", np.asarray(object_ids, dtype=np.int64))
    return df


def write_probabilities(
    object_ids: Sequence[int],
    probs: np.ndarray,
    urlpath: str | pathlib.Path,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """Write class probabilities per object with 9 significant digits."""
    df = probabilities_frame(object_ids, probs)
    text = df.to_csv(index=False, float_format=PROBABILITY_FORMAT)
    _write_text(text, urlpath, storage_options)
    logger.info(f"Wrote probabilities of {len(df)} objects to {urlpath}.")


def write_history(
    history: "TrainHistory",
    urlpath: str | pathlib.Path,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """Write one JSON record per epoch (epoch, train_loss, val_loss, val_acc)."""
    lines = [dumps(record, indent=None) for record in history.to_records()]
    _write_text("".join(line + "\n" for line in lines), urlpath, storage_options)


def sequences_frame(seqs: Sequence[PreprocessedSequence]) -> pd.DataFrame:
    """Long table with one row per (object, step), padded steps included."""
    if not seqs:
        columns = ["object_id", "step", *FEATURES, "mask", "label"]
        return pd.DataFrame(columns=columns)
    target_len = seqs[0].mask.size
    features = np.concatenate([s.features for s in seqs])
    df = pd.DataFrame(features, columns=list(FEATURES))
    df.insert(0, "object_id", np.repeat([s.object_id for s in seqs], target_len))
    df.insert(1, "step", np.tile(np.arange(target_len), len(seqs)))
    df["mask"] = np.concatenate([s.mask for s in seqs])
    labels = [s.label for s in seqs]
    df["label"] = pd.array(np.repeat(labels, target_len).tolist(), dtype="Int64")
    return df


def write_sequences(
    seqs: Sequence[PreprocessedSequence],
    urlpath: str | pathlib.Path,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """Write preprocessed sequences to a Parquet file."""
    if storage_options is None:
        storage_options = {}
    df = sequences_frame(seqs)
    with fsspec.open(str(urlpath), mode="wb", **storage_options) as f:
        df.to_parquet(f, engine="pyarrow", index=False)
    logger.info(f"Wrote {len(seqs)} preprocessed sequences ({len(df)} rows) to {urlpath}.")
