import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from transientpy.errors import (
    DataError,
    DegenerateLabels,
    LabelError,
    MissingLabel,
    ShapeError,
)
from transientpy.io.ingest import CLASS_NAMES, Dataset
from transientpy.nn.lstm import predict
from transientpy.nn.params import ModelParams
from transientpy.preprocess.pipeline import PreprocessConfig, preprocess_dataset

logger = logging.getLogger(__name__)


class CurveKind(Enum):
    ROC = "roc"
    PR = "pr"


@dataclass(frozen=True, eq=False)
class CurvePoints:
    """
    One-vs-rest curve of a single class.

    Attributes:
        kind (CurveKind): ROC (x = false-positive rate, y = true-positive rate) or
            PR (x = recall, y = precision).
        class_index (int): Class scored against the rest.
        x (np.ndarray): Non-decreasing x coordinates.
        y (np.ndarray): y coordinates.
        thresholds (np.ndarray): Score threshold of each point; the anchor point has
            threshold +inf.
    """

    kind: CurveKind
    class_index: int
    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist(), strict=True))

    def __len__(self) -> int:
        return self.x.size


def curve_points(
    scores: Iterable[float],
    positives: Iterable[bool],
    kind: CurveKind | str,
    class_index: int = 0,
) -> CurvePoints:
    """
    ROC or precision-recall curve from scores and binary labels.

    Thresholds sweep the distinct score values in descending order; an object is
    called positive when its score is >= the threshold, so tied scores always move
    together. Counts are exact cumulative sums.

    Args:
        scores (Iterable[float]): Score per object; higher means more positive.
        positives (Iterable[bool]): True for objects of the positive class.
        kind (CurveKind | str): "roc" or "pr".
        class_index (int): Stored on the result for bookkeeping.

    Returns:
        CurvePoints: ROC curves start at (0, 0) and end at (1, 1). PR curves start at
            recall 0 with the precision of the highest threshold.

    Raises:
        DegenerateLabels: If there are no positives, or no negatives for ROC.

    Example:
        >>> curve_points([0.9, 0.1], [True, False], "roc").points
        [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    """
    kind = CurveKind(kind)
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.ndim != 1 or scores.shape != positives.shape:
        msg = f"Scores {scores.shape} and labels {positives.shape} must be equal-length vectors."
        raise ShapeError(msg)

    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0:
        msg = f"Class {class_index} has no positive examples."
        raise DegenerateLabels(msg)
    if kind is CurveKind.ROC and n_neg == 0:
        msg = f"Class {class_index} has no negative examples; ROC is undefined."
        raise DegenerateLabels(msg)

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    # last position of every run of equal scores
    ends = np.r_[np.flatnonzero(sorted_scores[1:] != sorted_scores[:-1]), scores.size - 1]
    tp = np.cumsum(positives[order])[ends].astype(np.float64)
    fp = (ends + 1) - tp
    thresholds = np.r_[np.inf, sorted_scores[ends]]

    if kind is CurveKind.ROC:
        x = np.r_[0.0, fp / n_neg]
        y = np.r_[0.0, tp / n_pos]
    else:
        precision = tp / (tp + fp)
        x = np.r_[0.0, tp / n_pos]
        y = np.r_[precision[0], precision]
    return CurvePoints(kind=kind, class_index=class_index, x=x, y=y, thresholds=thresholds)


def auc_trapezoid(c: CurvePoints) -> float:
    """
    Trapezoidal area under a curve.

    Example:
        >>> auc_trapezoid(curve_points([0.1, 0.4, 0.35, 0.8], [False, False, True, True], "roc"))
        0.75
    """
    x = np.asarray(c.x, dtype=np.float64)
    y = np.asarray(c.y, dtype=np.float64)
    return float(np.sum(np.diff(x) * (y[:-1] + y[1:]) / 2.0))


def predicted_classes(probs: np.ndarray) -> np.ndarray:
    """Argmax per row; ties resolve to the lowest class index."""
    return np.argmax(np.asarray(probs), axis=1)


def confusion_matrix(probs: np.ndarray, labels: Iterable[int]) -> np.ndarray:
    """
    Confusion counts with rows = true class and columns = predicted class.

    Raises:
        LabelError: If a label lies outside 0-4.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] != labels.size:
        msg = f"Expected ({labels.size}, C) probabilities, got {probs.shape}."
        raise ShapeError(msg)
    n_classes = probs.shape[1]
    bad = (labels < 0) | (labels >= n_classes) | (labels != np.round(labels))
    if bad.any():
        msg = f"Labels must be integers in 0-{n_classes - 1}, got {labels[bad][0]}."
        raise LabelError(msg)

    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (labels.astype(np.int64), predicted_classes(probs)), 1)
    return matrix


def _safe_auc(
    scores: np.ndarray, positives: np.ndarray, kind: CurveKind, class_index: int
) -> tuple[float, CurvePoints | None]:
    try:
        curve = curve_points(scores, positives, kind, class_index)
    except DegenerateLabels as err:
        logger.warning(f"Unable to compute {kind.value} AUC for {CLASS_NAMES[class_index]}: {err}")
        return math.nan, None
    return auc_trapezoid(curve), curve


@dataclass
class EvalReport:
    """
    Evaluation of a model on one (possibly horizon-truncated) test set.

    AUCs of classes whose one-vs-rest labels are degenerate are NaN.
    """

    auc_roc: tuple[float, ...]
    auc_pr: tuple[float, ...]
    confusion: np.ndarray
    n_objects: int
    horizon_days: float | None = None
    n_dropped: int = 0
    curves: list[CurvePoints] = field(default_factory=list, repr=False)
    object_ids: tuple[int, ...] = field(default_factory=tuple, repr=False)
    probabilities: np.ndarray | None = field(default=None, repr=False)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.confusion.sum(axis=1))

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.n_objects)

    @property
    def macro_auc_roc(self) -> float:
        finite = [a for a in self.auc_roc if not math.isnan(a)]
        return float(np.mean(finite)) if finite else math.nan

    @property
    def predicted_fraction(self) -> tuple[float, ...]:
        return tuple(float(f) for f in self.confusion.sum(axis=0) / self.n_objects)

    def to_dict(self) -> dict[str, Any]:
        return {
            "horizon_days": self.horizon_days,
            "n_objects": self.n_objects,
            "n_dropped": self.n_dropped,
            "class_names": list(CLASS_NAMES),
            "counts": list(self.counts),
            "accuracy": self.accuracy,
            "macro_auc_roc": self.macro_auc_roc,
            "auc_roc": list(self.auc_roc),
            "auc_pr": list(self.auc_pr),
            "confusion": self.confusion.tolist(),
            "predicted_fraction": list(self.predicted_fraction),
        }


def evaluate_predictions(
    probs: np.ndarray,
    labels: np.ndarray,
    horizon_days: float | None = None,
    n_dropped: int = 0,
) -> EvalReport:
    """Build a report from precomputed probabilities and integer labels."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    confusion = confusion_matrix(probs, labels)

    auc_roc, auc_pr, curves = [], [], []
    for cls in range(probs.shape[1]):
        positives = labels == cls
        for kind, aucs in ((CurveKind.ROC, auc_roc), (CurveKind.PR, auc_pr)):
            auc, curve = _safe_auc(probs[:, cls], positives, kind, cls)
            aucs.append(auc)
            if curve is not None:
                curves.append(curve)

    return EvalReport(
        auc_roc=tuple(auc_roc),
        auc_pr=tuple(auc_pr),
        confusion=confusion,
        n_objects=int(labels.size),
        horizon_days=horizon_days,
        n_dropped=n_dropped,
        curves=curves,
        probabilities=probs,
    )


def evaluate(
    model: ModelParams,
    test_set: Dataset,
    horizon_days: float | None = None,
    config: PreprocessConfig | None = None,
) -> EvalReport:
    """
    Evaluate a model on a labeled test set, optionally truncated to a horizon.

    The test set is preprocessed (objects without a detection are dropped when a
    horizon is given), classified, and scored with per-class one-vs-rest ROC and PR
    curves plus the confusion matrix.

    Args:
        model (ModelParams): Trained weights.
        test_set (Dataset): Labeled objects.
        horizon_days (float | None): Days after the first detection to keep.
        config (PreprocessConfig | None): Preprocessing used at training time.

    Returns:
        EvalReport: AUCs, confusion matrix, curves and bookkeeping.

    Raises:
        MissingLabel: If an object is unlabeled.
        DataError: If no object is left after preprocessing.
    """
    seqs, summary = preprocess_dataset(test_set, horizon_days=horizon_days, config=config)
    if not seqs:
        msg = f"No objects left to evaluate at horizon {horizon_days}."
        raise DataError(msg)
    for seq in seqs:
        if seq.label is None:
            msg = f"Object {seq.object_id} has no label; evaluation needs labels."
            raise MissingLabel(msg)

    probs = predict(model, seqs)
    labels = np.array([seq.label for seq in seqs], dtype=np.int64)
    report = evaluate_predictions(
        probs, labels, horizon_days=summary.horizon_days, n_dropped=summary.n_dropped
    )
    report.object_ids = tuple(seq.object_id for seq in seqs)
    logger.info(
        f"Evaluated {report.n_objects} objects (horizon={horizon_days}, dropped="
        f"{report.n_dropped}): accuracy={report.accuracy:.4f}, "
        f"macro ROC AUC={report.macro_auc_roc:.4f}"
    )
    return report


def evaluate_horizons(
    model: ModelParams,
    test_set: Dataset,
    horizons: Iterable[float | None],
    config: PreprocessConfig | None = None,
) -> dict[float | None, EvalReport]:
    """Evaluate the same test set at several horizons (None = full curves)."""
    return {h: evaluate(model, test_set, h, config) for h in horizons}
