from dataclasses import dataclass, replace

import numpy as np

from transientpy.errors import ConfigError, NoDetection, SequenceTooLong
from transientpy.io.ingest import N_CLASSES, LightCurve

SEQUENCE_LENGTH = 352
# column order of the feature matrix, matching the input table
FEATURES: tuple[str, ...] = ("flux", "flux_err", "time", "passband", "detected")
N_FEATURES = len(FEATURES)
PAD_VALUE = 0.0


@dataclass(frozen=True, eq=False)
class PreprocessedSequence:
    """
    Fixed-shape, post-padded model input for one object.

    Attributes:
        features (np.ndarray): (target_len, 5) float64 matrix with columns
            (flux, flux_err, time, passband, detected).
        mask (np.ndarray): (target_len,) bool vector, True on the leading rows that
            hold real measurements.
        label_onehot (np.ndarray | None): (5,) one-hot generalized class, or None.
        object_id (int): Object identifier.
    """

    features: np.ndarray
    mask: np.ndarray
    label_onehot: np.ndarray | None
    object_id: int

    @property
    def length(self) -> int:
        """Number of valid (unmasked) rows."""
        return int(self.mask.sum())

    @property
    def label(self) -> int | None:
        if self.label_onehot is None:
            return None
        return int(np.argmax(self.label_onehot))


def one_hot(label: int, n_classes: int = N_CLASSES) -> np.ndarray:
    out = np.zeros(n_classes, dtype=np.float64)
    out[label] = 1.0
    return out


def rescale_time(lc: LightCurve) -> LightCurve:
    """
    Shift times so that the first measurement is at day zero.

    Example:
        >>> lc = LightCurve(615, [59750.4, 59798.3], [1.0, 2.0], [0.1, 0.1], [2, 2], [1, 0])
        >>> rescale_time(lc).time.round(1).tolist()
        [0.0, 47.9]
    """
    return replace(lc, time=lc.time - lc.time[0])


def normalize_flux(lc: LightCurve) -> LightCurve:
    """
    Min-max normalize the flux of one object to [0, 1].

    The flux error is divided by the same range so the per-measurement
    signal-to-noise ratio is unchanged. A constant flux maps to 0.5 and keeps its
    errors as they are.
    """
    f_min = lc.flux.min()
    f_max = lc.flux.max()
    span = f_max - f_min
    if span == 0:
        return replace(lc, flux=np.full_like(lc.flux, 0.5))
    return replace(lc, flux=(lc.flux - f_min) / span, flux_err=lc.flux_err / span)


def first_detection_time(lc: LightCurve) -> float:
    """Time of the first measurement flagged as detected."""
    hits = np.flatnonzero(lc.detected == 1)
    if hits.size == 0:
        raise NoDetection(lc.object_id)
    return float(lc.time[hits[0]])


def truncate_after_detection(lc: LightCurve, horizon_days: float) -> LightCurve:
    """
    Keep the measurements taken up to `horizon_days` after the first detection.

    Everything before the first detection is kept as well; only the tail beyond
    t_detect + horizon_days is dropped. Must be applied to raw (un-rescaled) times.

    Args:
        lc (LightCurve): Light curve with raw times.
        horizon_days (float): Days after the first detection to keep (> 0).

    Returns:
        LightCurve: The truncated curve (always contains the first detection).

    Raises:
        ConfigError: If horizon_days is not positive.
        NoDetection: If the curve has no detected measurement.
    """
    if not horizon_days > 0:
        msg = f"horizon_days must be > 0, got {horizon_days}."
        raise ConfigError(msg)
    t_detect = first_detection_time(lc)
    keep = lc.time <= t_detect + horizon_days
    if keep.all():
        return lc
    return replace(
        lc,
        time=lc.time[keep],
        flux=lc.flux[keep],
        flux_err=lc.flux_err[keep],
        passband=lc.passband[keep],
        detected=lc.detected[keep],
    )


def pad_and_mask(
    lc: LightCurve,
    target_len: int = SEQUENCE_LENGTH,
    time_scale: float = 1.0,
    pad_value: float = PAD_VALUE,
) -> PreprocessedSequence:
    """
    Lay a (rescaled, normalized) curve out as a fixed-size masked feature matrix.

    Args:
        lc (LightCurve): Curve that has already been rescaled and normalized.
        target_len (int): Number of rows of the output matrix.
        time_scale (float): Divisor applied to the time column.
        pad_value (float): Value written into every column of padded rows.

    Returns:
        PreprocessedSequence: Features, mask, optional one-hot label and object id.

    Raises:
        SequenceTooLong: If the curve has more than `target_len` measurements.
    """
    n = len(lc)
    if n > target_len:
        raise SequenceTooLong(n, target_len, lc.object_id)

    features = np.full((target_len, N_FEATURES), pad_value, dtype=np.float64)
    features[:n, 0] = lc.flux
    features[:n, 1] = lc.flux_err
    features[:n, 2] = lc.time / time_scale if time_scale != 1.0 else lc.time
    features[:n, 3] = lc.passband
    features[:n, 4] = lc.detected
    mask = np.zeros(target_len, dtype=bool)
    mask[:n] = True

    label = lc.generalized_class
    return PreprocessedSequence(
        features=features,
        mask=mask,
        label_onehot=None if label is None else one_hot(label),
        object_id=lc.object_id,
    )
