import logging
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from transientpy.errors import ConfigError, NoDetection
from transientpy.io.ingest import Dataset, LightCurve
from transientpy.preprocess.ops import (
    PAD_VALUE,
    SEQUENCE_LENGTH,
    PreprocessedSequence,
    normalize_flux,
    pad_and_mask,
    rescale_time,
    truncate_after_detection,
)

logger = logging.getLogger(__name__)

DEFAULT_TIME_SCALE = 100.0


@dataclass(frozen=True)
class PreprocessConfig:
    """
    Settings shared by training, evaluation and prediction.

    Attributes:
        target_len (int): Padded sequence length. Defaults to 352.
        time_scale (float): Divisor for the rescaled time column, in days. Defaults
            to 100.0, which keeps survey-long curves (about 1000 days) at LSTM inputs
            of order one; 1.0 feeds raw days.
        horizon_days (float | None): Keep only measurements up to this many days
            after the first detection. None keeps the full curve.
        pad_value (float): Fill value for padded rows. Defaults to 0.0.
    """

    target_len: int = SEQUENCE_LENGTH
    time_scale: float = DEFAULT_TIME_SCALE
    horizon_days: float | None = None
    pad_value: float = PAD_VALUE

    def __post_init__(self):
        if self.target_len < 1:
            msg = f"target_len must be >= 1, got {self.target_len}."
            raise ConfigError(msg)
        if not self.time_scale > 0:
            msg = f"time_scale must be > 0, got {self.time_scale}."
            raise ConfigError(msg)
        if self.horizon_days is not None and not self.horizon_days > 0:
            msg = f"horizon_days must be > 0, got {self.horizon_days}."
            raise ConfigError(msg)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PreprocessSummary:
    """Bookkeeping of a `preprocess_dataset` run."""

    n_input: int
    n_output: int
    horizon_days: float | None
    dropped: tuple[int, ...] = field(default_factory=tuple)

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)


def preprocess_curve(lc: LightCurve, config: PreprocessConfig) -> PreprocessedSequence:
    """Run the full per-object pipeline: truncate, rescale, normalize, pad."""
    if config.horizon_days is not None:
        lc = truncate_after_detection(lc, config.horizon_days)
    lc = normalize_flux(rescale_time(lc))
    return pad_and_mask(
        lc,
        target_len=config.target_len,
        time_scale=config.time_scale,
        pad_value=config.pad_value,
    )


def preprocess_dataset(
    d: Dataset,
    horizon_days: float | None = None,
    config: PreprocessConfig | None = None,
) -> tuple[list[PreprocessedSequence], PreprocessSummary]:
    """
    Preprocess every object of a dataset into masked fixed-shape sequences.

    Objects without any detection cannot be truncated and are dropped when a horizon
    is set; they are listed in the returned summary. Objects longer than the target
    length raise.

    Args:
        d (Dataset): Dataset to preprocess.
        horizon_days (float | None): Optional truncation horizon; overrides the
            config's horizon when given.
        config (PreprocessConfig | None): Preprocessing settings. Defaults to
            `PreprocessConfig()`.

    Returns:
        tuple[list[PreprocessedSequence], PreprocessSummary]: Sequences in dataset
            order and a summary of dropped objects.

    Raises:
        SequenceTooLong: If an object has more measurements than `target_len`.
    """
    if config is None:
        config = PreprocessConfig()
    if horizon_days is not None:
        config = PreprocessConfig(
            target_len=config.target_len,
            time_scale=config.time_scale,
            horizon_days=horizon_days,
            pad_value=config.pad_value,
        )

    sequences = []
    dropped = []
    for curve in d:
        try:
            sequences.append(preprocess_curve(curve, config))
        except NoDetection:
            dropped.append(curve.object_id)

    if dropped:
        preview = ", ".join(str(i) for i in dropped[:10])
        more = " ..." if len(dropped) > 10 else ""
        logger.warning(
            f"Dropped {len(dropped)} of {len(d)} objects without a detection "
            f"(horizon={config.horizon_days}): {preview}{more}"
        )

    summary = PreprocessSummary(
        n_input=len(d),
        n_output=len(sequences),
        horizon_days=config.horizon_days,
        dropped=tuple(dropped),
    )
    return sequences, summary


def stack_sequences(
    seqs: list[PreprocessedSequence],
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """
    Stack sequences into batch arrays.

    Returns:
        tuple: (features (N, T, 5), mask (N, T), labels (N, 5) or None when any
            sequence is unlabeled).
    """
    features = np.stack([s.features for s in seqs])
    mask = np.stack([s.mask for s in seqs])
    if any(s.label_onehot is None for s in seqs):
        return features, mask, None
    labels = np.stack([s.label_onehot for s in seqs])
    return features, mask, labels
