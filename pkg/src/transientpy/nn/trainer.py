import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from tqdm import tqdm

from transientpy.errors import ConfigError, MissingLabel, ShapeError, TrainingDiverged
from transientpy.io.ingest import N_CLASSES, Dataset
from transientpy.nn.lstm import backward_batch, forward_batch, predict
from transientpy.nn.params import ModelParams, initialize_params
from transientpy.preprocess.ops import PreprocessedSequence
from transientpy.preprocess.pipeline import (
    PreprocessConfig,
    preprocess_dataset,
    stack_sequences,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    Training hyperparameters.

    Attributes:
        max_epochs (int): Upper bound on epochs. Defaults to 50.
        batch_size (int): Mini-batch size; the last partial batch is kept.
            Defaults to 32.
        learning_rate (float): Adam step size. Defaults to 0.001.
        adam_beta1 (float): First-moment decay. Defaults to 0.9.
        adam_beta2 (float): Second-moment decay. Defaults to 0.999.
        adam_epsilon (float): Added to sqrt(v_hat). Defaults to 1e-8.
        patience (int): Epochs without validation improvement before stopping.
            Defaults to 5.
        class_weights (tuple[float, ...] | None): Per-class loss weights, or None
            for an unweighted loss.
        seed (int): Seed for initialization and shuffling.
        hidden_size (int): LSTM hidden size H. Defaults to 64.
        oversample (bool): Resample minority classes up to the majority count each
            epoch. Defaults to False.
    """

    max_epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    patience: int = 5
    class_weights: tuple[float, ...] | None = None
    seed: int = 0
    hidden_size: int = 64
    oversample: bool = False

    def __post_init__(self):
        checks = [
            (self.max_epochs >= 1, f"max_epochs must be >= 1, got {self.max_epochs}"),
            (self.batch_size >= 1, f"batch_size must be >= 1, got {self.batch_size}"),
            (self.learning_rate > 0, f"learning_rate must be > 0, got {self.learning_rate}"),
            (0 < self.adam_beta1 < 1, f"adam_beta1 must be in (0, 1), got {self.adam_beta1}"),
            (0 < self.adam_beta2 < 1, f"adam_beta2 must be in (0, 1), got {self.adam_beta2}"),
            (self.adam_epsilon > 0, f"adam_epsilon must be > 0, got {self.adam_epsilon}"),
            (self.patience >= 1, f"patience must be >= 1, got {self.patience}"),
            (self.seed >= 0, f"seed must be >= 0, got {self.seed}"),
            (self.hidden_size >= 1, f"hidden_size must be >= 1, got {self.hidden_size}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

        if self.class_weights is not None:
            weights = tuple(float(w) for w in self.class_weights)
            if len(weights) != N_CLASSES or not all(
                math.isfinite(w) and w > 0 for w in weights
            ):
                msg = f"class_weights must be {N_CLASSES} positive reals, got {weights}."
                raise ConfigError(msg)
            object.__setattr__(self, "class_weights", weights)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    """
    Per-epoch training record.

    Attributes:
        records (list[EpochRecord]): One entry per completed epoch (1-based epochs).
        best_epoch (int): Epoch with the lowest validation loss (earliest on ties).
        stopped_early (bool): Whether training stopped before `max_epochs`.
    """

    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def best_val_loss(self) -> float:
        return self.records[self.best_epoch - 1].val_loss

    def to_records(self) -> list[dict[str, Any]]:
        return [asdict(r) for r in self.records]


@dataclass
class AdamState:
    """
    Adam moment accumulators shaped like the model parameters.

    Attributes:
        first_moment (ModelParams): Running mean of gradients.
        second_moment (ModelParams): Running mean of squared gradients.
        step_count (int): Number of updates applied so far.
    """

    first_moment: ModelParams
    second_moment: ModelParams
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), 0)


def cross_entropy_loss(
    probs: np.ndarray,
    labels_onehot: np.ndarray,
    class_weights: Sequence[float] | np.ndarray | None = None,
) -> float:
    """
    Mean categorical cross-entropy, optionally weighted per true class.

    Args:
        probs (np.ndarray): (N, C) predicted probabilities.
        labels_onehot (np.ndarray): (N, C) one-hot labels.
        class_weights (Sequence[float] | None): Optional per-class weights w_c.

    Returns:
        float: mean over examples of -w_c * ln(p_true).

    Example:
        >>> cross_entropy_loss(np.full((1, 5), 0.2), np.eye(5)[:1])
        1.6094379124341003
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels_onehot = np.asarray(labels_onehot, dtype=np.float64)
    if probs.ndim != 2 or probs.shape != labels_onehot.shape:
        msg = f"Probabilities {probs.shape} and labels {labels_onehot.shape} differ in shape."
        raise ShapeError(msg)
    weights = _weights_vector(class_weights, probs.shape[1])
    p_true = np.sum(probs * labels_onehot, axis=1)
    w_true = labels_onehot @ weights
    return float(np.mean(-w_true * np.log(p_true)))


def _weights_vector(class_weights, n_classes: int) -> np.ndarray:
    if class_weights is None:
        return np.ones(n_classes)
    weights = np.asarray(class_weights, dtype=np.float64)
    if weights.shape != (n_classes,):
        msg = f"Expected {n_classes} class weights, got shape {weights.shape}."
        raise ShapeError(msg)
    return weights


def balanced_class_weights(labels: Sequence[int] | np.ndarray) -> tuple[float, ...]:
    """
    The "balanced" heuristic w_c = N / (C * N_c).

    Classes absent from `labels` get weight 1.0; they never contribute to the loss.
    """
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=N_CLASSES)
    total = labels.size
    return tuple(
        float(total / (N_CLASSES * n)) if n > 0 else 1.0 for n in counts.tolist()
    )


def _require_labels(batch: Sequence[PreprocessedSequence]) -> None:
    for seq in batch:
        if seq.label_onehot is None:
            msg = f"Object {seq.object_id} has no label."
            raise MissingLabel(msg)


def batch_loss_and_gradients(
    model: ModelParams,
    x: np.ndarray,
    mask: np.ndarray,
    labels_onehot: np.ndarray,
    class_weights: Sequence[float] | None = None,
) -> tuple[float, ModelParams]:
    """Loss and exact BPTT gradients for stacked batch arrays."""
    probs, cache = forward_batch(model, x, mask)
    loss = cross_entropy_loss(probs, labels_onehot, class_weights)
    weights = _weights_vector(class_weights, probs.shape[1])
    w_true = labels_onehot @ weights
    d_logits = w_true[:, None] * (probs - labels_onehot) / probs.shape[0]
    return loss, backward_batch(model, cache, d_logits)


def loss_and_gradients(
    model: ModelParams,
    batch: Sequence[PreprocessedSequence],
    weights: Sequence[float] | None = None,
) -> tuple[float, ModelParams]:
    """Loss and gradients of the mean (optionally weighted) cross-entropy of a batch."""
    if len(batch) == 0:
        msg = "Cannot compute gradients of an empty batch."
        raise ConfigError(msg)
    _require_labels(batch)
    x, mask, labels = stack_sequences(list(batch))
    return batch_loss_and_gradients(model, x, mask, labels, weights)


def compute_gradients(
    model: ModelParams,
    batch: Sequence[PreprocessedSequence],
    weights: Sequence[float] | None = None,
) -> ModelParams:
    """
    Exact gradients of the batch loss w.r.t. every parameter.

    Args:
        model (ModelParams): Current weights.
        batch (Sequence[PreprocessedSequence]): Labeled sequences.
        weights (Sequence[float] | None): Optional class weights.

    Returns:
        ModelParams: Gradients, shaped like the model.

    Raises:
        MissingLabel: If any sequence is unlabeled.
    """
    return loss_and_gradients(model, batch, weights)[1]


def adam_step(
    params: ModelParams, grads: ModelParams, state: AdamState, cfg: TrainConfig
) -> tuple[ModelParams, AdamState]:
    """
    One bias-corrected Adam update, θ ← θ − lr·m̂/(√v̂ + ε).

    Returns new parameter and state objects; the inputs are not modified.
    """
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    lr, eps = cfg.learning_rate, cfg.adam_epsilon
    step = state.step_count + 1

    m = state.first_moment.map(lambda m, g: b1 * m + (1.0 - b1) * g, grads)
    v = state.second_moment.map(lambda v, g: b2 * v + (1.0 - b2) * g * g, grads)
    correction1 = 1.0 - b1**step
    correction2 = 1.0 - b2**step
    updated = params.map(
        lambda p, m_, v_: p - lr * (m_ / correction1) / (np.sqrt(v_ / correction2) + eps),
        m,
        v,
    )
    return updated, AdamState(m, v, step)


def epoch_order(
    labels: np.ndarray, rng: np.random.Generator, oversample: bool = False
) -> np.ndarray:
    """
    Example order for one epoch.

    Without oversampling this is a permutation of all indices. With oversampling,
    every class is topped up (with replacement) to the size of the largest class
    before shuffling.
    """
    if not oversample:
        return rng.permutation(labels.size)

    counts = np.bincount(labels, minlength=N_CLASSES)
    target = counts.max()
    parts = []
    for cls in range(N_CLASSES):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            continue
        parts.append(members)
        if members.size < target:
            parts.append(rng.choice(members, size=target - members.size, replace=True))
    return rng.permutation(np.concatenate(parts))


def _as_sequences(
    data: Dataset | Sequence[PreprocessedSequence],
    preprocess_config: PreprocessConfig | None,
) -> list[PreprocessedSequence]:
    if isinstance(data, Dataset):
        sequences, _ = preprocess_dataset(data, config=preprocess_config)
        return sequences
    return list(data)


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def train(
    train_set: Dataset | Sequence[PreprocessedSequence],
    val_set: Dataset | Sequence[PreprocessedSequence],
    cfg: TrainConfig,
    preprocess_config: PreprocessConfig | None = None,
    progress: bool = False,
) -> tuple[ModelParams, TrainHistory]:
    """
    Train the classifier with Adam and early stopping on validation loss.

    Each epoch shuffles the training set (seeded), runs sequential mini-batches and
    evaluates the (unweighted) validation loss. Training stops after `cfg.patience`
    epochs without improvement and the weights of the best epoch are returned.

    Args:
        train_set (Dataset | Sequence[PreprocessedSequence]): Labeled training data.
        val_set (Dataset | Sequence[PreprocessedSequence]): Labeled validation data.
        cfg (TrainConfig): Hyperparameters.
        preprocess_config (PreprocessConfig | None): Used when datasets are given.
        progress (bool): Show a progress bar over epochs.

    Returns:
        tuple[ModelParams, TrainHistory]: Best-epoch weights and the history.

    Raises:
        ConfigError: If either set is empty.
        MissingLabel: If any example is unlabeled.
        TrainingDiverged: If the validation loss is not finite before any epoch
            has produced a finite one. A later non-finite loss stops training and
            restores the best epoch.
    """
    train_seqs = _as_sequences(train_set, preprocess_config)
    val_seqs = _as_sequences(val_set, preprocess_config)
    if not train_seqs or not val_seqs:
        msg = "Training and validation sets must both be nonempty."
        raise ConfigError(msg)
    _require_labels(train_seqs)
    _require_labels(val_seqs)

    x, mask, y = stack_sequences(train_seqs)
    y_val = np.stack([s.label_onehot for s in val_seqs])
    val_labels = y_val.argmax(axis=1)
    train_labels = y.argmax(axis=1)

    params = initialize_params(cfg.hidden_size, cfg.seed, features=x.shape[2])
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng([cfg.seed, 1])

    logger.info(
        f"Training on {len(train_seqs)} objects, validating on {len(val_seqs)}: "
        f"{cfg.to_dict()}"
    )

    history = TrainHistory()
    best_params = params
    best_loss = math.inf
    since_best = 0

    for epoch in tqdm(range(1, cfg.max_epochs + 1), disable=not progress, desc="epochs"):
        order = epoch_order(train_labels, rng, cfg.oversample)
        total = 0.0
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = batch_loss_and_gradients(
                params, x[idx], mask[idx], y[idx], cfg.class_weights
            )
            params, state = adam_step(params, grads, state, cfg)
            total += loss * idx.size
        train_loss = total / order.size

        val_probs = predict(params, val_seqs)
        val_loss = cross_entropy_loss(val_probs, y_val)
        val_acc = accuracy(val_probs, val_labels)
        history.records.append(EpochRecord(epoch, train_loss, val_loss, val_acc))
        logger.info(
            f"Epoch {epoch}: train_loss={train_loss:.6f} val_loss={val_loss:.6f} "
            f"val_acc={val_acc:.4f}"
        )

        if not math.isfinite(val_loss):
            if history.best_epoch == 0:
                msg = f"Validation loss is {val_loss} at epoch {epoch}; no epoch to restore."
                raise TrainingDiverged(msg)
            history.stopped_early = True
            logger.warning(
                f"Validation loss is {val_loss} at epoch {epoch}; restoring epoch "
                f"{history.best_epoch} (val_loss={best_loss:.6f})."
            )
            break

        if val_loss < best_loss:
            best_loss = val_loss
            best_params = params
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_early = epoch < cfg.max_epochs
                logger.info(
                    f"Early stopping at epoch {epoch}; restoring epoch "
                    f"{history.best_epoch} (val_loss={best_loss:.6f})."
                )
                break

    if not params.is_finite():
        logger.warning("Non-finite parameters encountered during training.")
    return best_params, history
