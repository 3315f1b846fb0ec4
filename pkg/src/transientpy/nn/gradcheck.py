"""Finite-difference verification of the analytic BPTT gradients."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from transientpy.io.ingest import N_CLASSES
from transientpy.nn.lstm import forward_batch
from transientpy.nn.params import ModelParams, initialize_params
from transientpy.nn.trainer import batch_loss_and_gradients, cross_entropy_loss
from transientpy.preprocess.ops import N_FEATURES

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
# denominators below this are clamped, so near-zero gradients are judged absolutely
RELATIVE_ERROR_FLOOR = 1e-3


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_parameter: str
    n_params: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a| + |n|, floor), elementwise."""
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), RELATIVE_ERROR_FLOOR)
    return np.abs(analytic - numeric) / scale


def random_problem(
    rng: np.random.Generator, batch: int, length: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random post-padded inputs with varying valid lengths and random labels."""
    x = rng.normal(size=(batch, length, N_FEATURES))
    lengths = rng.integers(1, length + 1, size=batch)
    lengths[0] = length
    mask = np.arange(length)[None, :] < lengths[:, None]
    x[~mask] = 0.0
    labels = np.eye(N_CLASSES)[rng.integers(0, N_CLASSES, size=batch)]
    return x, mask, labels


def check_gradients(
    seed: int = 0,
    hidden: int = 8,
    length: int = 12,
    batch: int = 4,
    step: float = 1e-5,
    tolerance: float = DEFAULT_TOLERANCE,
    class_weights: Sequence[float] | None = None,
    progress: bool = False,
) -> GradCheckResult:
    """
    Compare analytic gradients with central finite differences for every parameter.

    The model is a freshly initialized network whose weights and biases are jittered,
    so no parameter sits at a symmetric point; inputs, masks and labels are random.

    Args:
        seed (int): Seed for the model and the random batch.
        hidden (int): Hidden size of the small test model.
        length (int): Sequence length.
        batch (int): Number of sequences.
        step (float): Finite-difference step.
        tolerance (float): Largest acceptable relative error.
        class_weights (Sequence[float] | None): Optional loss weights.
        progress (bool): Show a progress bar over parameters.

    Returns:
        GradCheckResult: Maximum relative error and where it occurred.
    """
    rng = np.random.default_rng(seed)
    model = initialize_params(hidden, seed)
    model = model.map(lambda a: a + rng.normal(0.0, 0.1, size=a.shape))
    x, mask, labels = random_problem(rng, batch, length)

    _, grads = batch_loss_and_gradients(model, x, mask, labels, class_weights)
    analytic = grads.flat()

    def loss_at(theta: np.ndarray) -> float:
        params = ModelParams.from_flat(theta, hidden)
        probs, _ = forward_batch(params, x, mask)
        return cross_entropy_loss(probs, labels, class_weights)

    theta = model.flat()
    numeric = np.empty_like(theta)
    for k in tqdm(range(theta.size), disable=not progress, desc="parameters"):
        original = theta[k]
        theta[k] = original + step
        plus = loss_at(theta)
        theta[k] = original - step
        minus = loss_at(theta)
        theta[k] = original
        numeric[k] = (plus - minus) / (2.0 * step)

    errors = relative_error(analytic, numeric)
    names = [name for name, arr in model.tensors() for _ in range(arr.size)]
    worst = int(np.argmax(errors))
    result = GradCheckResult(
        max_rel_error=float(errors[worst]),
        worst_parameter=names[worst],
        n_params=theta.size,
        tolerance=tolerance,
    )
    logger.info(
        f"Gradient check over {result.n_params} parameters: max relative error "
        f"{result.max_rel_error:.3e} at {result.worst_parameter}"
    )
    return result
