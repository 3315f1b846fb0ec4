"""Forward computation of the bidirectional LSTM classifier, plus BPTT kernels.

The network is: masked bidirectional LSTM -> masked global max pooling over time
-> dense layer -> softmax over the five generalized classes.

Masked timesteps are skipped: the recurrent state passes through unchanged and the
emitted hidden row is never pooled. Because sequences are post-padded, the trailing
all-masked rows of a batch cannot influence anything, so every kernel trims the
time axis to the last valid row before scanning.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from transientpy.errors import EmptySequence, ShapeError
from transientpy.nn.params import LstmCellParams, ModelParams
from transientpy.preprocess.ops import PreprocessedSequence


def _activate(z: np.ndarray, hidden: int):
    i = expit(z[..., :hidden])
    f = expit(z[..., hidden : 2 * hidden])
    g = np.tanh(z[..., 2 * hidden : 3 * hidden])
    o = expit(z[..., 3 * hidden :])
    return i, f, g, o


def _flat_weights(cell: LstmCellParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hidden, features = cell.hidden_size, cell.input_size
    return (
        cell.W.reshape(4 * hidden, features),
        cell.U.reshape(4 * hidden, hidden),
        cell.b.reshape(4 * hidden),
    )


def lstm_cell_step(
    x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, p: LstmCellParams
) -> tuple[np.ndarray, np.ndarray]:
    """
    Advance one LSTM cell by a single timestep.

    i = σ(W_i x + U_i h + b_i), f = σ(W_f x + U_f h + b_f), g = tanh(W_g x + U_g h + b_g),
    o = σ(W_o x + U_o h + b_o), c' = f ⊙ c + i ⊙ g, h' = o ⊙ tanh(c').

    Args:
        x (np.ndarray): Input, (F,) or batched (B, F).
        h_prev (np.ndarray): Previous hidden state, (H,) or (B, H).
        c_prev (np.ndarray): Previous cell state, (H,) or (B, H).
        p (LstmCellParams): Cell weights.

    Returns:
        tuple[np.ndarray, np.ndarray]: New (h, c).

    Raises:
        ShapeError: If the dimensions do not match the cell.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    hidden = p.hidden_size
    if x.shape[-1] != p.input_size:
        msg = f"Input has {x.shape[-1]} features, cell expects {p.input_size}."
        raise ShapeError(msg)
    if h_prev.shape[-1] != hidden or c_prev.shape != h_prev.shape:
        msg = f"State shapes {h_prev.shape}/{c_prev.shape} do not match hidden size {hidden}."
        raise ShapeError(msg)
    if x.shape[:-1] != h_prev.shape[:-1]:
        msg = f"Batch shapes differ: input {x.shape}, state {h_prev.shape}."
        raise ShapeError(msg)

    W, U, b = _flat_weights(p)
    z = x @ W.T + h_prev @ U.T + b
    i, f, g, o = _activate(z, hidden)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


@dataclass
class ScanCache:
    """Per-timestep values of one direction, kept for the backward pass."""

    x: np.ndarray
    mask: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray


def scan(
    x: np.ndarray, mask: np.ndarray, cell: LstmCellParams, keep_cache: bool = False
) -> tuple[np.ndarray, ScanCache | None]:
    """
    Run one LSTM direction over a batch, left to right.

    Args:
        x (np.ndarray): Inputs, (B, T, F).
        mask (np.ndarray): Validity, (B, T) bool.
        cell (LstmCellParams): Cell weights.
        keep_cache (bool): Whether to keep intermediate values for BPTT.

    Returns:
        tuple[np.ndarray, ScanCache | None]: Emitted hidden states (B, T, H), where
            rows at masked steps are meaningless, and the optional cache.
    """
    batch, steps, _ = x.shape
    hidden = cell.hidden_size
    W, U, b = _flat_weights(cell)

    zx = x @ W.T + b
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    out = np.empty((batch, steps, hidden))

    store: dict[str, np.ndarray] = {}
    if keep_cache:
        store = {
            name: np.empty((batch, steps, hidden))
            for name in ("h_prev", "c_prev", "i", "f", "g", "o", "tanh_c")
        }

    for t in range(steps):
        valid = mask[:, t, None]
        z = zx[:, t] + h @ U.T
        i, f, g, o = _activate(z, hidden)
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        if keep_cache:
            store["h_prev"][:, t] = h
            store["c_prev"][:, t] = c
            store["i"][:, t] = i
            store["f"][:, t] = f
            store["g"][:, t] = g
            store["o"][:, t] = o
            store["tanh_c"][:, t] = tanh_c
        out[:, t] = h_new
        h = np.where(valid, h_new, h)
        c = np.where(valid, c_new, c)

    cache = ScanCache(x=x, mask=mask, **store) if keep_cache else None
    return out, cache


def scan_backward(
    cache: ScanCache, d_out: np.ndarray, cell: LstmCellParams
) -> LstmCellParams:
    """
    Backpropagate through time for one direction.

    Args:
        cache (ScanCache): Values recorded by `scan`.
        d_out (np.ndarray): Loss gradient w.r.t. the emitted hidden states (B, T, H);
            must be zero at masked steps.
        cell (LstmCellParams): Cell weights used in the forward pass.

    Returns:
        LstmCellParams: Gradients w.r.t. W, U and b.
    """
    batch, steps, features = cache.x.shape
    hidden = cell.hidden_size
    _, U, _ = _flat_weights(cell)

    dW = np.zeros((4 * hidden, features))
    dU = np.zeros((4 * hidden, hidden))
    db = np.zeros(4 * hidden)
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))

    for t in reversed(range(steps)):
        valid = cache.mask[:, t, None]
        i, f, g, o = cache.i[:, t], cache.f[:, t], cache.g[:, t], cache.o[:, t]
        tanh_c = cache.tanh_c[:, t]

        dh_t = dh + d_out[:, t]
        dc_t = dc + dh_t * o * (1.0 - tanh_c**2)
        dz = np.concatenate(
            [
                dc_t * g * i * (1.0 - i),
                dc_t * cache.c_prev[:, t] * f * (1.0 - f),
                dc_t * i * (1.0 - g**2),
                dh_t * tanh_c * o * (1.0 - o),
            ],
            axis=1,
        )
        dz = np.where(valid, dz, 0.0)

        dW += dz.T @ cache.x[:, t]
        dU += dz.T @ cache.h_prev[:, t]
        db += dz.sum(axis=0)
        dh = np.where(valid, dz @ U, dh)
        dc = np.where(valid, dc_t * f, dc)

    return LstmCellParams(
        W=dW.reshape(4, hidden, features),
        U=dU.reshape(4, hidden, hidden),
        b=db.reshape(4, hidden),
    )


def _valid_extent(mask: np.ndarray) -> int:
    """Index one past the last valid step over the whole batch."""
    rows = np.flatnonzero(mask.any(axis=0))
    return int(rows[-1]) + 1 if rows.size else 0


def _check_input(x: np.ndarray, mask: np.ndarray, model: ModelParams) -> None:
    if x.ndim != 3 or x.shape[2] != model.input_size:
        msg = f"Expected inputs of shape (B, T, {model.input_size}), got {x.shape}."
        raise ShapeError(msg)
    if mask.shape != x.shape[:2]:
        msg = f"Mask shape {mask.shape} does not match inputs {x.shape[:2]}."
        raise ShapeError(msg)
    if not mask.any(axis=1).all():
        msg = "Every sequence needs at least one unmasked timestep."
        raise EmptySequence(msg)


def _encode(
    x: np.ndarray, mask: np.ndarray, model: ModelParams, keep_cache: bool = False
) -> tuple[np.ndarray, ScanCache | None, ScanCache | None]:
    """Both directions over a trimmed batch; returns (B, T, 2H) hidden states."""
    h_fwd, cache_fwd = scan(x, mask, model.forward_cell, keep_cache)
    h_bwd, cache_bwd = scan(
        x[:, ::-1], mask[:, ::-1], model.backward_cell, keep_cache
    )
    hidden = np.concatenate([h_fwd, h_bwd[:, ::-1]], axis=2)
    return hidden, cache_fwd, cache_bwd


def bidirectional_encode(seq: PreprocessedSequence, p: ModelParams) -> np.ndarray:
    """
    Encode one sequence with both LSTM directions.

    Both directions start from zero states; the forward pass reads t = 0..T-1 and the
    backward pass t = T-1..0. Output row t is (forward h_t, backward h_t).

    Args:
        seq (PreprocessedSequence): Masked input sequence.
        p (ModelParams): Model weights.

    Returns:
        np.ndarray: (T, 2H) hidden states; rows at masked steps are NaN.

    Raises:
        EmptySequence: If the mask has no valid entry.
    """
    x = np.asarray(seq.features, dtype=np.float64)[None]
    mask = np.asarray(seq.mask, dtype=bool)[None]
    _check_input(x, mask, p)
    extent = _valid_extent(mask)
    hidden, _, _ = _encode(x[:, :extent], mask[:, :extent], p)

    out = np.full((x.shape[1], 2 * p.hidden_size), np.nan)
    rows = mask[0, :extent]
    out[:extent][rows] = hidden[0][rows]
    return out


def masked_global_max_pool(hidden: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    Per-column maximum over the valid rows of a hidden-state matrix.

    Example:
        >>> masked_global_max_pool(np.array([[1.0, -2.0], [9.0, 9.0]]), np.array([True, False]))
        array([ 1., -2.])
    """
    hidden = np.asarray(hidden, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != hidden.shape[:1]:
        msg = f"Mask of shape {mask.shape} does not match {hidden.shape[0]} rows."
        raise ShapeError(msg)
    if not mask.any():
        msg = "Cannot pool a sequence without valid timesteps."
        raise EmptySequence(msg)
    return np.where(mask[:, None], hidden, -np.inf).max(axis=0)


def dense_softmax(v: np.ndarray, p: ModelParams) -> np.ndarray:
    """
    Dense layer followed by a softmax over the classes.

    Args:
        v (np.ndarray): Pooled features, (2H,) or batched (B, 2H).
        p (ModelParams): Model weights.

    Returns:
        np.ndarray: Class probabilities with the same leading shape as `v`.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != p.dense_weights.shape[1]:
        expected = p.dense_weights.shape[1]
        msg = f"Pooled vector has width {v.shape[-1]}, dense layer expects {expected}."
        raise ShapeError(msg)
    logits = v @ p.dense_weights.T + p.dense_bias
    return softmax(logits, axis=-1)


def predict(model: ModelParams, seqs: list[PreprocessedSequence]) -> np.ndarray:
    """
    Class probabilities for each sequence.

    Each sequence is evaluated on its own, so a row never depends on the other
    inputs or on how much padding follows the valid rows.

    Args:
        model (ModelParams): Trained weights.
        seqs (list[PreprocessedSequence]): Sequences to classify.

    Returns:
        np.ndarray: (N, C) probabilities, row i for seqs[i].
    """
    probs = np.empty((len(seqs), model.n_classes))
    for row, seq in enumerate(seqs):
        hidden = bidirectional_encode(seq, model)
        pooled = masked_global_max_pool(hidden, seq.mask)
        probs[row] = dense_softmax(pooled, model)
    return probs


@dataclass
class ForwardCache:
    """Everything `backward_batch` needs from `forward_batch`."""

    pooled: np.ndarray
    argmax: np.ndarray
    steps: int
    fwd: ScanCache
    bwd: ScanCache


def forward_batch(
    model: ModelParams, x: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, ForwardCache]:
    """
    Batched forward pass used for training.

    Args:
        model (ModelParams): Weights.
        x (np.ndarray): Inputs, (B, T, F).
        mask (np.ndarray): Validity, (B, T).

    Returns:
        tuple[np.ndarray, ForwardCache]: (B, C) probabilities and the cache.
    """
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    _check_input(x, mask, model)
    extent = _valid_extent(mask)
    x, mask = x[:, :extent], mask[:, :extent]

    hidden, cache_fwd, cache_bwd = _encode(x, mask, model, keep_cache=True)
    masked = np.where(mask[:, :, None], hidden, -np.inf)
    # np.argmax keeps the earliest index on ties
    argmax = masked.argmax(axis=1)
    pooled = np.take_along_axis(masked, argmax[:, None, :], axis=1)[:, 0, :]
    probs = dense_softmax(pooled, model)
    cache = ForwardCache(
        pooled=pooled, argmax=argmax, steps=extent, fwd=cache_fwd, bwd=cache_bwd
    )
    return probs, cache


def backward_batch(
    model: ModelParams, cache: ForwardCache, d_logits: np.ndarray
) -> ModelParams:
    """
    Gradients of the loss w.r.t. all parameters given d(loss)/d(logits).

    The max pool routes each column's gradient to its argmax timestep only.
    """
    hidden = model.hidden_size
    batch = d_logits.shape[0]

    d_dense_weights = d_logits.T @ cache.pooled
    d_dense_bias = d_logits.sum(axis=0)
    d_pooled = d_logits @ model.dense_weights

    d_hidden = np.zeros((batch, cache.steps, 2 * hidden))
    np.put_along_axis(d_hidden, cache.argmax[:, None, :], d_pooled[:, None, :], axis=1)

    grad_fwd = scan_backward(cache.fwd, d_hidden[:, :, :hidden], model.forward_cell)
    grad_bwd = scan_backward(
        cache.bwd, d_hidden[:, ::-1, hidden:], model.backward_cell
    )
    return ModelParams(
        forward_cell=grad_fwd,
        backward_cell=grad_bwd,
        dense_weights=d_dense_weights,
        dense_bias=d_dense_bias,
    )
