import math

import numpy as np
import pytest

from transientpy.errors import EmptySequence, ShapeError
from transientpy.nn.lstm import (
    bidirectional_encode,
    dense_softmax,
    forward_batch,
    lstm_cell_step,
    masked_global_max_pool,
    predict,
)
from transientpy.nn.params import LstmCellParams, ModelParams
from transientpy.preprocess.ops import PreprocessedSequence


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def reference_cell(x, h_prev, c_prev, p: LstmCellParams):
    """Scalar-loop LSTM cell, gate order (i, f, g, o)."""
    hidden = p.hidden_size
    z = [[0.0] * hidden for _ in range(4)]
    for k in range(4):
        for j in range(hidden):
            acc = p.b[k, j]
            for m in range(p.input_size):
                acc += p.W[k, j, m] * x[m]
            for m in range(hidden):
                acc += p.U[k, j, m] * h_prev[m]
            z[k][j] = acc
    h = []
    c = []
    for j in range(hidden):
        i = _sigmoid(z[0][j])
        f = _sigmoid(z[1][j])
        g = math.tanh(z[2][j])
        o = _sigmoid(z[3][j])
        c_j = f * c_prev[j] + i * g
        c.append(c_j)
        h.append(o * math.tanh(c_j))
    return np.array(h), np.array(c)


def _random_cell(rng, hidden=3, features=5, scale=0.3):
    return LstmCellParams(
        W=rng.normal(scale=scale, size=(4, hidden, features)),
        U=rng.normal(scale=scale, size=(4, hidden, hidden)),
        b=rng.normal(scale=scale, size=(4, hidden)),
    )


def _jittered(model: ModelParams, rng, scale=0.2) -> ModelParams:
    return model.map(lambda a: a + rng.normal(scale=scale, size=a.shape))


def test_zero_cell_from_rest():
    p = LstmCellParams.zeros(hidden=4)
    h, c = lstm_cell_step(np.ones(5), np.zeros(4), np.zeros(4), p)
    np.testing.assert_array_equal(h, np.zeros(4))
    np.testing.assert_array_equal(c, np.zeros(4))


def test_zero_cell_halves_cell_state():
    p = LstmCellParams.zeros(hidden=3)
    v = np.array([2.0, -1.0, 0.5])
    h, c = lstm_cell_step(np.zeros(5), np.zeros(3), v, p)
    np.testing.assert_allclose(c, 0.5 * v, rtol=0, atol=1e-15)
    np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * v), rtol=0, atol=1e-15)


def test_cell_matches_scalar_reference(rng):
    for _ in range(20):
        p = _random_cell(rng)
        x = rng.normal(size=5)
        h_prev = rng.normal(scale=0.5, size=3)
        c_prev = rng.normal(scale=0.5, size=3)
        h, c = lstm_cell_step(x, h_prev, c_prev, p)
        h_ref, c_ref = reference_cell(x, h_prev, c_prev, p)
        np.testing.assert_allclose(h, h_ref, rtol=0, atol=1e-12)
        np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-12)


def test_cell_batched_matches_rows(rng):
    p = _random_cell(rng)
    x = rng.normal(size=(4, 5))
    h0 = rng.normal(size=(4, 3))
    c0 = rng.normal(size=(4, 3))
    h, c = lstm_cell_step(x, h0, c0, p)
    for row in range(4):
        h_row, c_row = lstm_cell_step(x[row], h0[row], c0[row], p)
        np.testing.assert_allclose(h[row], h_row, rtol=0, atol=1e-12)
        np.testing.assert_allclose(c[row], c_row, rtol=0, atol=1e-12)


@pytest.mark.parametrize(
    ("x", "h", "c"),
    [
        (np.zeros(4), np.zeros(3), np.zeros(3)),
        (np.zeros(5), np.zeros(2), np.zeros(2)),
        (np.zeros(5), np.zeros(3), np.zeros(2)),
        (np.zeros((2, 5)), np.zeros((3, 3)), np.zeros((3, 3))),
    ],
)
def test_cell_shape_errors(x, h, c):
    with pytest.raises(ShapeError):
        lstm_cell_step(x, h, c, LstmCellParams.zeros(hidden=3))


def test_cell_params_reject_bad_shapes():
    with pytest.raises(ShapeError):
        LstmCellParams(W=np.zeros((4, 3, 5)), U=np.zeros((4, 3, 2)), b=np.zeros((4, 3)))


def test_zero_model_encodes_zeros(sequence_factory, rng):
    model = ModelParams.zeros(hidden=1)
    seq = sequence_factory(rng, length=6, target_len=10)
    hidden = bidirectional_encode(seq, model)
    assert hidden.shape == (10, 2)
    np.testing.assert_array_equal(hidden[:6], np.zeros((6, 2)))
    assert np.isnan(hidden[6:]).all()


def test_single_valid_step_is_one_cell_evaluation(small_model, sequence_factory, rng):
    model = _jittered(small_model, rng)
    seq = sequence_factory(rng, length=1, target_len=8)
    hidden = bidirectional_encode(seq, model)
    zeros = np.zeros(model.hidden_size)
    h_fwd, _ = lstm_cell_step(seq.features[0], zeros, zeros, model.forward_cell)
    h_bwd, _ = lstm_cell_step(seq.features[0], zeros, zeros, model.backward_cell)
    np.testing.assert_allclose(hidden[0], np.concatenate([h_fwd, h_bwd]), rtol=0, atol=1e-12)


def test_encode_matches_manual_unroll(small_model, sequence_factory, rng):
    model = _jittered(small_model, rng)
    seq = sequence_factory(rng, length=5, target_len=7)
    hidden = bidirectional_encode(seq, model)
    H = model.hidden_size

    h = c = np.zeros(H)
    for t in range(5):
        h, c = lstm_cell_step(seq.features[t], h, c, model.forward_cell)
        np.testing.assert_allclose(hidden[t, :H], h, rtol=0, atol=1e-12)
    h = c = np.zeros(H)
    for t in reversed(range(5)):
        h, c = lstm_cell_step(seq.features[t], h, c, model.backward_cell)
        np.testing.assert_allclose(hidden[t, H:], h, rtol=0, atol=1e-12)


def test_appended_padding_leaves_valid_rows_unchanged(small_model, sequence_factory, rng):
    model = _jittered(small_model, rng)
    for length in (1, 4, 9):
        short = sequence_factory(rng, length=length, target_len=length)
        features = np.zeros((length + 13, 5))
        features[:length] = short.features
        mask = np.zeros(length + 13, dtype=bool)
        mask[:length] = True
        padded = PreprocessedSequence(features, mask, None, short.object_id)

        a = bidirectional_encode(short, model)
        b = bidirectional_encode(padded, model)
        np.testing.assert_allclose(b[:length], a, rtol=0, atol=1e-12)
        np.testing.assert_allclose(
            predict(model, [padded]), predict(model, [short]), rtol=0, atol=1e-12
        )


def test_predict_ignores_appended_padding_exactly(small_model, sequence_factory, rng):
    model = _jittered(small_model, rng)
    for _ in range(100):
        length = int(rng.integers(1, 40))
        extra = int(rng.integers(1, 201))
        short = sequence_factory(rng, length=length, target_len=length)
        padded = PreprocessedSequence(
            np.vstack([short.features, rng.normal(size=(extra, 5))]),
            np.concatenate([short.mask, np.zeros(extra, dtype=bool)]),
            None,
            short.object_id,
        )
        np.testing.assert_array_equal(predict(model, [padded]), predict(model, [short]))


def test_encode_rejects_empty_mask(small_model):
    seq = PreprocessedSequence(np.zeros((4, 5)), np.zeros(4, dtype=bool), None, 1)
    with pytest.raises(EmptySequence):
        bidirectional_encode(seq, small_model)


@pytest.mark.parametrize(
    ("rows", "mask", "expected"),
    [
        ([[1.0, -2.0], [3.0, 0.0]], [True, True], [3.0, 0.0]),
        ([[1.0, -2.0], [9.0, 9.0]], [True, False], [1.0, -2.0]),
        ([[4.0, 5.0]], [True], [4.0, 5.0]),
        ([[np.nan, np.nan], [-1.0, -3.0]], [False, True], [-1.0, -3.0]),
    ],
)
def test_masked_global_max_pool(rows, mask, expected):
    pooled = masked_global_max_pool(np.array(rows), np.array(mask))
    np.testing.assert_array_equal(pooled, expected)


def test_pool_errors():
    with pytest.raises(EmptySequence):
        masked_global_max_pool(np.ones((2, 2)), np.array([False, False]))
    with pytest.raises(ShapeError):
        masked_global_max_pool(np.ones((2, 2)), np.array([True]))


def _bias_only_model(bias, hidden=2):
    model = ModelParams.zeros(hidden=hidden)
    model.dense_bias = np.asarray(bias, dtype=float)
    return model


@pytest.mark.parametrize(
    ("logits", "expected"),
    [
        ([0.0] * 5, [0.2] * 5),
        ([math.log(2.0), 0.0, 0.0, 0.0, 0.0], [1 / 3, 1 / 6, 1 / 6, 1 / 6, 1 / 6]),
    ],
)
def test_dense_softmax_examples(logits, expected):
    probs = dense_softmax(np.zeros(4), _bias_only_model(logits))
    np.testing.assert_allclose(probs, expected, rtol=0, atol=1e-12)


def test_dense_softmax_shift_invariant(rng):
    z = rng.normal(size=5)
    v = np.zeros(4)
    a = dense_softmax(v, _bias_only_model(z))
    b = dense_softmax(v, _bias_only_model(z + 100.0))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    assert a.sum() == pytest.approx(1.0, abs=1e-12)


def test_dense_softmax_width_mismatch(small_model):
    with pytest.raises(ShapeError):
        dense_softmax(np.zeros(3), small_model)


def test_zero_model_predicts_uniform(sequence_factory, rng):
    seqs = [sequence_factory(rng, length=n, target_len=12) for n in (1, 5, 12)]
    probs = predict(ModelParams.zeros(hidden=3), seqs)
    np.testing.assert_allclose(probs, np.full((3, 5), 0.2), rtol=0, atol=1e-15)


def test_predict_follows_input_order(small_model, sequence_factory, rng):
    model = _jittered(small_model, rng)
    seqs = [sequence_factory(rng, length=n, target_len=10, object_id=n) for n in (2, 7, 4, 10)]
    probs = predict(model, seqs)
    order = [2, 0, 3, 1]
    permuted = predict(model, [seqs[k] for k in order])
    np.testing.assert_array_equal(permuted, probs[order])
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_forward_batch_agrees_with_predict(small_model, sequence_factory, rng):
    model = _jittered(small_model, rng)
    seqs = [sequence_factory(rng, length=n, target_len=9) for n in (3, 9, 1)]
    x = np.stack([s.features for s in seqs])
    mask = np.stack([s.mask for s in seqs])
    probs, cache = forward_batch(model, x, mask)
    np.testing.assert_allclose(probs, predict(model, seqs), rtol=0, atol=1e-12)
    assert cache.steps == 9


def test_forward_batch_trims_trailing_padding(small_model, sequence_factory, rng):
    seqs = [sequence_factory(rng, length=n, target_len=20) for n in (3, 5)]
    x = np.stack([s.features for s in seqs])
    mask = np.stack([s.mask for s in seqs])
    _, cache = forward_batch(small_model, x, mask)
    assert cache.steps == 5
    assert cache.argmax.max() < 5
