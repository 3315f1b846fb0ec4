"""Parameter containers for the bidirectional LSTM classifier.

Gate order everywhere is (input, forget, cell-candidate, output). Each cell keeps
its four input matrices stacked as `W` with shape (4, H, F), the recurrent matrices
as `U` with shape (4, H, H) and the biases as `b` with shape (4, H). Gradients and
Adam moments reuse the same containers.
"""

from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np

from transientpy.errors import ShapeError
from transientpy.io.ingest import N_CLASSES
from transientpy.preprocess.ops import N_FEATURES

GATES: tuple[str, ...] = ("i", "f", "g", "o")
FORGET_GATE = 1
FORGET_BIAS = 1.0


@dataclass
class LstmCellParams:
    """
    Weights of one LSTM direction.

    Attributes:
        W (np.ndarray): Input weights, (4, H, F).
        U (np.ndarray): Recurrent weights, (4, H, H).
        b (np.ndarray): Biases, (4, H).
    """

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 3 or self.W.shape[0] != 4:
            msg = f"Input weights must have shape (4, H, F), got {self.W.shape}."
            raise ShapeError(msg)
        hidden = self.W.shape[1]
        if self.U.shape != (4, hidden, hidden):
            msg = f"Recurrent weights must have shape (4, {hidden}, {hidden}), got {self.U.shape}."
            raise ShapeError(msg)
        if self.b.shape != (4, hidden):
            msg = f"Biases must have shape (4, {hidden}), got {self.b.shape}."
            raise ShapeError(msg)

    @property
    def hidden_size(self) -> int:
        return self.W.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[2]

    @classmethod
    def zeros(cls, hidden: int, features: int = N_FEATURES) -> "LstmCellParams":
        return cls(
            W=np.zeros((4, hidden, features)),
            U=np.zeros((4, hidden, hidden)),
            b=np.zeros((4, hidden)),
        )


@dataclass
class ModelParams:
    """
    All learnable weights: forward cell, backward cell and dense softmax layer.

    Attributes:
        forward_cell (LstmCellParams): Cell that reads t = 0 .. T-1.
        backward_cell (LstmCellParams): Cell that reads t = T-1 .. 0.
        dense_weights (np.ndarray): (5, 2H) output weights.
        dense_bias (np.ndarray): (5,) output bias.
    """

    forward_cell: LstmCellParams
    backward_cell: LstmCellParams
    dense_weights: np.ndarray
    dense_bias: np.ndarray

    def __post_init__(self):
        self.dense_weights = np.asarray(self.dense_weights, dtype=np.float64)
        self.dense_bias = np.asarray(self.dense_bias, dtype=np.float64)
        hidden = self.forward_cell.hidden_size
        if (
            self.backward_cell.hidden_size != hidden
            or self.backward_cell.input_size != self.forward_cell.input_size
        ):
            msg = "Forward and backward cells must have identical dimensions."
            raise ShapeError(msg)
        n_out = self.dense_weights.shape[0]
        if self.dense_weights.shape != (n_out, 2 * hidden):
            msg = f"Dense weights must have shape (C, {2 * hidden}), got {self.dense_weights.shape}."
            raise ShapeError(msg)
        if self.dense_bias.shape != (n_out,):
            msg = f"Dense bias must have shape ({n_out},), got {self.dense_bias.shape}."
            raise ShapeError(msg)

    @property
    def hidden_size(self) -> int:
        return self.forward_cell.hidden_size

    @property
    def input_size(self) -> int:
        return self.forward_cell.input_size

    @property
    def n_classes(self) -> int:
        return self.dense_weights.shape[0]

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """Yield (name, array) pairs in the fixed checkpoint order."""
        cells = (("forward", self.forward_cell), ("backward", self.backward_cell))
        for prefix, cell in cells:
            for k, gate in enumerate(GATES):
                yield f"{prefix}.W_{gate}", cell.W[k]
            for k, gate in enumerate(GATES):
                yield f"{prefix}.U_{gate}", cell.U[k]
            for k, gate in enumerate(GATES):
                yield f"{prefix}.b_{gate}", cell.b[k]
        yield "dense.weights", self.dense_weights
        yield "dense.bias", self.dense_bias

    def arrays(self) -> list[np.ndarray]:
        """The seven underlying arrays (views, not copies)."""
        return [
            self.forward_cell.W,
            self.forward_cell.U,
            self.forward_cell.b,
            self.backward_cell.W,
            self.backward_cell.U,
            self.backward_cell.b,
            self.dense_weights,
            self.dense_bias,
        ]

    def map(self, fn: Callable[..., np.ndarray], *others: "ModelParams") -> "ModelParams":
        """Apply `fn` array-wise across this and other identically shaped params."""
        columns = zip(self.arrays(), *(o.arrays() for o in others), strict=True)
        out = [fn(*arrays) for arrays in columns]
        return ModelParams(
            forward_cell=LstmCellParams(*out[0:3]),
            backward_cell=LstmCellParams(*out[3:6]),
            dense_weights=out[6],
            dense_bias=out[7],
        )

    def copy(self) -> "ModelParams":
        return self.map(np.copy)

    def zeros_like(self) -> "ModelParams":
        return self.map(np.zeros_like)

    def flat(self) -> np.ndarray:
        """All parameters concatenated in checkpoint order."""
        return np.concatenate([arr.ravel() for _, arr in self.tensors()])

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def equals(self, other: "ModelParams") -> bool:
        """Bit-for-bit equality of every array."""
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays(), strict=True)
        )

    @classmethod
    def zeros(
        cls, hidden: int, features: int = N_FEATURES, n_classes: int = N_CLASSES
    ) -> "ModelParams":
        return cls(
            forward_cell=LstmCellParams.zeros(hidden, features),
            backward_cell=LstmCellParams.zeros(hidden, features),
            dense_weights=np.zeros((n_classes, 2 * hidden)),
            dense_bias=np.zeros(n_classes),
        )

    @classmethod
    def from_flat(
        cls,
        flat: np.ndarray,
        hidden: int,
        features: int = N_FEATURES,
        n_classes: int = N_CLASSES,
    ) -> "ModelParams":
        """Inverse of `flat`: rebuild params from a vector in checkpoint order."""
        params = cls.zeros(hidden, features, n_classes)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != params.size:
            msg = f"Expected {params.size} values for hidden size {hidden}, got {flat.size}."
            raise ShapeError(msg)
        offset = 0
        for _, arr in params.tensors():
            arr[...] = flat[offset : offset + arr.size].reshape(arr.shape)
            offset += arr.size
        return params


def _glorot(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int
) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def initialize_params(
    hidden: int,
    seed: int,
    features: int = N_FEATURES,
    n_classes: int = N_CLASSES,
) -> ModelParams:
    """
    Draw initial weights: Glorot-uniform per gate matrix, zero biases except a
    forget-gate bias of 1.0.

    Args:
        hidden (int): Hidden size H (>= 1).
        seed (int): Seed; equal seeds give identical parameters.
        features (int): Input features per timestep.
        n_classes (int): Output classes.

    Returns:
        ModelParams: Freshly initialized parameters.
    """
    if hidden < 1:
        msg = f"hidden must be >= 1, got {hidden}."
        raise ShapeError(msg)
    rng = np.random.default_rng(seed)

    def cell() -> LstmCellParams:
        W = np.stack([_glorot(rng, (hidden, features), features, hidden) for _ in GATES])
        U = np.stack([_glorot(rng, (hidden, hidden), hidden, hidden) for _ in GATES])
        b = np.zeros((4, hidden))
        b[FORGET_GATE] = FORGET_BIAS
        return LstmCellParams(W=W, U=U, b=b)

    forward_cell = cell()
    backward_cell = cell()
    dense_weights = _glorot(rng, (n_classes, 2 * hidden), 2 * hidden, n_classes)
    return ModelParams(
        forward_cell=forward_cell,
        backward_cell=backward_cell,
        dense_weights=dense_weights,
        dense_bias=np.zeros(n_classes),
    )
