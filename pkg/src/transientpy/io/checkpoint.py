"""Binary model checkpoints.

Layout (all integers little-endian)::

    magic            8 bytes   b"TPYCKPT\\n"
    format_version   uint32
    manifest_length  uint32
    manifest         UTF-8 text, one ``key=value`` per line
    payload          float64 little-endian, tensors in ``ModelParams.tensors()`` order

The payload size must match the dimensions stated in the manifest exactly.
"""

import logging
import pathlib
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any

import fsspec
import numpy as np

from transientpy.errors import ConfigError, CorruptCheckpoint, VersionError
from transientpy.io.ingest import CLASS_NAMES
from transientpy.nn.params import ModelParams
from transientpy.preprocess.ops import SEQUENCE_LENGTH
from transientpy.preprocess.pipeline import DEFAULT_TIME_SCALE, PreprocessConfig

UTC = timezone.utc

logger = logging.getLogger(__name__)

MAGIC = b"TPYCKPT\n"
FORMAT_VERSION = 1
HEADER = np.dtype([("version", "<u4"), ("manifest_length", "<u4")])
PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    """Model weights together with the manifest they were stored with."""

    params: ModelParams
    manifest: dict[str, str]

    @property
    def seed(self) -> int | None:
        value = self.manifest.get("seed", "")
        try:
            return int(value) if value else None
        except ValueError as err:
            msg = f"Checkpoint manifest has a non-integer seed {value!r}."
            raise CorruptCheckpoint(msg) from err

    @property
    def class_names(self) -> tuple[str, ...]:
        names = self.manifest.get("class_names")
        return tuple(names.split(",")) if names else CLASS_NAMES

    @property
    def preprocess_config(self) -> PreprocessConfig:
        """
        Preprocessing settings the model was trained with.

        Raises:
            CorruptCheckpoint: If the stored settings do not parse or are out of range.
        """
        target_len = self.manifest.get("sequence_length", str(SEQUENCE_LENGTH))
        time_scale = self.manifest.get("time_scale", repr(DEFAULT_TIME_SCALE))
        try:
            return PreprocessConfig(target_len=int(target_len), time_scale=float(time_scale))
        except (ValueError, ConfigError) as err:
            msg = (
                f"Checkpoint manifest has invalid preprocessing settings "
                f"(sequence_length={target_len!r}, time_scale={time_scale!r}): {err}"
            )
            raise CorruptCheckpoint(msg) from err


def build_manifest(
    params: ModelParams,
    seed: int | None = None,
    preprocess_config: PreprocessConfig | None = None,
    created: datetime | None = None,
) -> dict[str, str]:
    if preprocess_config is None:
        preprocess_config = PreprocessConfig()
    if created is None:
        created = datetime.now(UTC)
    return {
        "hidden_size": str(params.hidden_size),
        "feature_count": str(params.input_size),
        "sequence_length": str(preprocess_config.target_len),
        "class_count": str(params.n_classes),
        "seed": "" if seed is None else str(seed),
        "created": created.isoformat(),
        "class_names": ",".join(CLASS_NAMES),
        "time_scale": repr(float(preprocess_config.time_scale)),
    }


def encode_checkpoint(params: ModelParams, manifest: dict[str, str]) -> bytes:
    text = "".join(f"{key}={value}\n" for key, value in manifest.items())
    body = text.encode("utf-8")
    header = np.array([(FORMAT_VERSION, len(body))], dtype=HEADER).tobytes()
    payload = params.flat().astype(PAYLOAD_DTYPE).tobytes()
    return MAGIC + header + body + payload


def _parse_manifest(body: bytes) -> dict[str, str]:
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as err:
        msg = "Checkpoint manifest is not valid UTF-8."
        raise CorruptCheckpoint(msg) from err
    manifest = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            msg = f"Malformed manifest line: {line!r}"
            raise CorruptCheckpoint(msg)
        manifest[key] = value
    return manifest


def decode_checkpoint(data: bytes) -> Checkpoint:
    """
    Parse checkpoint bytes.

    Raises:
        VersionError: If the format version is not supported.
        CorruptCheckpoint: If the file is truncated or inconsistent with its manifest.
    """
    start = len(MAGIC) + HEADER.itemsize
    if len(data) < start or data[: len(MAGIC)] != MAGIC:
        msg = "Not a transientpy checkpoint (bad magic or truncated header)."
        raise CorruptCheckpoint(msg)
    header = np.frombuffer(data, dtype=HEADER, count=1, offset=len(MAGIC))[0]
    version = int(header["version"])
    if version != FORMAT_VERSION:
        msg = f"Unsupported checkpoint format version {version}; expected {FORMAT_VERSION}."
        raise VersionError(msg)

    end = start + int(header["manifest_length"])
    if end > len(data):
        msg = "Checkpoint truncated inside the manifest."
        raise CorruptCheckpoint(msg)
    manifest = _parse_manifest(data[start:end])

    try:
        hidden = int(manifest["hidden_size"])
        features = int(manifest["feature_count"])
        n_classes = int(manifest["class_count"])
    except (KeyError, ValueError) as err:
        msg = f"Checkpoint manifest lacks valid dimensions: {err}"
        raise CorruptCheckpoint(msg) from err
    if min(hidden, features, n_classes) < 1:
        msg = f"Invalid dimensions in manifest: H={hidden}, F={features}, C={n_classes}."
        raise CorruptCheckpoint(msg)

    expected = ModelParams.zeros(hidden, features, n_classes).size * PAYLOAD_DTYPE.itemsize
    payload = data[end:]
    if len(payload) != expected:
        msg = (
            f"Payload holds {len(payload)} bytes but the manifest dimensions require "
            f"{expected}."
        )
        raise CorruptCheckpoint(msg)

    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64)
    params = ModelParams.from_flat(values, hidden, features, n_classes)
    return Checkpoint(params=params, manifest=manifest)


def save_model(
    m: ModelParams,
    path: str | pathlib.Path,
    seed: int | None = None,
    preprocess_config: PreprocessConfig | None = None,
    storage_options: dict[str, Any] | None = None,
) -> None:
    """
    Write a model checkpoint to a local path or fsspec URL.

    Args:
        m (ModelParams): Weights to store.
        path (str | pathlib.Path): Destination.
        seed (int | None): Training seed, recorded in the manifest.
        preprocess_config (PreprocessConfig | None): Preprocessing used in training.
        storage_options (dict[str, Any] | None): Options for the fsspec filesystem.
    """
    if storage_options is None:
        storage_options = {}
    data = encode_checkpoint(m, build_manifest(m, seed, preprocess_config))
    with fsspec.open(str(path), mode="wb", **storage_options) as f:
        f.write(data)
    logger.info(f"Saved model with {m.size} parameters (H={m.hidden_size}) to {path}.")


def load_checkpoint(
    path: str | pathlib.Path, storage_options: dict[str, Any] | None = None
) -> Checkpoint:
    if storage_options is None:
        storage_options = {}
    with fsspec.open(str(path), mode="rb", **storage_options) as f:
        data = f.read()
    return decode_checkpoint(data)


def load_model(
    path: str | pathlib.Path, storage_options: dict[str, Any] | None = None
) -> ModelParams:
    """Read the weights of a checkpoint written by `save_model`."""
    return load_checkpoint(path, storage_options).params
