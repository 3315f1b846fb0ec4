import numpy as np
import pytest

from transientpy.errors import CorruptCheckpoint, VersionError
from transientpy.io.checkpoint import (
    HEADER,
    MAGIC,
    build_manifest,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    load_model,
    save_model,
)
from transientpy.nn.params import initialize_params
from transientpy.preprocess.pipeline import PreprocessConfig


def _encoded(model, **kwargs):
    return encode_checkpoint(model, build_manifest(model, **kwargs))


def test_save_then_load_is_bit_identical(tmp_path, rng):
    for k in range(20):
        hidden = int(rng.integers(1, 9))
        model = initialize_params(hidden, seed=k)
        model = model.map(lambda a: a + rng.normal(size=a.shape))
        path = tmp_path / f"model_{k}.ckpt"
        save_model(model, path, seed=k)
        assert load_model(path).equals(model)


def test_manifest_round_trip(tmp_path, small_model):
    path = tmp_path / "model.ckpt"
    config = PreprocessConfig(target_len=200, time_scale=100.0)
    save_model(small_model, path, seed=42, preprocess_config=config)
    ckpt = load_checkpoint(path)
    assert ckpt.seed == 42
    assert ckpt.class_names == ("S-Like", "Fast", "Long", "Periodic", "Non-Periodic")
    assert ckpt.preprocess_config == config
    assert ckpt.manifest["hidden_size"] == "4"
    assert ckpt.manifest["feature_count"] == "5"
    assert ckpt.manifest["class_count"] == "5"


def test_missing_seed_is_none(small_model):
    assert decode_checkpoint(_encoded(small_model)).seed is None


def test_truncated_file(small_model):
    data = _encoded(small_model)
    for cut in (1, 8, len(data) - len(MAGIC)):
        with pytest.raises(CorruptCheckpoint):
            decode_checkpoint(data[:-cut])


def test_extra_bytes(small_model):
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(_encoded(small_model) + b"\x00" * 8)


def test_edited_hidden_size(small_model):
    data = _encoded(small_model).replace(b"hidden_size=4\n", b"hidden_size=5\n")
    with pytest.raises(CorruptCheckpoint, match="Payload"):
        decode_checkpoint(data)


def test_malformed_manifest(small_model):
    data = _encoded(small_model).replace(b"class_count=5\n", b"class_count 5\n")
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(data)


@pytest.mark.parametrize(
    ("key", "value"),
    [
        ("sequence_length", "many"),
        ("sequence_length", "3.5"),
        ("sequence_length", "0"),
        ("time_scale", "fast"),
        ("time_scale", "-1.0"),
        ("time_scale", "nan"),
    ],
)
def test_invalid_preprocess_settings(small_model, key, value):
    ckpt = decode_checkpoint(_encoded(small_model))
    ckpt.manifest[key] = value
    with pytest.raises(CorruptCheckpoint, match=key):
        _ = ckpt.preprocess_config


def test_non_integer_seed(small_model):
    ckpt = decode_checkpoint(_encoded(small_model, seed=3))
    ckpt.manifest["seed"] = "three"
    with pytest.raises(CorruptCheckpoint, match="seed"):
        _ = ckpt.seed


def test_missing_preprocess_settings_use_defaults(small_model):
    ckpt = decode_checkpoint(_encoded(small_model))
    del ckpt.manifest["sequence_length"], ckpt.manifest["time_scale"]
    assert ckpt.preprocess_config == PreprocessConfig()


def test_unsupported_version(small_model):
    data = bytearray(_encoded(small_model))
    header = np.frombuffer(bytes(data), dtype=HEADER, count=1, offset=len(MAGIC)).copy()
    header["version"] = 2
    data[len(MAGIC) : len(MAGIC) + HEADER.itemsize] = header.tobytes()
    with pytest.raises(VersionError):
        decode_checkpoint(bytes(data))


def test_bad_magic(small_model):
    data = b"NOTACKPT" + _encoded(small_model)[len(MAGIC) :]
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(data)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "absent.ckpt")


def test_in_memory_filesystem(small_model):
    save_model(small_model, "memory://models/small.ckpt")
    assert load_model("memory://models/small.ckpt").equals(small_model)
